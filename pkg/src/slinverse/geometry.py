"""Two-layer medium: density rho(x) and the characteristic maps mu+/mu-.

The density is 1 on [0, a] and alpha**2 on (a, pi].  The point x = a belongs
to the first layer everywhere in this package (closed-left, open-right).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ProfileError

PI = math.pi
_SLACK = 1e-12


def _check_range(x, lo, hi, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < lo - _SLACK) or np.any(arr > hi + _SLACK):
        raise DomainError(f"{name} must lie in [{lo:.17g}, {hi:.17g}], got {x!r}")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


@dataclass(frozen=True)
class MediumProfile:
    """Discontinuity location ``a`` and square-root density ``alpha`` of the right layer."""

    a: float
    alpha: float

    def __post_init__(self):
        a, alpha = float(self.a), float(self.alpha)
        if not (math.isfinite(a) and math.isfinite(alpha)):
            raise ProfileError("a and alpha must be finite")
        if not 0.0 < a < PI:
            raise ProfileError(f"need 0 < a < pi, got a={a}")
        if alpha <= 0.0:
            raise ProfileError(f"need alpha > 0, got alpha={alpha}")
        if not a * (1.0 + alpha) > PI * alpha:
            raise ProfileError(
                f"need a(1+alpha) > pi*alpha (mu-(pi) > 0), got a={a}, alpha={alpha}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "alpha", alpha)

    @property
    def reflection(self) -> float:
        """(1 - alpha) / (1 + alpha), the reflection coefficient at the interface."""
        return (1.0 - self.alpha) / (1.0 + self.alpha)

    @property
    def mu_plus_pi(self) -> float:
        return self.alpha * PI + self.a * (1.0 - self.alpha)

    @property
    def mu_minus_pi(self) -> float:
        return -self.alpha * PI + self.a * (1.0 + self.alpha)

    def sqrt_density(self, x):
        """sqrt(rho(x)) without range checks; arguments beyond pi use the right layer."""
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.a, 1.0, self.alpha)

    def density(self, x):
        xa = _check_range(x, 0.0, PI)
        return _out(self.sqrt_density(xa) ** 2, x)

    def mu_plus(self, x):
        xa = _check_range(x, 0.0, PI)
        r = self.sqrt_density(xa)
        return _out(xa * r + self.a * (1.0 - r), x)

    def mu_minus(self, x):
        xa = _check_range(x, 0.0, PI)
        r = self.sqrt_density(xa)
        return _out(-xa * r + self.a * (1.0 + r), x)

    def mu_plus_inverse(self, s):
        sa = _check_range(s, 0.0, self.mu_plus_pi, name="s")
        res = np.where(sa <= self.a, sa, (sa - self.a * (1.0 - self.alpha)) / self.alpha)
        return _out(res, s)

    def density_integral(self) -> float:
        """Exact value of the integral of rho over [0, pi]."""
        return self.a + self.alpha ** 2 * (PI - self.a)


def split_grid(profile: MediumProfile, n_panels: int, lo: float = 0.0, hi: float = PI):
    """Piecewise-uniform grid on [lo, hi] with ``n_panels`` panels that contains ``a``.

    A single uniform grid over [0, pi] can only contain ``a`` when a/pi is
    rational, so the panels are shared out between the two layers in
    proportion to their lengths.  Returns ``(nodes, index_of_a)``; when ``a``
    is not inside (lo, hi) the grid is uniform and ``index_of_a`` is None.
    """
    if n_panels < 2:
        raise ValueError("need at least 2 panels")
    a = profile.a
    if not lo < a < hi:
        return np.linspace(lo, hi, n_panels + 1), None
    n_left = int(round(n_panels * (a - lo) / (hi - lo)))
    n_left = min(max(n_left, 1), n_panels - 1)
    left = np.linspace(lo, a, n_left + 1)
    right = np.linspace(a, hi, n_panels - n_left + 1)
    return np.concatenate([left, right[1:]]), n_left
