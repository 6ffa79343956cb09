"""Closed-form machinery for the problem with q = 0.

The solution of -y'' = lam**2 rho y, y(0) = 1, y'(0) = 0 is

    phi0(x, lam) = (1 + 1/r)/2 cos(lam mu+(x)) + (1 - 1/r)/2 cos(lam mu-(x)),   r = sqrt(rho(x)).

Its zeros in ``lam`` at x = pi give the reference spectrum.  Because the
cos(lam mu+(pi)) term always dominates, phi0(pi, lam) has the sign (-1)**k at
lam = k pi / mu+(pi), which brackets the k-th root exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EigenvalueSearchError
from .geometry import PI, MediumProfile, _check_range

SIMPSON_PANELS = 4096
# Simpson panels are increased until lam * h stays below this.
_MAX_PHASE_STEP = 0.005


def phi0(profile: MediumProfile, x, lam):
    """phi0(x, lam); broadcasts over ``x`` and ``lam``."""
    x = _check_range(x, 0.0, PI)
    lam = np.asarray(lam, dtype=float)
    r = profile.sqrt_density(x)
    mp = x * r + profile.a * (1.0 - r)
    mm = -x * r + profile.a * (1.0 + r)
    val = 0.5 * (1.0 + 1.0 / r) * np.cos(lam * mp) + 0.5 * (1.0 - 1.0 / r) * np.cos(lam * mm)
    return float(val) if val.ndim == 0 else val


def phi0_derivative(profile: MediumProfile, x, lam):
    """d/dx phi0(x, lam)."""
    x = _check_range(x, 0.0, PI)
    lam = np.asarray(lam, dtype=float)
    r = profile.sqrt_density(x)
    mp = x * r + profile.a * (1.0 - r)
    mm = -x * r + profile.a * (1.0 + r)
    val = (-0.5 * (1.0 + 1.0 / r) * r * lam * np.sin(lam * mp)
           + 0.5 * (1.0 - 1.0 / r) * r * lam * np.sin(lam * mm))
    return float(val) if val.ndim == 0 else val


def characteristic0(profile: MediumProfile, lam):
    """phi0(pi, lam)."""
    return phi0(profile, PI, lam)


def lambda0_sequence(profile: MediumProfile, n: int, scan: int = 64) -> np.ndarray:
    """First ``n`` positive roots of phi0(pi, .) refined to ~1e-14.

    Each root is bracketed by consecutive multiples of pi / mu+(pi).  A
    ``scan``-point sub-scan of every bracket checks that it holds exactly one
    sign change.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    period = PI / profile.mu_plus_pi
    roots = np.empty(n)
    for k in range(n):
        lo, hi = k * period, (k + 1) * period
        grid = np.linspace(lo, hi, scan + 1)
        vals = characteristic0(profile, grid)
        changes = np.count_nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1]))
        if changes != 1:
            raise EigenvalueSearchError(
                f"bracket [{lo}, {hi}] for root {k + 1} holds {changes} sign changes")
        roots[k] = brentq(lambda s: characteristic0(profile, s), lo, hi, xtol=1e-15, rtol=1e-15)
    return roots


def _simpson_panels(length: float, lam_max: float, minimum: int) -> int:
    n = max(minimum, int(np.ceil(lam_max * length / _MAX_PHASE_STEP)))
    return n + (n % 2)


def weighted_integral(profile: MediumProfile, integrand, lam_max: float = 1.0,
                      panels: int = SIMPSON_PANELS):
    """Composite Simpson of ``rho * integrand`` over [0, pi], split at ``a``.

    ``integrand(x)`` receives a 1-D array and may return shape (len(x), ...).
    """
    from scipy.integrate import simpson

    total = 0.0
    for lo, hi, rho in ((0.0, profile.a, 1.0), (profile.a, PI, profile.alpha ** 2)):
        m = _simpson_panels(hi - lo, max(lam_max, 1.0), panels)
        x = np.linspace(lo, hi, m + 1)
        total = total + rho * simpson(integrand(x), x=x, axis=0)
    return total


def alpha0_sequence(profile: MediumProfile, lam0, panels: int = SIMPSON_PANELS) -> np.ndarray:
    """Norming constants: integral of rho * phi0(., lam)**2 over [0, pi]."""
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    return weighted_integral(profile, lambda x: phi0(profile, x[:, None], lam0[None, :]) ** 2,
                             lam_max=float(lam0.max()), panels=panels)


def cosine_decomposition(profile: MediumProfile, xi, lam):
    """Rebuild cos(lam xi) from phi0 values; valid for 0 <= xi <= mu+(pi).

    Below ``a`` this is phi0 itself; above ``a`` it mixes the transmitted
    point mu+^-1(xi) and the reflected point 2a - xi.
    """
    xi = _check_range(xi, 0.0, profile.mu_plus_pi, name="xi")
    lam = np.asarray(lam, dtype=float)
    a, al = profile.a, profile.alpha
    below = xi <= a
    x_tr = np.where(below, xi, xi / al + a - a / al)
    x_rf = np.where(below, xi, 2.0 * a - xi)
    x_rf = np.clip(x_rf, 0.0, PI)
    upper = (2.0 * al / (1.0 + al)) * phi0(profile, x_tr, lam) \
        + ((1.0 - al) / (1.0 + al)) * phi0(profile, x_rf, lam)
    val = np.where(below, phi0(profile, x_tr, lam), upper)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class UnperturbedData:
    """Reference spectrum (lam0_n, alpha0_n) for q = 0, or posited values for it."""

    profile: MediumProfile
    lambda0: np.ndarray
    alpha0: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambda0, dtype=float)
        alp = np.asarray(self.alpha0, dtype=float)
        if lam.shape != alp.shape or lam.ndim != 1:
            raise ValueError("lambda0 and alpha0 must be 1-D of equal length")
        if np.any(alp <= 0.0):
            raise ValueError("alpha0 must be positive")
        object.__setattr__(self, "lambda0", lam)
        object.__setattr__(self, "alpha0", alp)

    @classmethod
    def compute(cls, profile: MediumProfile, n: int) -> "UnperturbedData":
        lam = lambda0_sequence(profile, n)
        return cls(profile, lam, alpha0_sequence(profile, lam))

    def __len__(self):
        return len(self.lambda0)


def parseval_defects(profile: MediumProfile, f, n_max: int, data: UnperturbedData | None = None):
    """Relative Parseval defect 1 - sum_{n<=N} c_n**2 / alpha0_n / ||f||**2 for N = 1..n_max.

    ``c_n`` is the rho-weighted inner product of ``f`` with phi0(., lam0_n).
    """
    if data is None:
        data = UnperturbedData.compute(profile, n_max)
    if len(data) < n_max:
        raise DomainError("not enough reference modes for the requested truncation")
    lam = data.lambda0[:n_max]
    coeffs = weighted_integral(
        profile, lambda x: f(x)[:, None] * phi0(profile, x[:, None], lam[None, :]),
        lam_max=float(lam.max()))
    norm2 = weighted_integral(profile, lambda x: f(x) ** 2, lam_max=float(lam.max()))
    partial = np.cumsum(coeffs ** 2 / data.alpha0[:n_max])
    return 1.0 - partial / norm2
