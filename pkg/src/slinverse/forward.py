"""Forward problem: shooting for phi and psi, eigenvalues and norming constants.

The ODE -y'' + q y = lam**2 rho y is written as a first-order system for
(y, y') and advanced with the two-stage fourth-order Magnus method on a grid
that has ``a`` as a node.  Each step applies the exact exponential of a
traceless 2x2 matrix, so for q = 0 the propagation is exact and for smooth q
the error does not grow with lam the way Runge-Kutta phase error does.  The
state is carried straight through x = a, which gives continuity of y and y'
there by construction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, EigenvalueSearchError, NormingConstantWarning
from .geometry import PI, MediumProfile, split_grid
from .unperturbed import lambda0_sequence

DEFAULT_PANELS = 2000
ROOT_TOL = 1e-12
CHAR_TOL = 1e-8
DERIV_STEP = 1e-4

_GAUSS = math.sqrt(3.0) / 6.0
_CHUNK = 256


@dataclass(frozen=True)
class PotentialGrid:
    """Samples of q on a grid over [0, pi] that contains ``a``.

    ``func`` is kept when the potential came from a formula, so the
    integrator can evaluate it exactly between nodes; otherwise a cubic
    spline is fitted separately on each layer.
    """

    profile: MediumProfile
    x: np.ndarray
    q: np.ndarray
    func: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if x.ndim != 1 or x.shape != q.shape or len(x) < 3:
            raise ValueError("x and q must be 1-D arrays of equal length >= 3")
        if abs(x[0]) > 1e-12 or abs(x[-1] - PI) > 1e-12:
            raise DomainError("potential grid must cover exactly [0, pi]")
        if np.any(np.diff(x) <= 0.0):
            raise ValueError("potential grid must be strictly increasing")
        if not np.any(np.abs(x - self.profile.a) < 1e-12):
            raise DomainError("potential grid must contain the interface point a")
        if not np.all(np.isfinite(q)):
            raise ValueError("q values must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "q", q)
        if self.func is None:
            object.__setattr__(self, "_splines", self._fit())

    @classmethod
    def from_function(cls, profile: MediumProfile, func, panels: int = DEFAULT_PANELS):
        x, _ = split_grid(profile, panels)
        q = np.broadcast_to(np.asarray(func(x), dtype=float), x.shape).copy()
        return cls(profile, x, q, func)

    @classmethod
    def constant(cls, profile: MediumProfile, c: float = 0.0, panels: int = DEFAULT_PANELS):
        return cls.from_function(profile, lambda x: np.full_like(x, c, dtype=float), panels)

    def _fit(self):
        ia = int(np.argmin(np.abs(self.x - self.profile.a)))
        pieces = []
        for sl in (slice(0, ia + 1), slice(ia, None)):
            xs, qs = self.x[sl], self.q[sl]
            if len(xs) >= 4:
                pieces.append(CubicSpline(xs, qs))
            else:
                pieces.append(lambda s, xs=xs, qs=qs: np.interp(s, xs, qs))
        return pieces

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.func is not None:
            return np.broadcast_to(np.asarray(self.func(s), dtype=float), s.shape)
        left, right = self._splines
        return np.where(s <= self.profile.a, left(np.minimum(s, self.profile.a)),
                        right(np.maximum(s, self.profile.a)))


@dataclass(frozen=True)
class SolutionTrace:
    lam: float
    x: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalue / norming-constant pairs, n = 1..N."""

    profile: MediumProfile
    lambdas: np.ndarray
    alphas: np.ndarray
    kind: str = "perturbed"
    char_residual: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        alp = np.asarray(self.alphas, dtype=float)
        if lam.ndim != 1 or lam.shape != alp.shape or len(lam) == 0:
            raise ValueError("lambdas and alphas must be non-empty 1-D arrays of equal length")
        if np.any(np.diff(lam) <= 0.0):
            raise ValueError("eigenvalues must be strictly increasing")
        if np.any(lam < 0.0):
            raise ValueError("eigenvalues must be non-negative")
        if np.any(alp <= 0.0):
            raise ValueError("norming constants must be positive")
        if self.kind not in ("perturbed", "unperturbed"):
            raise ValueError("kind must be 'perturbed' or 'unperturbed'")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "alphas", alp)

    def __len__(self):
        return len(self.lambdas)

    def truncated(self, n: int) -> "SpectralData":
        res = None if self.char_residual is None else self.char_residual[:n]
        return SpectralData(self.profile, self.lambdas[:n], self.alphas[:n], self.kind, res)


def _exp_traceless(h, p, sigma):
    """Entries of exp([[p, h], [sigma, -p]])."""
    w = p * p + h * sigma
    r = np.sqrt(np.abs(w))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c = np.where(w < 0.0, np.cos(r), np.cosh(r))
        s = np.where(w < 0.0, np.sinc(r / np.pi), np.where(r > 0.0, np.sinh(r) / r, 1.0))
    return c + p * s, h * s, sigma * s, c - p * s


def _square_integrals(k, h):
    """Integrals over [0, h] of C**2, C*S, S**2 for y'' = k y, C(0)=1, S'(0)=1."""
    k, h = np.broadcast_arrays(np.asarray(k, dtype=float), np.asarray(h, dtype=float))
    z = k * h * h
    icc, ics, iss = (np.empty_like(z) for _ in range(3))
    small = np.abs(z) < 1e-4
    osc = (~small) & (k < 0.0)
    hyp = (~small) & (k > 0.0)
    ks, hs = k[small], h[small]
    icc[small] = hs + ks * hs ** 3 / 3.0 + ks ** 2 * hs ** 5 / 15.0
    ics[small] = hs ** 2 / 2.0 + ks * hs ** 4 / 6.0 + ks ** 2 * hs ** 6 / 45.0
    iss[small] = hs ** 3 / 3.0 + ks * hs ** 5 / 15.0 + 2.0 * ks ** 2 * hs ** 7 / 315.0
    w, ho = np.sqrt(-k[osc]), h[osc]
    s2 = np.sin(2.0 * w * ho) / (4.0 * w)
    icc[osc] = ho / 2.0 + s2
    ics[osc] = np.sin(w * ho) ** 2 / (2.0 * w * w)
    iss[osc] = (ho / 2.0 - s2) / (w * w)
    g, hh = np.sqrt(k[hyp]), h[hyp]
    sh2 = np.sinh(2.0 * g * hh) / (4.0 * g)
    icc[hyp] = hh / 2.0 + sh2
    ics[hyp] = np.sinh(g * hh) ** 2 / (2.0 * g * g)
    iss[hyp] = (sh2 - hh / 2.0) / (g * g)
    return icc, ics, iss


class Shooter:
    """Cached cell data for one (profile, potential, grid) triple."""

    def __init__(self, profile: MediumProfile, potential: PotentialGrid, panels: int = DEFAULT_PANELS):
        if potential.profile != profile:
            raise ValueError("potential was built for a different profile")
        self.profile = profile
        self.potential = potential
        self.x, self.ia = split_grid(profile, panels)
        self.h = np.diff(self.x)
        left = self.x[:-1]
        self.q1 = potential(left + (0.5 - _GAUSS) * self.h)
        self.q2 = potential(left + (0.5 + _GAUSS) * self.h)
        self.rho = np.where(np.arange(len(self.h)) < self.ia, 1.0, profile.alpha ** 2)
        self.p = (math.sqrt(3.0) / 12.0) * self.h ** 2 * (self.q1 - self.q2)

    def _propagators(self, lam):
        lam2 = np.asarray(lam, dtype=float)[None, :] ** 2
        h, p, rho = self.h[:, None], self.p[:, None], self.rho[:, None]
        sigma = 0.5 * h * ((self.q1 + self.q2)[:, None] - 2.0 * lam2 * rho)
        return _exp_traceless(h, p, sigma)

    def _chunks(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        for i in range(0, len(lam), _CHUNK):
            yield slice(i, i + _CHUNK), lam[i:i + _CHUNK]

    def characteristic(self, lam):
        """phi(pi, lam) for a vector of lam."""
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        out = np.empty_like(lam_arr)
        for sl, chunk in self._chunks(lam_arr):
            e11, e12, e21, e22 = self._propagators(chunk)
            y = np.ones_like(chunk)
            d = np.zeros_like(chunk)
            for k in range(len(self.h)):
                y, d = e11[k] * y + e12[k] * d, e21[k] * y + e22[k] * d
            out[sl] = y
        return float(out[0]) if np.ndim(lam) == 0 else out

    def traces(self, lam, backward: bool = False):
        """Values and derivatives at every node, shape (len(lam), nodes).

        Forward traces start from (1, 0) at x = 0; backward traces start from
        (0, 1) at x = pi.
        """
        lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
        n = len(self.x)
        vals = np.empty((len(lam_arr), n))
        ders = np.empty((len(lam_arr), n))
        for sl, chunk in self._chunks(lam_arr):
            e11, e12, e21, e22 = self._propagators(chunk)
            if not backward:
                y, d = np.ones_like(chunk), np.zeros_like(chunk)
                vals[sl, 0], ders[sl, 0] = y, d
                for k in range(n - 1):
                    y, d = e11[k] * y + e12[k] * d, e21[k] * y + e22[k] * d
                    vals[sl, k + 1], ders[sl, k + 1] = y, d
            else:
                y, d = np.zeros_like(chunk), np.ones_like(chunk)
                vals[sl, -1], ders[sl, -1] = y, d
                for k in range(n - 2, -1, -1):
                    y, d = e22[k] * y - e12[k] * d, -e21[k] * y + e11[k] * d
                    vals[sl, k], ders[sl, k] = y, d
        return vals, ders

    def _partial_step(self, x0, hh, lam, state, backward=False):
        if hh == 0.0:
            return state
        q1 = float(self.potential(x0 + (0.5 - _GAUSS) * hh))
        q2 = float(self.potential(x0 + (0.5 + _GAUSS) * hh))
        rho = 1.0 if x0 + 0.5 * hh <= self.profile.a else self.profile.alpha ** 2
        p = (math.sqrt(3.0) / 12.0) * hh * hh * (q1 - q2)
        sigma = 0.5 * hh * (q1 + q2 - 2.0 * lam * lam * rho)
        e11, e12, e21, e22 = (float(v) for v in _exp_traceless(hh, p, sigma))
        y, d = state
        if backward:
            return e22 * y - e12 * d, -e21 * y + e11 * d
        return e11 * y + e12 * d, e21 * y + e22 * d

    def value_at(self, lam: float, x: float, backward: bool = False):
        """(y, y') at an arbitrary x in [0, pi] for a single lam."""
        if not -1e-12 <= x <= PI + 1e-12:
            raise DomainError(f"x must lie in [0, pi], got {x}")
        x = min(max(x, 0.0), PI)
        vals, ders = self.traces([lam], backward=backward)
        k = int(np.searchsorted(self.x, x, side="right")) - 1
        k = min(max(k, 0), len(self.x) - 2)
        if not backward:
            return self._partial_step(self.x[k], x - self.x[k], lam, (vals[0, k], ders[0, k]))
        hh = self.x[k + 1] - x
        return self._partial_step(x, hh, lam, (vals[0, k + 1], ders[0, k + 1]), backward=True)

    def weighted_square_norms(self, lam):
        """Integral of rho * phi(., lam)**2 over [0, pi] for each lam.

        Each cell is integrated exactly for the frozen coefficient
        mean(q) - lam**2 rho starting from the computed node state, so the
        rule stays accurate when the solution oscillates many times per
        hundred cells.
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        vals, ders = self.traces(lam)
        y, d = vals[:, :-1], ders[:, :-1]
        k = 0.5 * (self.q1 + self.q2)[None, :] - lam[:, None] ** 2 * self.rho[None, :]
        icc, ics, iss = _square_integrals(k, self.h[None, :])
        cell = y * y * icc + 2.0 * y * d * ics + d * d * iss
        return (cell * self.rho[None, :]).sum(axis=1)

    def characteristic_derivative(self, lam, step: float = DERIV_STEP):
        """d/dlam phi(pi, lam) by the five-point central difference."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        offs = np.array([-2.0, -1.0, 1.0, 2.0]) * step
        vals = self.characteristic((lam[:, None] + offs[None, :]).ravel()).reshape(len(lam), 4)
        return (vals[:, 0] - 8.0 * vals[:, 1] + 8.0 * vals[:, 2] - vals[:, 3]) / (12.0 * step)

    def count_interior_zeros(self, lam) -> np.ndarray:
        vals, _ = self.traces(lam)
        body = vals[:, :-1]
        return np.count_nonzero(np.signbit(body[:, 1:]) != np.signbit(body[:, :-1]), axis=1)

    def eigenvalues(self, n: int, tol: float = ROOT_TOL, char_tol: float = CHAR_TOL):
        """The ``n`` smallest non-negative roots of phi(pi, .)."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.count_interior_zeros([0.0])[0] > 0:
            raise EigenvalueSearchError(
                "phi(., 0) changes sign on (0, pi): the problem has eigenvalues with lam**2 < 0")
        guesses = lambda0_sequence(self.profile, n + 1)
        gap = float(np.min(np.diff(np.concatenate([[0.0], guesses]))))
        step = gap / 32.0
        roots = []
        if abs(self.characteristic(0.0)) < char_tol:
            roots.append((0.0, 0.0))
        lo, hi = 0.0, guesses[n - 1] + 0.5 * gap
        limit = guesses[n] + 50.0 * gap
        prev = None
        while len(roots) < n:
            if lo >= limit:
                raise EigenvalueSearchError(
                    f"only {len(roots)} of {n} eigenvalues found in [0, {lo:.6g}]; "
                    f"next expected near {guesses[len(roots)]:.6g}")
            grid = np.arange(lo, hi + 0.5 * step, step) if prev is None else \
                np.arange(lo + step, hi + 0.5 * step, step)
            vals = self.characteristic(grid)
            if prev is not None:
                grid = np.concatenate([[prev[0]], grid])
                vals = np.concatenate([[prev[1]], vals])
            for i in range(len(grid) - 1):
                if vals[i] == 0.0 and grid[i] > 0.0:
                    roots.append((grid[i], grid[i]))
                elif vals[i] * vals[i + 1] < 0.0:
                    roots.append((grid[i], grid[i + 1]))
            prev = (grid[-1], vals[-1])
            lo, hi = grid[-1], grid[-1] + 4.0 * gap
        brackets = np.array(roots[:n])
        lam = self._bisect(brackets[:, 0], brackets[:, 1], tol)
        zeros = self.count_interior_zeros(lam)
        bad = np.nonzero(zeros != np.arange(n))[0]
        if len(bad):
            i = int(bad[0])
            raise EigenvalueSearchError(
                f"eigenfunction {i + 1} in bracket [{brackets[i, 0]:.12g}, {brackets[i, 1]:.12g}] "
                f"has {zeros[i]} interior zeros, expected {i}")
        return lam

    def _bisect(self, lo, hi, tol):
        lo, hi = lo.copy(), hi.copy()
        flo = self.characteristic(lo)
        for _ in range(200):
            if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
                break
            mid = 0.5 * (lo + hi)
            fm = self.characteristic(mid)
            left = np.signbit(fm) != np.signbit(flo)
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            flo = np.where(left, flo, fm)
        return 0.5 * (lo + hi)


def _shooter(profile, q, panels=DEFAULT_PANELS):
    if not isinstance(q, PotentialGrid):
        q = PotentialGrid.from_function(profile, q, panels) if callable(q) \
            else PotentialGrid.constant(profile, float(q), panels)
    return Shooter(profile, q, panels)


def shoot_phi(profile: MediumProfile, q, lam: float, panels: int = DEFAULT_PANELS) -> SolutionTrace:
    """phi(x, lam) and phi'(x, lam) on the integration grid."""
    sh = _shooter(profile, q, panels)
    vals, ders = sh.traces([lam])
    return SolutionTrace(float(lam), sh.x, vals[0], ders[0])


def shoot_psi(profile: MediumProfile, q, lam: float, panels: int = DEFAULT_PANELS) -> SolutionTrace:
    """psi(x, lam) with psi(pi) = 0, psi'(pi) = 1, integrated backwards."""
    sh = _shooter(profile, q, panels)
    vals, ders = sh.traces([lam], backward=True)
    return SolutionTrace(float(lam), sh.x, vals[0], ders[0])


def characteristic(profile: MediumProfile, q, lam, panels: int = DEFAULT_PANELS):
    """Delta(lam) = phi(pi, lam); even in lam."""
    return _shooter(profile, q, panels).characteristic(lam)


def find_eigenvalues(profile: MediumProfile, q, n: int, panels: int = DEFAULT_PANELS,
                     tol: float = ROOT_TOL) -> np.ndarray:
    return _shooter(profile, q, panels).eigenvalues(n, tol=tol)


def norming_constant(profile: MediumProfile, q, lam_n, panels: int = DEFAULT_PANELS,
                     char_tol: float = CHAR_TOL):
    sh = _shooter(profile, q, panels)
    lam = np.atleast_1d(np.asarray(lam_n, dtype=float))
    resid = np.abs(sh.characteristic(lam))
    if np.any(resid > char_tol):
        warnings.warn(f"|Delta(lam)| = {resid.max():.3g} exceeds {char_tol:g}; "
                      "norming constant of a non-eigenvalue", NormingConstantWarning, stacklevel=2)
    out = sh.weighted_square_norms(lam)
    return float(out[0]) if np.ndim(lam_n) == 0 else out


def forward_spectrum(profile: MediumProfile, q, n: int, panels: int = DEFAULT_PANELS,
                     tol: float = ROOT_TOL) -> SpectralData:
    """Eigenvalues, norming constants and |Delta| residuals for n modes."""
    sh = _shooter(profile, q, panels)
    lam = sh.eigenvalues(n, tol=tol)
    alphas = sh.weighted_square_norms(lam)
    resid = np.abs(sh.characteristic(lam))
    return SpectralData(profile, lam, alphas, "perturbed", resid)


def residue_identity_check(profile: MediumProfile, q, n: int, x,
                           panels: int = DEFAULT_PANELS):
    """Relative gap between phi/(2 lam_n alpha_n) and psi/Delta'(lam_n) at x.

    Both sides are the residue of the resolvent kernel at lam_n, one from
    the norming constant and one from the characteristic derivative.
    ``x`` may be a float or a sequence.
    """
    sh = _shooter(profile, q, panels)
    lam = sh.eigenvalues(n)[n - 1]
    if lam == 0.0:
        raise EigenvalueSearchError("identity is undefined at lam = 0")
    alpha = sh.weighted_square_norms([lam])[0]
    ddelta = sh.characteristic_derivative([lam])[0]
    if abs(ddelta) < 1e-10:
        raise EigenvalueSearchError(f"Delta'(lam_{n}) is numerically zero (double root)")
    out = []
    for xv in np.atleast_1d(np.asarray(x, dtype=float)):
        lhs = sh.value_at(lam, xv)[0] / (2.0 * lam * alpha)
        rhs = sh.value_at(lam, xv, backward=True)[0] / ddelta
        out.append(abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    return out[0] if np.ndim(x) == 0 else np.array(out)
