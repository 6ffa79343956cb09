"""Slice-by-slice solution of the main integral equation and recovery of q.

For a fixed x the unknown is s -> A(x, s) on [0, mu+(x)], and for 0 <= t <= x

    (L_x A)(t) + F(x, t) + int_0^{mu+(x)} A(x, xi) F0(xi, t) dxi = 0,

    (L_x f)(t) = f(t) + c f(2a - t)        t <= a   (reflected term only when 2a - t <= mu+(x))
    (L_x f)(t) = 2/(1 + alpha) f(mu+(t))   t > a

with c = (1 - alpha)/(1 + alpha).  At t = a both branches agree.  The trace
A(x, mu+(x)) carries the potential:

    q = 2 T'                     on [0, a]
    q = 4 alpha^2/(1 + alpha) T' on (a, pi].

Grid layout for x > a.  The reflection t -> 2a - t maps [mu-(x), a] onto
[a, mu+(x)] in s.  The t-grid is built so that this map sends nodes onto
nodes, which makes L_x exact on the grid (no interpolation):

    I   t in [0, mu-(x)]      nI panels
    II  t in [mu-(x), a]      K panels, spacing alpha (x - a)/K
    III t in (a, x]           K panels, s = mu+(t) spacing alpha (x - a)/K

A(x, .) jumps at s = mu-(x), so the node mu-(x) is stored twice: the end
of I holds the left limit and the start of II the right limit.  Every row
is collocated on a node including t = x, which gives the trace directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularSystemError
from .forward import PotentialGrid, SpectralData
from .geometry import PI, MediumProfile, split_grid
from .kernels import KernelInputs
from .unperturbed import UnperturbedData

DEFAULT_X_GRID = 101
DEFAULT_T_GRID = 128
MIN_T_GRID = 8
RESIDUAL_TOL = 1e-8
FIT_NODES = 6
SINGULAR_TOL = 1e-12


def _trapezoid(n_panels, h):
    w = np.full(n_panels + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class SliceGrid:
    """Collocation points t_j, unknown points s_j and the exact L_x stencil."""

    profile: MediumProfile
    x: float
    t_nodes: np.ndarray
    s_nodes: np.ndarray
    weights: np.ndarray            # quadrature weights on s_nodes
    diag: np.ndarray               # coefficient of A(s_j) in row j
    reflect: np.ndarray            # column of the reflected unknown, -1 if none
    segments: tuple = ()           # (name, start, stop) index ranges

    @property
    def size(self) -> int:
        return len(self.t_nodes)

    def apply_L(self, f):
        """(L_x f)(t_j) for f given on s_nodes."""
        f = np.asarray(f, dtype=float)
        out = self.diag * f
        has = self.reflect >= 0
        out[has] += self.profile.reflection * f[self.reflect[has]]
        return out

    def apply_L_inverse(self, phi):
        """f on s_nodes with apply_L(f) = phi, from the explicit inverse."""
        phi = np.asarray(phi, dtype=float)
        f = phi / self.diag
        # Reflected rows reference unknowns in segment III (or themselves at t = a),
        # which the line above already resolved.
        has = self.reflect >= 0
        f[has] = (phi[has] - self.profile.reflection * f[self.reflect[has]]) / self.diag[has]
        return f

    def trace_index(self) -> int:
        return self.size - 1


def slice_grid(profile: MediumProfile, x: float, m: int = DEFAULT_T_GRID) -> SliceGrid:
    """Aligned grid for the slice at ``x`` with about ``m`` panels on [0, x]."""
    if m < MIN_T_GRID:
        raise ValueError(f"t-grid needs at least {MIN_T_GRID} panels, got {m}")
    if not 0.0 <= x <= PI + 1e-12:
        raise DomainError(f"x must lie in [0, pi], got {x}")
    a, al, c = profile.a, profile.alpha, profile.reflection
    if x == 0.0:
        return SliceGrid(profile, 0.0, np.zeros(1), np.zeros(1), np.zeros(1),
                         np.ones(1), np.full(1, -1), (("I", 0, 1),))
    if x <= a:
        t = np.linspace(0.0, x, m + 1)
        return SliceGrid(profile, x, t, t.copy(), _trapezoid(m, x / m), np.ones(m + 1),
                         np.full(m + 1, -1), (("I", 0, m + 1),))

    h = x / m
    k = max(1, int(round((x - a) / h)))
    mu_minus = -al * x + a * (1.0 + al)
    n1 = max(2, int(round(mu_minus / h)))
    t1 = np.linspace(0.0, mu_minus, n1 + 1)
    step = al * (x - a) / k
    s3 = a + step * np.arange(1, k + 1)
    s3[-1] = a + al * (x - a)
    t3 = a + (s3 - a) / al
    t3[-1] = x
    t2 = np.concatenate([2.0 * a - s3[::-1], [a]])
    t2[0] = mu_minus
    t = np.concatenate([t1, t2, t3])
    s = np.concatenate([t1, t2, s3])
    n_i, n_ii = len(t1), len(t2)
    w_upper = _trapezoid(2 * k, step)
    w = np.concatenate([_trapezoid(n1, mu_minus / n1), w_upper])
    diag = np.ones(len(t))
    diag[n_i + n_ii:] = 2.0 / (1.0 + al)
    reflect = np.full(len(t), -1)
    # Row for t_II[j], j < K, reflects onto s_III[K - 1 - j]; t = a reflects onto itself.
    for j in range(k):
        reflect[n_i + j] = n_i + n_ii + (k - 1 - j)
    diag[n_i + n_ii - 1] = 1.0 + c
    segs = (("I", 0, n_i), ("II", n_i, n_i + n_ii), ("III", n_i + n_ii, len(t)))
    return SliceGrid(profile, float(x), t, s, w, diag, reflect, segs)


def lx_apply(profile: MediumProfile, x: float, f, t: float) -> float:
    """(L_x f)(t) for a callable f on [0, mu+(x)]; f read as 0 beyond mu+(x)."""
    if not 0.0 <= t <= x:
        raise DomainError(f"t must lie in [0, x], got {t}")
    a, al = profile.a, profile.alpha
    if t > a:
        return 2.0 / (1.0 + al) * float(f(al * t - al * a + a))
    refl = 2.0 * a - t
    top = al * x - al * a + a
    extra = profile.reflection * float(f(refl)) if x > a and refl <= top + 1e-14 else 0.0
    return float(f(t)) + extra


def lx_inverse(profile: MediumProfile, x: float, phi, s: float) -> float:
    """The explicit inverse of L_x at s in [0, mu+(x)]; phi is zero beyond x."""
    a, al = profile.a, profile.alpha

    def ext(u):
        return float(phi(u)) if u <= x + 1e-14 else 0.0

    if s > a:
        return 0.5 * (1.0 + al) * ext((s + al * a - a) / al)
    if s == a:
        return 0.5 * (1.0 + al) * ext(a) if x > a else ext(a)
    return ext(s) - 0.5 * (1.0 - al) * ext((a + al * a - s) / al)


@dataclass(frozen=True)
class SliceSystem:
    grid: SliceGrid
    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def t_nodes(self):
        return self.grid.t_nodes

    @property
    def s_nodes(self):
        return self.grid.s_nodes


@dataclass(frozen=True)
class KernelSlice:
    """A(x, s) on the s-grid of one slice; zero beyond mu+(x)."""

    x: float
    s_nodes: np.ndarray
    a_values: np.ndarray
    grid: SliceGrid | None = field(default=None, compare=False, repr=False)

    @property
    def trace(self) -> float:
        return float(self.a_values[-1])


def build_slice(profile: MediumProfile, kernels: KernelInputs, x: float,
                m: int = DEFAULT_T_GRID) -> SliceSystem:
    if kernels.profile != profile:
        raise ValueError("kernel data built for a different profile")
    g = slice_grid(profile, x, m)
    n = g.size
    matrix = np.diag(g.diag)
    rows = np.nonzero(g.reflect >= 0)[0]
    matrix[rows, g.reflect[rows]] += profile.reflection
    f0 = kernels.F0_matrix(g.s_nodes, g.t_nodes)           # (s, t)
    matrix += (f0 * g.weights[:, None]).T
    # F(x, t) = sum phi0(x) phi0(t) / alpha termwise, same as the mu+/mu- mix.
    fx = kernels.phi0_table([x])[0] * kernels._terms()[1]
    rhs = -(kernels.phi0_table(g.t_nodes) @ fx)
    return SliceSystem(g, matrix, rhs)


def solve_slice(system: SliceSystem, residual_tol: float = RESIDUAL_TOL) -> KernelSlice:
    g = system.grid
    sv = np.linalg.svd(system.matrix, compute_uv=False)
    if sv[-1] <= SINGULAR_TOL * sv[0]:
        raise SingularSystemError(
            f"slice at x={g.x:.12g} is singular (smallest singular value {sv[-1]:.3g})", x=g.x)
    sol = np.linalg.solve(system.matrix, system.rhs)
    resid = np.max(np.abs(system.matrix @ sol - system.rhs))
    scale = max(np.max(np.abs(system.rhs)), np.finfo(float).tiny)
    if resid > residual_tol * scale and resid > 1e-14:
        raise SingularSystemError(
            f"slice at x={g.x:.12g}: residual {resid:.3g} exceeds {residual_tol:g} * |F|", x=g.x)
    return KernelSlice(g.x, g.s_nodes.copy(), sol, g)


def smallest_singular_value(system: SliceSystem) -> float:
    return float(np.linalg.svd(system.matrix, compute_uv=False)[-1])


@dataclass(frozen=True)
class TraceData:
    """A(x, mu+(x)) on the pieces [0, a] and (a, pi] of the x-grid."""

    profile: MediumProfile
    x_left: np.ndarray
    left: np.ndarray
    x_right: np.ndarray
    right: np.ndarray

    def as_rows(self):
        return np.concatenate([self.x_left, self.x_right]), np.concatenate([self.left, self.right])


def diagonal_trace(slices, profile: MediumProfile | None = None) -> TraceData:
    """Read A(x, mu+(x)) off each slice, split into x <= a and x > a.

    Without a profile every slice goes into the left piece.
    """
    xs = np.array([s.x for s in slices], dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ValueError("slices must be strictly increasing in x")
    vals = np.array([s.trace for s in slices], dtype=float)
    if profile is None:
        return TraceData(None, xs, vals, np.empty(0), np.empty(0))
    right = xs > profile.a
    return TraceData(profile, xs[~right], vals[~right], xs[right], vals[right])


def _piece_derivative(x, y, bad):
    """dy/dx by second-order differences over the nodes not flagged ``bad``.

    Flagged nodes past either end of the unflagged run take the slope of a
    quadratic fitted by least squares to the six nearest unflagged values.
    """
    if len(x) < 2:
        return np.zeros(len(x))
    good = ~bad
    if np.count_nonzero(good) < FIT_NODES:
        good = np.ones(len(x), dtype=bool)
    xg, yg = x[good], y[good]
    dg = np.gradient(yg, xg, edge_order=2 if len(xg) > 2 else 1)
    out = np.empty(len(x))
    out[good] = dg
    fits = {}
    for i in np.nonzero(~good)[0]:
        if xg[0] < x[i] < xg[-1]:
            out[i] = np.interp(x[i], xg, dg)
            continue
        side = x[i] < xg[0]
        if side not in fits:
            sl = slice(None, FIT_NODES) if side else slice(-FIT_NODES, None)
            fits[side] = np.polyder(np.polyfit(xg[sl], yg[sl], 2))
        out[i] = np.polyval(fits[side], x[i])
    return out


def recover_potential(trace: TraceData, profile: MediumProfile | None = None,
                      guard: float = 0.0) -> PotentialGrid:
    """q from the trace derivative, taken separately on each side of a.

    Nodes within ``guard`` of x = a or x = pi are not differenced; their q
    is extrapolated from the neighbouring nodes.  Truncated kernel series
    have discontinuity lines that meet the diagonal t = x exactly at those
    two points, and the trace carries Gibbs ripples there.
    """
    profile = profile or trace.profile
    a, al = profile.a, profile.alpha

    def flags(x):
        if guard <= 0.0:
            return np.zeros(len(x), dtype=bool)
        return (np.abs(x - a) <= guard + 1e-12) | (x >= PI - guard - 1e-12)

    q_left = 2.0 * _piece_derivative(trace.x_left, trace.left, flags(trace.x_left))
    q_right = 4.0 * al * al / (1.0 + al) * _piece_derivative(
        trace.x_right, trace.right, flags(trace.x_right))
    x = np.concatenate([trace.x_left, trace.x_right])
    q = np.concatenate([q_left, q_right])
    return PotentialGrid(profile, x, q)


@dataclass(frozen=True)
class InversionConfig:
    """Truncation, grid sizes and the truncation remedies used by ``invert``.

    ``taper`` names the weights applied to the kernel series and
    ``guard_wavelengths`` sets the excluded band around a and pi in units of
    mu+(pi)/N, the shortest wavelength the series resolves.
    """

    n_trunc: int = 64
    x_grid: int = DEFAULT_X_GRID
    t_grid: int = DEFAULT_T_GRID
    residual_tol: float = RESIDUAL_TOL
    taper: str = "lanczos"
    guard_wavelengths: float = 3.0

    def __post_init__(self):
        if self.n_trunc < 1:
            raise ValueError("n_trunc must be >= 1")
        if self.x_grid < 5:
            raise ValueError("x_grid must be >= 5")
        if self.t_grid < MIN_T_GRID:
            raise ValueError(f"t_grid must be >= {MIN_T_GRID}")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.guard_wavelengths < 0:
            raise ValueError("guard_wavelengths must be >= 0")


@dataclass(frozen=True)
class InversionResult:
    potential: PotentialGrid
    trace: TraceData
    min_singular_value: float


def reconstruct(spectral: SpectralData, config: InversionConfig | None = None,
                unperturbed: UnperturbedData | None = None) -> InversionResult:
    config = config or InversionConfig()
    profile = spectral.profile
    if len(spectral) < config.n_trunc:
        raise ValueError(f"need {config.n_trunc} modes, got {len(spectral)}")
    if unperturbed is None:
        unperturbed = UnperturbedData.compute(profile, config.n_trunc)
    kern = KernelInputs(spectral, unperturbed, config.n_trunc, config.taper)
    xs, _ = split_grid(profile, config.x_grid - 1)
    slices = []
    smin = math.inf
    for x in xs:
        system = build_slice(profile, kern, float(x), config.t_grid)
        slices.append(solve_slice(system, config.residual_tol))
        smin = min(smin, smallest_singular_value(system))
    trace = diagonal_trace(slices, profile)
    guard = config.guard_wavelengths * profile.mu_plus_pi / config.n_trunc
    return InversionResult(recover_potential(trace, profile, guard), trace, smin)


def invert(spectral: SpectralData, config: InversionConfig | None = None,
           unperturbed: UnperturbedData | None = None) -> PotentialGrid:
    """Potential reconstructed from eigenvalues and norming constants."""
    return reconstruct(spectral, config, unperturbed).potential


def relative_l2_error(recovered: PotentialGrid, exact, lo: float = 0.05, hi: float = PI - 0.05):
    """(relative L2 error, sup error) of ``recovered`` against callable ``exact`` on [lo, hi]."""
    x, q = recovered.x, recovered.q
    keep = (x >= lo) & (x <= hi)
    xs = x[keep]
    ref = np.asarray(exact(xs), dtype=float)
    err = q[keep] - ref
    num = np.trapezoid(err ** 2, xs)
    den = np.trapezoid(ref ** 2, xs)
    rel = math.sqrt(num / den) if den > 0 else math.sqrt(num)
    return rel, float(np.max(np.abs(err)))
