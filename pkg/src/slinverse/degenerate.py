"""A rank-one spectral perturbation whose main equation solves in closed form.

Data: lam_n = lam0_n = pi (n - 1/2) / mu+(pi) for all n, alpha0_n = pi for
all n, alpha_n = pi for n > 1 and alpha_1 = pi / 2.  Only the first term of
the kernel series survives, so with lam1 = lam_1 and phi1 = phi0(., lam1)

    F0(xi, t)   = phi1(t) cos(lam1 xi) / pi
    F(x, t)     = rho(t) phi1(t) phi1(x) / pi          (rho-weighted form)

and, with A_t(x, t) = rho(t) (L_x A)(t),

    A_t(x, t) + F(x, t) + int_0^x A_t(x, xi) F(xi, t) dxi = 0

has the solution A_t(x, t) = -rho(t) phi1(t) Lam(x) / pi where
Lam(x) = phi1(x) / (1 + Phi(x) / pi) and Phi(x) = int_0^x rho phi1**2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DomainError
from .forward import SpectralData
from .geometry import PI, MediumProfile
from .kernels import KernelInputs
from .main_equation import DEFAULT_T_GRID, KernelSlice, slice_grid
from .unperturbed import UnperturbedData, phi0

QUAD_EPS = 1e-13


@dataclass(frozen=True)
class ExampleData:
    profile: MediumProfile

    @property
    def lambda1(self) -> float:
        return PI / (2.0 * self.profile.mu_plus_pi)

    def lambdas(self, n: int) -> np.ndarray:
        return PI * (np.arange(1, n + 1) - 0.5) / self.profile.mu_plus_pi

    def spectral(self, n: int) -> SpectralData:
        alphas = np.full(n, PI)
        alphas[0] = PI / 2.0
        return SpectralData(self.profile, self.lambdas(n), alphas, "perturbed")

    def reference(self, n: int) -> UnperturbedData:
        return UnperturbedData(self.profile, self.lambdas(n), np.full(n, PI))

    def kernel_inputs(self, n: int = 8) -> KernelInputs:
        return KernelInputs(self.spectral(n), self.reference(n), n)

    def phi1(self, x):
        return phi0(self.profile, x, self.lambda1)


def F_degenerate(data: ExampleData, x, t):
    """rho(t) phi1(t) phi1(x) / pi."""
    return data.profile.density(t) * data.phi1(t) * data.phi1(x) / PI


def phi_integral(data: ExampleData, x):
    """int_0^x rho phi1**2 in closed form, any x in [0, pi]."""
    p, lam = data.profile, data.lambda1
    a, al = p.a, p.alpha
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > PI + 1e-12):
        raise DomainError("x must lie in [0, pi]")
    left = np.minimum(x, a)
    val = left / 2.0 + np.sin(2.0 * lam * left) / (4.0 * lam)
    d = np.maximum(x - a, 0.0)
    mp = a + al * d
    mm = a - al * d
    right = ((al + 1.0) ** 2 / 8.0 * (d + (np.sin(2.0 * lam * mp) - math.sin(2.0 * lam * a)) / (2.0 * lam * al))
             + (al - 1.0) ** 2 / 8.0 * (d + (math.sin(2.0 * lam * a) - np.sin(2.0 * lam * mm)) / (2.0 * lam * al))
             + (al * al - 1.0) / 4.0 * (d * math.cos(2.0 * lam * a) + np.sin(2.0 * lam * al * d) / (2.0 * lam * al)))
    out = val + right
    return float(out) if out.ndim == 0 else out


def phi_integral_printed(data: ExampleData, x: float) -> float:
    """A three-term shorthand for the same integral, defined for x > a.

    Kept to measure its defect against ``phi_integral``: it agrees with the
    true integral only when alpha = 1, and otherwise is not even continuous
    at the interface.
    """
    p, lam = data.profile, data.lambda1
    a, al = p.a, p.alpha
    if not a < x <= PI:
        raise DomainError("the three-term form is stated for a < x <= pi")
    return (a / 2.0 + math.sin(2.0 * lam * a) / (4.0 * lam)
            + (al + 1.0) ** 2 / 8.0 * (x - a + (math.sin(2.0 * lam * (al * x - a * al + a)) / al
                                                - math.sin(2.0 * lam * a)) / (2.0 * lam))
            + (al - 1.0) ** 2 / 2.0 * (x - a - (math.sin(2.0 * lam * (-al * x + a * al + a)) / al
                                                - math.sin(2.0 * lam * (2.0 * a - x))) / (2.0 * lam)))


def phi_integral_quadrature(data: ExampleData, x: float) -> float:
    p = data.profile
    f = lambda s: p.density(s) * data.phi1(s) ** 2
    if x <= p.a:
        return quad(f, 0.0, x, epsabs=QUAD_EPS, epsrel=QUAD_EPS)[0]
    return (quad(f, 0.0, p.a, epsabs=QUAD_EPS, epsrel=QUAD_EPS)[0]
            + quad(f, p.a, x, epsabs=QUAD_EPS, epsrel=QUAD_EPS)[0])


def L_eval(data: ExampleData, x):
    """phi1(x) / (1 + Phi(x) / pi)."""
    denom = 1.0 + np.asarray(phi_integral(data, x)) / PI
    if np.any(denom <= 0.0):
        raise ArithmeticError("non-positive denominator in the closed-form solution")
    out = data.phi1(x) / denom
    return float(out) if np.ndim(out) == 0 else out


def A_tilde_eval(data: ExampleData, x, t):
    """-rho(t) phi1(t) Lam(x) / pi, the closed-form solution for 0 <= t <= x."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr > np.asarray(x) + 1e-12) or np.any(t_arr < 0.0):
        raise DomainError("need 0 <= t <= x")
    return -data.profile.density(t) * data.phi1(t) * L_eval(data, x) / PI


def lx_image(data: ExampleData, x, t):
    """(L_x A)(t) = A_t(x, t) / rho(t): the unweighted form the solver works with."""
    return -data.phi1(t) * L_eval(data, x) / PI


def map_A_tilde_to_A(profile: MediumProfile, x: float, a_tilde, m: int = DEFAULT_T_GRID) -> KernelSlice:
    """Undo A_t(x, t) = rho(t) (L_x A)(t) on the aligned slice grid for t-grid ``m``.

    ``a_tilde`` holds A_t at the collocation points of that grid and the
    result lives on its s-nodes.  Segment III gives
    A(mu+(t)) = (1 + alpha)/(2 alpha^2) A_t, segment II then subtracts the
    reflected value, and segment I is A_t itself.
    """
    grid = slice_grid(profile, x, m)
    a_tilde = np.asarray(a_tilde, dtype=float)
    if a_tilde.shape != grid.t_nodes.shape:
        raise ValueError(f"expected {grid.size} values for this grid, got {a_tilde.shape}")
    rho = np.where(grid.t_nodes <= profile.a, 1.0, profile.alpha ** 2)
    values = grid.apply_L_inverse(a_tilde / rho)
    return KernelSlice(grid.x, grid.s_nodes.copy(), values, grid)


def oracle_slice(data: ExampleData, x: float, m: int) -> KernelSlice:
    """Closed-form A(x, .) on the aligned grid the solver uses for t-grid ``m``."""
    grid = slice_grid(data.profile, x, m)
    values = grid.apply_L_inverse(lx_image(data, x, grid.t_nodes))
    return KernelSlice(grid.x, grid.s_nodes.copy(), values, grid)


def residual_main_equation(data: ExampleData, x: float, t: float) -> float:
    """|A_t(x, t) + F(x, t) + int_0^x A_t(x, xi) F(xi, t) dxi| by adaptive quadrature."""
    if not 0.0 < t < x <= PI:
        raise DomainError("need 0 < t < x <= pi")
    p = data.profile
    g = lambda xi: A_tilde_eval(data, x, xi) * F_degenerate(data, xi, t)
    pts = [0.0] + ([p.a] if x > p.a else []) + [x]
    integral = sum(quad(g, lo, hi, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=200)[0]
                   for lo, hi in zip(pts[:-1], pts[1:]))
    return abs(A_tilde_eval(data, x, t) + F_degenerate(data, x, t) + integral)


def scalar_consistency(data: ExampleData, x: float) -> float:
    """|Lam(x) - phi1(x) - int_0^x A_t(x, xi) phi1(xi) dxi|."""
    p = data.profile
    g = lambda xi: A_tilde_eval(data, x, xi) * data.phi1(xi)
    pts = [0.0] + ([p.a] if x > p.a else []) + [x]
    integral = sum(quad(g, lo, hi, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=200)[0]
                   for lo, hi in zip(pts[:-1], pts[1:]))
    return abs(L_eval(data, x) - data.phi1(x) - integral)
