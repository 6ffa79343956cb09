"""Kernels of the main equation built from two spectral data sets.

F0(xi, t) = sum_n [phi0(t, lam_n) cos(lam_n xi) / alpha_n - phi0(t, lam0_n) cos(lam0_n xi) / alpha0_n]

and F(x, t) mixes F0 at mu+(x) and mu-(x) with the same weights that build
phi0 from cosines, so termwise F is the symmetric series in phi0(x) phi0(t).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import SpectralData
from .geometry import PI, MediumProfile, _check_range
from .unperturbed import UnperturbedData, phi0

DEFAULT_TRUNCATION = 64

# Weights applied to term n of an n_trunc-term series (n = 1..N).
TAPERS = {
    "none": lambda n, N: np.ones(len(n)),
    "fejer": lambda n, N: 1.0 - n / (N + 1.0),
    "lanczos": lambda n, N: np.sinc(n / (N + 1.0)),
    "hann": lambda n, N: 0.5 * (1.0 + np.cos(np.pi * n / (N + 1.0))),
}


@dataclass(frozen=True)
class KernelInputs:
    perturbed: SpectralData
    unperturbed: UnperturbedData
    n_trunc: int = DEFAULT_TRUNCATION
    taper: str = "none"

    def __post_init__(self):
        if self.taper not in TAPERS:
            raise ValueError(f"taper must be one of {sorted(TAPERS)}")
        if self.perturbed.profile != self.unperturbed.profile:
            raise ValueError("perturbed and unperturbed data use different profiles")
        if self.n_trunc < 1:
            raise ValueError("n_trunc must be >= 1")
        if len(self.perturbed) < self.n_trunc or len(self.unperturbed) < self.n_trunc:
            raise ValueError(
                f"need {self.n_trunc} terms, have {len(self.perturbed)} perturbed "
                f"and {len(self.unperturbed)} unperturbed")

    @property
    def profile(self) -> MediumProfile:
        return self.perturbed.profile

    def truncated(self, n: int) -> "KernelInputs":
        return KernelInputs(self.perturbed, self.unperturbed, n, self.taper)

    def _terms(self):
        # Perturbed and reference terms interleaved, highest n first, so a
        # straight left-to-right sum adds the small tail before the head.
        n = self.n_trunc
        lam = np.empty(2 * n)
        inv = np.empty(2 * n)
        lam[0::2] = self.perturbed.lambdas[:n][::-1]
        lam[1::2] = self.unperturbed.lambda0[:n][::-1]
        inv[0::2] = 1.0 / self.perturbed.alphas[:n][::-1]
        inv[1::2] = -1.0 / self.unperturbed.alpha0[:n][::-1]
        w = TAPERS[self.taper](np.arange(n, 0, -1), n)
        inv[0::2] *= w
        inv[1::2] *= w
        return lam, inv

    def cosine_table(self, xi):
        """Rows cos(lam xi_i) * (+-1/alpha), columns in summation order."""
        lam, inv = self._terms()
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.cos(xi[:, None] * lam[None, :]) * inv[None, :]

    def phi0_table(self, t):
        lam, _ = self._terms()
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return phi0(self.profile, t[:, None], lam[None, :])

    def F0_matrix(self, xi, t):
        """F0(xi_i, t_j) as an array of shape (len(xi), len(t))."""
        return self.cosine_table(xi) @ self.phi0_table(t).T


def _pairwise(x, t):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    xb, tb = np.broadcast_arrays(x, t)
    return xb, tb, (np.ndim(x) == 0 and np.ndim(t) == 0)


def F0_eval(inputs: KernelInputs, x, t):
    """F0(x, t) for x in [0, mu+(pi)], t in [0, pi]; broadcasts."""
    _check_range(x, 0.0, inputs.profile.mu_plus_pi)
    _check_range(t, 0.0, PI, name="t")
    xb, tb, scalar = _pairwise(x, t)
    lam, inv = inputs._terms()
    terms = np.cos(xb[..., None] * lam) * inv * phi0(inputs.profile, tb[..., None], lam)
    out = np.zeros(xb.shape)
    for k in range(len(lam)):
        out = out + terms[..., k]
    return float(out) if scalar else out


def F_eval(inputs: KernelInputs, x, t):
    """F(x, t) from F0 at the two characteristic points of x."""
    p = inputs.profile
    _check_range(x, 0.0, PI)
    xb, tb, scalar = _pairwise(x, t)
    r = p.sqrt_density(xb)
    mp = xb * r + p.a * (1.0 - r)
    mm = -xb * r + p.a * (1.0 + r)
    out = 0.5 * (1.0 + 1.0 / r) * F0_eval(inputs, mp, tb)
    right = r != 1.0
    if np.any(right):
        mm_safe = np.where(right, mm, 0.0)
        out = out + np.where(right, 0.5 * (1.0 - 1.0 / r) * F0_eval(inputs, mm_safe, tb), 0.0)
    return float(out) if scalar else out


def F_symmetric(inputs: KernelInputs, x, t):
    """The same kernel summed directly as sum_n phi0(x) phi0(t) / alpha_n - (reference)."""
    _check_range(x, 0.0, PI)
    _check_range(t, 0.0, PI, name="t")
    xb, tb, scalar = _pairwise(x, t)
    lam, inv = inputs._terms()
    p = inputs.profile
    terms = phi0(p, xb[..., None], lam) * phi0(p, tb[..., None], lam) * inv
    out = np.zeros(xb.shape)
    for k in range(len(lam)):
        out = out + terms[..., k]
    return float(out) if scalar else out


def tail_estimate(inputs: KernelInputs, x, t) -> float:
    """sup over the sample of |F_N - F_2N|.

    When fewer than 2N terms are available the estimate falls back to
    |F_{N/2} - F_N|, which bounds the same tail one level coarser.
    """
    n = inputs.n_trunc
    have = min(len(inputs.perturbed), len(inputs.unperturbed))
    if have >= 2 * n:
        fine, coarse = inputs.truncated(2 * n), inputs
    else:
        fine, coarse = inputs, inputs.truncated(max(1, n // 2))
    return float(np.max(np.abs(F_eval(fine, x, t) - F_eval(coarse, x, t))))
