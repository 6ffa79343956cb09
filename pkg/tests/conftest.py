import functools

import numpy as np
import pytest

from slinverse.forward import forward_spectrum
from slinverse.geometry import MediumProfile
from slinverse.unperturbed import UnperturbedData

CLASSICAL = MediumProfile(2.0, 1.0)
LAYERED = MediumProfile(2.0, 0.5)

POTENTIALS = {
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    "cos": np.cos,
}


@functools.lru_cache(maxsize=None)
def spectrum(a, alpha, qname, n):
    return forward_spectrum(MediumProfile(a, alpha), POTENTIALS[qname], n)


@functools.lru_cache(maxsize=None)
def reference(a, alpha, n):
    return UnperturbedData.compute(MediumProfile(a, alpha), n)


@pytest.fixture(params=[CLASSICAL, LAYERED], ids=["classical", "layered"])
def profile(request):
    return request.param
