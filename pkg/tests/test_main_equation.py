import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slinverse.degenerate import ExampleData, lx_image
from slinverse.errors import SingularSystemError
from slinverse.forward import SpectralData, forward_spectrum
from slinverse.geometry import PI, MediumProfile
from slinverse.kernels import KernelInputs
from slinverse.main_equation import (InversionConfig, SliceSystem, TraceData, build_slice,
                                     diagonal_trace, invert, lx_apply, lx_inverse, reconstruct,
                                     recover_potential, relative_l2_error, slice_grid,
                                     smallest_singular_value, solve_slice)

from conftest import CLASSICAL, LAYERED, reference, spectrum


def smooth_function(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=6)
    return lambda s: sum(ck * np.cos(0.7 * k * np.asarray(s) + k) for k, ck in enumerate(c))


def test_lx_apply_examples():
    f = lambda s: s * s + 1.0
    assert lx_apply(LAYERED, 3.0, f, 1.0) == pytest.approx(f(1.0))          # 3 > mu+(3) = 2.5
    assert lx_apply(LAYERED, PI, f, 1.5) == pytest.approx(f(1.5) + f(2.5) / 3.0)
    assert lx_apply(LAYERED, 3.0, f, 2.5) == pytest.approx(4.0 / 3.0 * f(2.25))
    assert lx_apply(LAYERED, 1.5, f, 1.0) == pytest.approx(f(1.0))
    assert lx_apply(CLASSICAL, 3.0, f, 2.5) == pytest.approx(f(2.5))


def test_lx_inverse_examples():
    phi = lambda t: np.exp(t)
    assert lx_inverse(LAYERED, PI, phi, 3.0) == 0.0                          # reads phi(4) = 0
    assert lx_inverse(LAYERED, 3.0, phi, 2.25) == pytest.approx(0.75 * phi(2.5))
    assert lx_inverse(CLASSICAL, 3.0, phi, 1.2) == pytest.approx(phi(1.2))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1.0, 2.5, 2.8, PI]), st.floats(0.0, 1.0))
def test_pointwise_inverse_round_trip(seed, x, frac):
    f = smooth_function(seed)
    top = LAYERED.mu_plus(x)
    s = frac * top
    if abs(s - LAYERED.mu_minus(x)) < 1e-9 and x > LAYERED.a:
        return
    # phi = L_x f, then L_x^{-1} phi from the explicit formula must give f back.
    phi = lambda t: lx_apply(LAYERED, x, f, t)
    assert lx_inverse(LAYERED, x, phi, s) == pytest.approx(float(f(s)), abs=1e-12)


@pytest.mark.parametrize("x", [1.0, 2.0, 2.5, PI])
def test_grid_operator_matches_pointwise_formulas(x):
    g = slice_grid(LAYERED, x, 64)
    f = smooth_function(3)
    direct = np.array([lx_apply(LAYERED, x, f, t) for t in g.t_nodes])
    applied = g.apply_L(f(g.s_nodes))
    # Pointwise f is continuous, so duplicate mu- rows agree with the continuous formula
    # except the left-limit row, which omits the reflected term by construction.
    keep = np.ones(g.size, bool)
    if x > LAYERED.a:
        keep[g.segments[0][2] - 1] = False
    assert np.allclose(applied[keep], direct[keep], atol=1e-13)
    phi = np.exp(np.sin(g.t_nodes))
    explicit = np.array([lx_inverse(LAYERED, x, lambda t: np.exp(np.sin(t)), s) for s in g.s_nodes])
    inv = g.apply_L_inverse(phi)
    assert np.allclose(inv[keep], explicit[keep], atol=1e-13)


def test_inverse_is_bounded():
    rng = np.random.default_rng(0)
    for x in (1.0, 2.5, PI):
        g = slice_grid(LAYERED, x, 128)
        ratios = []
        for _ in range(50):
            phi = rng.normal(size=g.size)
            ratios.append(np.linalg.norm(g.apply_L_inverse(phi)) / np.linalg.norm(phi))
        # |f| <= (1 + alpha)/2 |phi| + (1 - alpha)/2 |phi| pointwise.
        assert max(ratios) <= 1.0 + 1e-12


def test_grid_aligns_reflections():
    for x in (2.2, 2.5, 3.0, PI):
        g = slice_grid(LAYERED, x, 128)
        rows = np.nonzero(g.reflect >= 0)[0]
        assert np.allclose(2 * LAYERED.a - g.t_nodes[rows], g.s_nodes[g.reflect[rows]], atol=1e-12)
        assert LAYERED.a in g.t_nodes
        assert g.t_nodes[-1] == x
        assert g.s_nodes[-1] == pytest.approx(LAYERED.mu_plus(x), abs=1e-14)
        # rows with t > a never carry a reflected term
        assert np.all(g.reflect[g.t_nodes > LAYERED.a] == -1)


def test_identical_data_gives_zero_slice():
    ref = reference(2.0, 0.5, 16)
    k = KernelInputs(SpectralData(LAYERED, ref.lambda0, ref.alpha0), ref, 16)
    sys_ = build_slice(LAYERED, k, 2.7, 32)
    assert np.all(sys_.rhs == 0.0)
    assert np.all(solve_slice(sys_).a_values == 0.0)


def test_left_slice_is_classical_second_kind():
    k = KernelInputs(spectrum(2.0, 0.5, "cos", 64), reference(2.0, 0.5, 64), 32)
    s = build_slice(LAYERED, k, 1.5, 16)
    w = s.grid.weights
    block = s.matrix - np.eye(s.grid.size)
    expected = (k.F0_matrix(s.grid.s_nodes, s.grid.t_nodes) * w[:, None]).T
    assert np.allclose(block, expected, atol=1e-15)


def test_degenerate_slice_matches_closed_form():
    data = ExampleData(LAYERED)
    sl = solve_slice(build_slice(LAYERED, data.kernel_inputs(8), 2.5, 128))
    # Independent route: closed-form L_x A on t, pushed through the explicit inverse formula.
    want = np.array([lx_inverse(LAYERED, 2.5, lambda t: lx_image(data, 2.5, t), s) for s in sl.s_nodes])
    g = sl.grid
    keep = np.ones(g.size, bool)
    keep[g.segments[0][2] - 1] = False      # left-limit duplicate of the jump node
    assert np.max(np.abs(sl.a_values[keep] - want[keep])) < 1e-5


def test_singular_system_is_reported():
    g = slice_grid(LAYERED, 1.0, 8)
    m = np.zeros((g.size, g.size))
    with pytest.raises(SingularSystemError) as info:
        solve_slice(SliceSystem(g, m, np.ones(g.size)))
    assert info.value.x == 1.0


def test_smallest_singular_value_bounded_away(profile):
    k = KernelInputs(spectrum(profile.a, profile.alpha, "cos", 64),
                     reference(profile.a, profile.alpha, 64), 64)
    vals = [smallest_singular_value(build_slice(profile, k, x, 64)) for x in np.linspace(0.1, PI, 12)]
    assert min(vals) > 0.1


def test_recover_potential_factors():
    x_l = np.linspace(0, 2.0, 11)
    x_r = np.linspace(2.0, PI, 8)[1:]
    t = TraceData(LAYERED, x_l, 0.25 * x_l, x_r, 0.3 * x_r)
    q = recover_potential(t)
    assert np.allclose(q.q[:11], 0.5)
    assert np.allclose(q.q[11:], 4 * 0.25 / 1.5 * 0.3)
    zero = recover_potential(TraceData(LAYERED, x_l, 0 * x_l, x_r, 0 * x_r), guard=0.2)
    assert np.all(zero.q == 0.0)


def test_guard_band_extrapolates():
    x_l = np.linspace(0, 2.0, 41)
    x_r = np.linspace(2.0, PI, 24)[1:]
    left = np.sin(x_l) / 2
    left[-2:] += 0.3                                   # corrupted nodes next to a
    t = TraceData(LAYERED, x_l, left, x_r, np.zeros_like(x_r))
    q = recover_potential(t, guard=0.06).q[:41]
    assert np.max(np.abs(q - np.cos(x_l))) < 1e-2                 # quadratic fit, two nodes past its window


def test_diagonal_trace_of_zero_slices():
    ref = reference(2.0, 0.5, 8)
    k = KernelInputs(SpectralData(LAYERED, ref.lambda0, ref.alpha0), ref, 8)
    slices = [solve_slice(build_slice(LAYERED, k, x, 16)) for x in (0.0, 1.0, 2.0, 3.0)]
    tr = diagonal_trace(slices, LAYERED)
    assert tr.x_left.tolist() == [0.0, 1.0, 2.0] and tr.x_right.tolist() == [3.0]
    assert np.all(tr.left == 0) and np.all(tr.right == 0)


def test_classical_constant_potential_trace():
    c = 0.5
    sd = forward_spectrum(CLASSICAL, c, 64)
    res = reconstruct(sd, InversionConfig(n_trunc=64))
    x, tr = res.trace.as_rows()
    # The truncated kernel has a discontinuity line through (pi, pi); the trace
    # ripples within a few wavelengths of it.
    clear = x < PI - 0.3
    assert np.max(np.abs(tr[clear] - c * x[clear] / 2)) < 2e-3
    assert np.max(np.abs(res.potential.q[(x > 0.05) & clear] - c)) < 5e-2
    rel, _ = relative_l2_error(res.potential, lambda s: c + 0 * s)
    assert rel < 0.1


def test_round_trip_classical():
    q = invert(spectrum(2.0, 1.0, "cos", 64))
    assert relative_l2_error(q, np.cos)[0] < 0.01


def test_invert_is_deterministic():
    sd = spectrum(2.0, 0.5, "cos", 64)
    cfg = InversionConfig(n_trunc=32, x_grid=31, t_grid=64)
    a, b = invert(sd, cfg), invert(sd, cfg)
    assert a.x.tobytes() == b.x.tobytes() and a.q.tobytes() == b.q.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        InversionConfig(t_grid=4)
    with pytest.raises(ValueError):
        InversionConfig(x_grid=3)
    with pytest.raises(ValueError):
        reconstruct(spectrum(2.0, 0.5, "cos", 64), InversionConfig(n_trunc=100))
