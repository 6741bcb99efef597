from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epslab.errors import InvalidInputError
from epslab.numerics import (
    ComplexField,
    PhaseSpaceGrid,
    RealField,
    apply_stencil,
    derivative_array,
    edge_decayed,
    fd_weights,
    gaussian_convolve,
    gaussian_weights,
    integrate_1d,
    integrate_2d,
    momentum_transform,
    partial_derivative,
    position_transform,
)


def gaussian_field(grid, s_q=1.0, s_p=1.0, q0=0.0, p0=0.0):
    P, Q = grid.mesh()
    vals = np.exp(-((Q - q0) ** 2) / (2 * s_q**2) - (P - p0) ** 2 / (2 * s_p**2)) / (2 * np.pi * s_q * s_p)
    return RealField(grid, vals, "gaussian")


# ---------------------------------------------------------------- grid


def test_grid_is_half_open_and_contains_origin():
    g = PhaseSpaceGrid()
    assert g.dq == g.dp == 1 / 16
    assert g.q[0] == -8.0 and g.q[-1] == 8.0 - g.dq
    assert 0.0 in g.q and 0.0 in g.p
    assert g.shape == (256, 256)


def test_grid_round_trips_through_dict():
    g = PhaseSpaceGrid(-3, 5, 40, -2, 2, 24)
    assert PhaseSpaceGrid.from_dict(g.to_dict()) == g


@pytest.mark.parametrize("kw", [{"n_q": 4}, {"q_min": 1.0, "q_max": 1.0}, {"p_max": float("nan")}])
def test_grid_rejects_bad_input(kw):
    with pytest.raises(InvalidInputError):
        PhaseSpaceGrid(**kw)


def test_field_values_are_read_only():
    g = PhaseSpaceGrid(n_q=8, n_p=8)
    f = RealField(g, np.zeros(g.shape))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


# ---------------------------------------------------------- quadrature


def test_integrate_constant_on_unit_square():
    g = PhaseSpaceGrid(0, 1, 16, 0, 1, 16)
    assert integrate_2d(RealField(g, np.ones(g.shape))) == pytest.approx(1.0, abs=1e-15)


def test_integrate_zero_field():
    g = PhaseSpaceGrid(n_q=32, n_p=32)
    assert integrate_2d(RealField(g, np.zeros(g.shape))) == 0.0


def test_integrate_normalized_gaussian():
    # (1/pi) exp(-q^2 - p^2) has unit mass
    g = PhaseSpaceGrid()
    P, Q = g.mesh()
    f = RealField(g, np.exp(-(Q**2) - P**2) / np.pi)
    assert integrate_2d(f) == pytest.approx(1.0, abs=1e-8)


def test_integrate_empty_rejected():
    with pytest.raises(InvalidInputError):
        integrate_1d([], 1.0)


@settings(max_examples=40, deadline=None)
@given(
    a=st.floats(-1e3, 1e3),
    b=st.floats(-1e3, 1e3),
    seed=st.integers(0, 2**32 - 1),
)
def test_quadrature_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g = PhaseSpaceGrid(n_q=16, n_p=12)
    u, v = rng.normal(size=g.shape), rng.normal(size=g.shape)
    lhs = integrate_2d(RealField(g, a * u + b * v))
    rhs = a * integrate_2d(RealField(g, u)) + b * integrate_2d(RealField(g, v))
    scale = (abs(a) + abs(b) + 1) * np.sum(np.abs(u) + np.abs(v)) * g.dq * g.dp
    assert abs(lhs - rhs) <= 1e-13 * scale


# ------------------------------------------------------- differentiation


def test_fd_weights_exact():
    assert fd_weights((-2, -1, 0, 1, 2), 1) == tuple(
        Fraction(x) for x in ("1/12", "-2/3", "0", "2/3", "-1/12")
    )
    assert fd_weights((-2, -1, 0, 1, 2), 2) == tuple(
        Fraction(x) for x in ("-1/12", "4/3", "-5/2", "4/3", "-1/12")
    )


def test_quadratic_first_derivative_is_exact():
    g = PhaseSpaceGrid(-4, 4, 64, -4, 4, 16)
    P, Q = g.mesh()
    d = partial_derivative(RealField(g, Q**2), "q", 1)
    assert d.at(2.0, 0.0) == pytest.approx(4.0, abs=1e-12)
    # one-sided edge stencils are exact on quadratics as well
    assert np.allclose(d.values, 2 * Q, atol=1e-11)


def test_sine_second_derivative_at_origin():
    x = np.linspace(-np.pi, np.pi, 512, endpoint=False)
    h = x[1] - x[0]
    d2 = derivative_array(np.sin(x), 0, 2, h)
    assert abs(d2[256]) < 1e-9


@pytest.mark.parametrize("method", ["fd", "spectral"])
@pytest.mark.parametrize("axis,order", [("q", 1), ("q", 2), ("p", 1), ("p", 2)])
def test_constants_are_annihilated(method, axis, order):
    g = PhaseSpaceGrid(n_q=32, n_p=32)
    f = RealField(g, np.full(g.shape, 3.5))
    assert np.max(np.abs(partial_derivative(f, axis, order, method).values)) < 1e-12


def test_derivative_order_validated():
    g = PhaseSpaceGrid(n_q=16, n_p=16)
    with pytest.raises(InvalidInputError):
        partial_derivative(RealField(g, np.zeros(g.shape)), "q", 3)


def test_spectral_gaussian_derivative():
    g = PhaseSpaceGrid()
    P, Q = g.mesh()
    f = RealField(g, np.exp(-(Q**2) / 2))
    d = partial_derivative(f, "q", 2, "spectral").values
    assert np.max(np.abs(d - (Q**2 - 1) * np.exp(-(Q**2) / 2))) < 1e-10


def test_fd_fourth_order_convergence():
    errs = []
    for n in (64, 128):
        g = PhaseSpaceGrid(-6, 6, n, -6, 6, 8)
        P, Q = g.mesh()
        f = RealField(g, np.exp(-(Q**2) / 2))
        d = partial_derivative(f, "q", 2).values
        errs.append(np.max(np.abs(d - (Q**2 - 1) * np.exp(-(Q**2) / 2))))
    assert errs[0] / errs[1] > 14


def test_apply_stencil_mixed_term():
    # q * d/dp applied to p^2 gives 2 q p
    g = PhaseSpaceGrid(-2, 2, 32, -2, 2, 32)
    P, Q = g.mesh()
    out = apply_stencil([(1.0, 1, 0, 0, 1)], ComplexField(g, P**2 + 0j))
    assert np.allclose(out.values, 2 * Q * P, atol=1e-10)


# ----------------------------------------------------------- convolution


def direct_convolution(vals, grid, s_q, s_p):
    """O(N^4) brute-force sum with the same sampled unit-mass kernel."""
    out = np.zeros_like(vals)
    n_p, n_q = vals.shape
    kq = np.exp(-((grid.q[:, None] - grid.q[None, :]) ** 2) / (2 * s_q**2))
    kp = np.exp(-((grid.p[:, None] - grid.p[None, :]) ** 2) / (2 * s_p**2))
    kq *= grid.dq / (np.sqrt(2 * np.pi) * s_q)
    kp *= grid.dp / (np.sqrt(2 * np.pi) * s_p)
    for i in range(n_p):
        for j in range(n_q):
            out[i, j] = np.sum(kp[i][:, None] * kq[j][None, :] * vals)
    return out


def test_fft_convolution_matches_direct_sum():
    rng = np.random.default_rng(7)
    g = PhaseSpaceGrid(-4, 4, 32, -4, 4, 32)
    vals = rng.random(g.shape)
    fft = gaussian_convolve(RealField(g, vals), 0.4, 0.7).values
    ref = direct_convolution(vals, g, 0.4, 0.7)
    assert np.max(np.abs(fft - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_gaussian_weights_are_unit_sum_and_symmetric():
    w = gaussian_weights(64, 0.1, 0.5)
    assert w.size == 127
    assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
    assert np.array_equal(w, w[::-1])
    # a well-resolved kernel matches the continuous density
    assert w[63] == pytest.approx(0.1 / (np.sqrt(2 * np.pi) * 0.5), rel=1e-12)


def test_constant_field_is_preserved_in_the_interior():
    g = PhaseSpaceGrid(-4, 4, 64, -4, 4, 64)
    out = gaussian_convolve(RealField(g, np.full(g.shape, 2.0)), 0.2, 0.2)
    # zero padding: only points farther than ~8 sigma from the boundary see the full kernel
    inner = out.values[26:-26, 26:-26]
    assert np.allclose(inner, 2.0, atol=1e-12)
    assert any("edge" in w for w in out.warnings)


def test_spike_spreads_to_kernel():
    g = PhaseSpaceGrid(-4, 4, 64, -4, 4, 64)
    vals = np.zeros(g.shape)
    vals[32, 32] = 1 / (g.dq * g.dp)
    out = gaussian_convolve(RealField(g, vals), 0.5, 0.3)
    assert integrate_2d(out) == pytest.approx(1.0, abs=1e-8)
    P, Q = g.mesh()
    expect = np.exp(-(Q**2) / (2 * 0.25) - P**2 / (2 * 0.09)) / (2 * np.pi * 0.5 * 0.3)
    assert np.max(np.abs(out.values - expect)) < 1e-8


def test_gaussian_closure():
    g = PhaseSpaceGrid()
    f = gaussian_field(g, 0.6, 0.8)
    out = gaussian_convolve(f, 0.5, 0.3)
    expect = gaussian_field(g, np.hypot(0.6, 0.5), np.hypot(0.8, 0.3))
    assert np.max(np.abs(out.values - expect.values)) < 1e-8
    assert integrate_2d(out) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s_q=st.floats(0.05, 1.0), s_p=st.floats(0.05, 1.0))
def test_convolution_preserves_nonnegativity(seed, s_q, s_p):
    rng = np.random.default_rng(seed)
    g = PhaseSpaceGrid(-4, 4, 32, -4, 4, 32)
    out = gaussian_convolve(RealField(g, rng.random(g.shape) ** 4), s_q, s_p).values
    assert out.min() >= -1e-12 * out.max()


def test_kernel_width_validated():
    g = PhaseSpaceGrid(n_q=16, n_p=16)
    with pytest.raises(InvalidInputError):
        gaussian_convolve(RealField(g, np.zeros(g.shape)), 0.0, 1.0)


def test_edge_decay_detection():
    g = PhaseSpaceGrid()
    assert edge_decayed(gaussian_field(g).values)
    assert not edge_decayed(np.ones((16, 16)))


# ---------------------------------------------------------------- Fourier


def test_fourier_round_trip_of_displaced_gaussian():
    q = np.linspace(-10, 10, 400, endpoint=False)
    psi = np.pi**-0.25 * np.exp(-((q - 1.0) ** 2) / 2 + 0.5j * q)
    phi = momentum_transform(psi, q, q, 1.0)
    expect = np.pi**-0.25 * np.exp(-((q - 0.5) ** 2) / 2 - 1j * (q - 0.5) * 1.0)
    assert np.max(np.abs(phi - expect)) < 1e-10
    back = position_transform(phi, q, q, 1.0)
    assert np.max(np.abs(back - psi)) < 1e-10


def test_bit_identical_under_thread_count(monkeypatch):
    g = PhaseSpaceGrid(n_q=64, n_p=64)
    f = gaussian_field(g, 0.7, 0.9)
    monkeypatch.setenv("EPS_THREADS", "1")
    one = gaussian_convolve(f, 0.3, 0.4).values.copy()
    monkeypatch.setenv("EPS_THREADS", "4")
    four = gaussian_convolve(f, 0.3, 0.4).values
    assert np.array_equal(one, four)
