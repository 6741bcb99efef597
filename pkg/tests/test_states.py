import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import special

from epslab.errors import DomainCoverageError, InvalidInputError, UnsupportedOrderError
from epslab.numerics import ComplexField, PhaseSpaceGrid, integrate_1d, momentum_transform, partial_derivative
from epslab.states import (
    EPSState,
    OscillatorParams,
    WavefunctionSpec,
    build_eps_state,
    coherent_state,
    eigenstate_p,
    eigenstate_q,
    polar_decompose,
)

UNIT = OscillatorParams()


def hermite_oracle(n, x):
    """Normalized Hermite function from scipy's physicists' polynomials."""
    norm = 1 / np.sqrt(2.0**n * special.factorial(n) * np.sqrt(np.pi))
    return norm * special.eval_hermite(n, x) * np.exp(-(x**2) / 2)


def test_params_invariants():
    prm = OscillatorParams(m=2.0, omega=3.0, hbar=0.5)
    assert prm.k == 18.0
    assert prm.f == pytest.approx(0.5 / 6.0)
    assert prm.with_f(2.0).f == 2.0
    with pytest.raises(InvalidInputError):
        OscillatorParams(m=-1.0)
    with pytest.raises(InvalidInputError):
        OscillatorParams(hbar=0.0)


def test_ground_state_at_origin():
    assert eigenstate_q(0, UNIT, 0.0) == pytest.approx(np.pi**-0.25, abs=1e-15)
    assert eigenstate_q(0, UNIT, 0.0) == pytest.approx(0.7511255444649425)


def test_odd_state_vanishes_at_origin():
    assert eigenstate_q(1, OscillatorParams(m=2.5, omega=0.7, hbar=1.3), 0.0) == 0.0


@pytest.mark.parametrize("n", [0, 1, 2, 5, 12])
def test_recurrence_matches_hermite_polynomials(n):
    x = np.linspace(-6, 6, 97)
    assert np.max(np.abs(eigenstate_q(n, UNIT, x) - hermite_oracle(n, x))) < 1e-12


def test_ground_state_normalized():
    q = np.linspace(-8, 8, 512, endpoint=False)
    dens = np.abs(eigenstate_q(0, UNIT, q)) ** 2
    assert integrate_1d(dens, q[1] - q[0]) == pytest.approx(1.0, abs=1e-10)


def test_high_index_guard():
    with pytest.raises(UnsupportedOrderError):
        eigenstate_q(61, UNIT, 0.0)


def test_ground_state_self_dual():
    p = np.linspace(-5, 5, 41)
    assert np.allclose(eigenstate_p(0, UNIT, p), np.pi**-0.25 * np.exp(-(p**2) / 2), atol=1e-15)


def test_first_excited_momentum_modulus():
    x = np.linspace(-5, 5, 41)
    assert np.allclose(np.abs(eigenstate_p(1, UNIT, x)), np.abs(eigenstate_q(1, UNIT, x)), atol=1e-14)


@pytest.mark.parametrize("n", range(6))
@pytest.mark.parametrize("prm", [UNIT, OscillatorParams(m=1.7, omega=0.6, hbar=0.8)])
def test_fourier_pair_consistency(n, prm):
    q = np.linspace(-14, 14, 700, endpoint=False)
    p = np.linspace(-6, 6, 61)
    phi = momentum_transform(eigenstate_q(n, prm, q), q, p, prm.hbar)
    assert np.max(np.abs(phi - eigenstate_p(n, prm, p))) < 1e-8


@pytest.mark.parametrize("n", range(6))
def test_momentum_states_normalized(n):
    p = np.linspace(-10, 10, 800, endpoint=False)
    dens = np.abs(eigenstate_p(n, UNIT, p)) ** 2
    assert integrate_1d(dens, p[1] - p[0]) == pytest.approx(1.0, abs=1e-8)


def test_undisplaced_coherent_is_ground_state():
    q = np.linspace(-8, 8, 256, endpoint=False)
    assert np.allclose(coherent_state(0, 0, UNIT, q), eigenstate_q(0, UNIT, q), atol=1e-15)
    assert np.allclose(coherent_state(0, 0, UNIT, q, "p"), eigenstate_p(0, UNIT, q), atol=1e-15)


def test_coherent_peak_and_norm():
    q = np.linspace(-8, 8, 256, endpoint=False)
    psi = coherent_state(1.0, 0.0, UNIT, q)
    assert abs(q[np.argmax(np.abs(psi))] - 1.0) <= q[1] - q[0]
    assert integrate_1d(np.abs(psi) ** 2, q[1] - q[0]) == pytest.approx(1.0, abs=1e-8)


def test_coherent_pair_is_fourier_consistent():
    q = np.linspace(-12, 12, 600, endpoint=False)
    p = np.linspace(-4, 5, 37)
    phi = momentum_transform(coherent_state(1.2, 0.7, UNIT, q), q, p, 1.0)
    assert np.max(np.abs(phi - coherent_state(1.2, 0.7, UNIT, p, "p"))) < 1e-8


def test_coherent_too_close_to_edge():
    q = np.linspace(-8, 8, 256, endpoint=False)
    with pytest.raises(DomainCoverageError):
        coherent_state(6.0, 0.0, UNIT, q)


def test_exact_evolution_follows_classical_orbit():
    spec = WavefunctionSpec.coherent(1.0, 0.5)
    q = np.linspace(-8, 8, 512, endpoint=False)
    t = 0.9
    dens = np.abs(spec.psi(q, t)) ** 2
    mean = integrate_1d(q * dens, q[1] - q[0])
    assert mean == pytest.approx(np.cos(t) + 0.5 * np.sin(t), abs=1e-12)


def test_coherent_eigen_expansion_mass():
    c = WavefunctionSpec.coherent(1.5, -0.5).eigen_coefficients()
    assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0, abs=1e-12)


# ------------------------------------------------------------ EPS state


def test_chi_ground_state_at_origin():
    st = build_eps_state(WavefunctionSpec.eigenstate(0), PhaseSpaceGrid())
    assert st.chi.at(0.0, 0.0) == pytest.approx(np.pi**-0.5, abs=1e-15)
    assert abs(st.chi.at(0.0, 0.0)) == pytest.approx(0.5641895835477563)


@pytest.mark.parametrize("n", [0, 1, 3])
def test_eigenstate_chi_time_independent(n):
    g = PhaseSpaceGrid(n_q=64, n_p=64)
    spec = WavefunctionSpec.eigenstate(n)
    a = build_eps_state(spec, g, 0.0).chi.values
    b = build_eps_state(spec, g, 2.345).chi.values
    assert np.max(np.abs(a - b)) < 1e-15


def test_ground_state_chi_phase():
    g = PhaseSpaceGrid()
    st = build_eps_state(WavefunctionSpec.eigenstate(0), g)
    pol = polar_decompose(st)
    P, Q = g.mesh()
    m = pol.support_mask
    diff = np.angle(st.chi.values * np.exp(1j * P * Q))
    assert np.max(np.abs(diff[m])) < 1e-12


def test_chi_factorization():
    g = PhaseSpaceGrid(n_q=64, n_p=64)
    spec = WavefunctionSpec.coherent(0.5, -0.3)
    st = build_eps_state(spec, g, 0.4)
    P, Q = g.mesh()
    expect = spec.psi(Q, 0.4) * np.conj(spec.phi(P, 0.4)) * np.exp(-1j * P * Q)
    assert np.allclose(st.chi.values, expect, atol=1e-15)


def test_uncovered_support_rejected():
    with pytest.raises(DomainCoverageError):
        build_eps_state(WavefunctionSpec.eigenstate(8), PhaseSpaceGrid(-2, 2, 64, -2, 2, 64))


# ---------------------------------------------------------------- polar


@pytest.fixture(scope="module")
def ground_polar():
    g = PhaseSpaceGrid()
    st = build_eps_state(WavefunctionSpec.eigenstate(0), g)
    return g, polar_decompose(st)


def test_ground_state_phase_gradients(ground_polar):
    g, pol = ground_polar
    P, Q = g.mesh()
    m = pol.support_mask
    assert np.max(np.abs(pol.gradS_q.values - (-P))[m]) < 1e-6
    assert np.max(np.abs(pol.gradS_p.values - (-Q))[m]) < 1e-6


def test_ground_state_amplitude_curvature(ground_polar):
    g, pol = ground_polar
    P, Q = g.mesh()
    m = pol.support_mask
    assert np.max(np.abs(pol.lapR_over_R_q.values - (Q**2 - 1))[m]) < 1e-5
    assert np.max(np.abs(pol.lapR_over_R_p.values - (P**2 - 1))[m]) < 1e-5


def test_amplitude_nonnegative(ground_polar):
    assert np.min(ground_polar[1].R.values) >= 0


def test_mask_respects_edge_exclusion(ground_polar):
    m = ground_polar[1].support_mask
    assert not m[:3].any() and not m[-3:].any() and not m[:, :3].any() and not m[:, -3:].any()


@settings(max_examples=10, deadline=None)
@given(
    q0=hst.floats(-1.5, 1.5),
    p0=hst.floats(-1.5, 1.5),
    t=hst.floats(0.0, 6.3),
)
def test_action_splits_into_single_variable_parts(q0, p0, t):
    # S = S^p(p) + S^q(q) - pq for a product state; the box must hold chi
    # down to well below the 1e-6 mask level for spectral derivatives
    g = PhaseSpaceGrid(-11, 11, 352, -11, 11, 352)
    st = build_eps_state(WavefunctionSpec.coherent(q0, p0), g, t)
    pol = polar_decompose(st)
    P, Q = g.mesh()
    m = pol.support_mask
    a = np.ma.array(pol.gradS_q.values + P, mask=~m)
    b = np.ma.array(pol.gradS_p.values + Q, mask=~m)
    assert (a.max(axis=0) - a.min(axis=0)).max() < 1e-6
    assert (b.max(axis=1) - b.min(axis=1)).max() < 1e-6


def test_log_derivative_identities():
    g = PhaseSpaceGrid()
    st = build_eps_state(WavefunctionSpec.eigenstate(2), g)
    pol = polar_decompose(st)
    m = pol.support_mask
    R = np.abs(st.chi.values)
    # d chi / chi = dR/R + i dS/hbar
    d = partial_derivative(st.chi, "q", 1, "spectral").values
    lhs = np.where(m, d / np.where(m, st.chi.values, 1), 0)
    rhs = pol.dlogR_q.values + 1j * pol.gradS_q.values
    assert np.max(np.abs(lhs - rhs)[m]) < 1e-8
    assert np.all(R[m] > 1e-6 * R.max())


def test_zero_chi_rejected():
    g = PhaseSpaceGrid(n_q=16, n_p=16)
    st = EPSState(ComplexField(g, np.zeros(g.shape)), None, None, 0.0, None, UNIT)
    with pytest.raises(InvalidInputError):
        polar_decompose(st)


def test_threshold_validated(ground_polar):
    st = build_eps_state(WavefunctionSpec.eigenstate(0), PhaseSpaceGrid(n_q=32, n_p=32))
    with pytest.raises(InvalidInputError):
        polar_decompose(st, threshold=1.5)
