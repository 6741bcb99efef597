import json

import numpy as np
import pytest

from epslab.errors import ConfigError, InvalidInputError, NormalizationError
from epslab.numerics import ComplexField, PhaseSpaceGrid, integrate_1d
from epslab.evolution import (
    EvolutionConfig,
    Trajectory,
    eps_equation_residual,
    eps_expectation,
    eps_states,
    evolve_distributions,
    evolve_wavefunctions,
    expectation_trajectory,
    peak_location,
)
from epslab.states import EPSState, OscillatorParams, WavefunctionSpec, build_eps_state

UNIT = OscillatorParams()
GRID = PhaseSpaceGrid()
T = UNIT.period


# ------------------------------------------------------------ averages


@pytest.mark.parametrize("n", range(6))
def test_energy_of_eigenstates(n):
    st = build_eps_state(WavefunctionSpec.eigenstate(n), GRID)
    assert eps_expectation(st, "1") == pytest.approx(1.0, abs=1e-12)
    h = eps_expectation(st, "p^2/(2*m) + (k/2)*q^2")
    assert h.real == pytest.approx(n + 0.5, abs=1e-6)
    assert abs(h.imag) < 1e-8


def test_callable_observable_matches_text():
    st = build_eps_state(WavefunctionSpec.coherent(0.8, -0.4), GRID, 0.3)
    a = eps_expectation(st, "q*p")
    b = eps_expectation(st, lambda P, Q: Q * P)
    assert a == pytest.approx(b, abs=1e-14)


def test_position_average_of_coherent_state():
    # <q>(t) = q0 cos t + p0 sin t in unit parameters
    for t in (0.0, 0.4, 2.0):
        st = build_eps_state(WavefunctionSpec.coherent(1.0, 0.5), GRID, t)
        q, p = eps_expectation(st, "q"), eps_expectation(st, "p")
        assert q.real == pytest.approx(np.cos(t) + 0.5 * np.sin(t), abs=1e-8)
        assert p.real == pytest.approx(0.5 * np.cos(t) - np.sin(t), abs=1e-8)
        assert abs(q.imag) < 1e-8 and abs(p.imag) < 1e-8


def test_momentum_observables_rejected():
    st = build_eps_state(WavefunctionSpec.eigenstate(0), GRID)
    with pytest.raises(InvalidInputError):
        eps_expectation(st, "pi_q")


def test_vanishing_normalization():
    g = PhaseSpaceGrid(n_q=32, n_p=32)
    st = EPSState.from_field(ComplexField(g, np.zeros(g.shape)), UNIT)
    with pytest.raises(NormalizationError):
        eps_expectation(st, "q")


# ------------------------------------------------------ wavefunction series


def test_config_validation():
    with pytest.raises(ConfigError):
        EvolutionConfig(1.0, 0.0)
    with pytest.raises(ConfigError):
        EvolutionConfig(1.0, 0.3).n_steps
    with pytest.raises(ConfigError):
        EvolutionConfig(1.0, 0.1, method="rk4")
    with pytest.raises(ConfigError):
        EvolutionConfig(1.0, 0.5, method="split_step").validate(UNIT)
    with pytest.raises(InvalidInputError):
        evolve_wavefunctions(WavefunctionSpec.eigenstate(0))


def test_record_times_include_the_end():
    cfg = EvolutionConfig(1.0, 0.1, record_stride=3)
    assert np.allclose(cfg.record_times(), [0.0, 0.3, 0.6, 0.9, 1.0])


def test_eigenstate_density_is_constant():
    cfg = EvolutionConfig(T, T / 20)
    s = evolve_wavefunctions(WavefunctionSpec.eigenstate(2), config=cfg)
    dens = np.abs(s.psi) ** 2
    assert np.max(np.abs(dens - dens[0])) < 1e-14


def test_split_step_matches_eigenbasis():
    spec = WavefunctionSpec.coherent(1.0, 0.5)
    exact = evolve_wavefunctions(spec, config=EvolutionConfig(T, T / 1000, record_stride=250))
    split = evolve_wavefunctions(spec, config=EvolutionConfig(T, T / 1000, "split_step", record_stride=250))
    for a, b in zip(exact.psi, split.psi):
        assert np.sqrt(integrate_1d(np.abs(a - b) ** 2, GRID.dq)) <= 1e-8
    fidelity = abs(np.sum(np.conj(exact.psi[0]) * split.psi[-1]) * GRID.dq) ** 2
    assert fidelity == pytest.approx(1.0, abs=1e-10)


def test_split_step_phi_is_consistent():
    spec = WavefunctionSpec.coherent(0.5, 0.0)
    s = evolve_wavefunctions(spec, config=EvolutionConfig(1.0, 0.01, "split_step", record_stride=100))
    assert np.max(np.abs(s.phi[-1] - spec.phi(GRID.p, 1.0))) < 1e-8


def test_params_override_spec():
    prm = OscillatorParams(m=1.0, omega=2.0)
    s = evolve_wavefunctions(WavefunctionSpec.eigenstate(0), prm, EvolutionConfig(0.5, 0.25))
    assert s.params == prm


# ----------------------------------------------------------- trajectories


def test_coherent_trajectory_follows_classical_orbit():
    cfg = EvolutionConfig(T, T / 8)
    traj = expectation_trajectory(evolve_wavefunctions(WavefunctionSpec.coherent(1.0, 0.0), config=cfg))
    assert np.max(np.abs(traj.expectations["q"].real - np.cos(traj.times))) < 1e-6
    assert np.max(np.abs(traj.expectations["p"].real + np.sin(traj.times))) < 1e-6
    assert np.max(np.abs(traj.expectations["H"].real - 1.0)) < 1e-6


def test_trajectory_serialization():
    cfg = EvolutionConfig(1.0, 0.5)
    traj = expectation_trajectory(evolve_wavefunctions(WavefunctionSpec.eigenstate(1), config=cfg))
    rows = traj.to_csv().splitlines()
    assert rows[0] == "time,H,H.imag,p,p.imag,q,q.imag"
    assert len(rows) == 4
    meta = json.loads(traj.to_json())
    assert meta["n_times"] == 3 and meta["observables"] == ["H", "p", "q"]


def test_trajectory_times_must_increase():
    with pytest.raises(InvalidInputError):
        Trajectory([0.0, 0.0])


def test_distributions_are_rebuilt_each_step():
    cfg = EvolutionConfig(T, T / 4)
    traj = evolve_distributions(WavefunctionSpec.coherent(2.0, 0.0), config=cfg)
    for snap in traj.snapshots:
        t = snap["t"]
        q, p = peak_location(snap["wigner"])
        assert abs(q - 2 * np.cos(t)) <= GRID.dq and abs(p + 2 * np.sin(t)) <= GRID.dp
        assert snap["wigner"].mass == pytest.approx(1.0, abs=1e-8)
        assert snap["husimi"].values.min() >= -1e-10 * snap["husimi"].values.max()
    assert traj.metadata["f"] == pytest.approx(1.0)


def test_eigenstate_husimi_is_stationary():
    cfg = EvolutionConfig(T, T / 3)
    traj = evolve_distributions(WavefunctionSpec.eigenstate(3), f=2.0, config=cfg)
    first = traj.snapshots[0]["husimi"].values
    for snap in traj.snapshots[1:]:
        assert np.max(np.abs(snap["husimi"].values - first)) < 1e-12


# ------------------------------------------------------------ EPS equation


def test_eps_equation_eigenstate():
    states = eps_states(WavefunctionSpec.eigenstate(1), GRID, [0.0, 0.01, 0.02])
    assert eps_equation_residual(states).max_abs < 1e-6


def test_eps_equation_second_order_in_time():
    spec = WavefunctionSpec.coherent(1.0, 0.0)
    errs = []
    for dt in (T / 500, T / 1000):
        errs.append(eps_equation_residual(eps_states(spec, GRID, [0.5, 0.5 + dt, 0.5 + 2 * dt])).max_abs)
    assert 3.9 <= errs[0] / errs[1] <= 4.1


def test_eigenstate_chi_is_annihilated():
    # chi is static and H_ext chi = 0, so the sign of H_ext is invisible here
    states = eps_states(WavefunctionSpec.eigenstate(1), GRID, [0.0, 0.01, 0.02])
    assert eps_equation_residual(states, sign=-1.0).max_abs < 1e-6


def test_eps_equation_wrong_sign():
    states = eps_states(WavefunctionSpec.coherent(1.0, 0.0), GRID, [0.0, 0.001, 0.002])
    assert eps_equation_residual(states, sign=-1.0).max_abs > 0.1


def test_eps_equation_input_checks():
    spec = WavefunctionSpec.eigenstate(0)
    with pytest.raises(InvalidInputError):
        eps_equation_residual(eps_states(spec, GRID, [0.0, 0.1]))
    with pytest.raises(InvalidInputError):
        eps_equation_residual(eps_states(spec, GRID, [0.0, 0.1, 0.3]))
