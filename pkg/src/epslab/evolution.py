"""Time evolution of the Schrodinger factors and EPS averages.

Distributions are never integrated forward as PDEs: at every recorded time
chi, the Wigner function and the Husimi function are rebuilt from the evolved
wavefunctions, so checks of their evolution equations are independent tests.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.fft as sp_fft

from .errors import ConfigError, ExpansionError, InvalidInputError, NormalizationError
from .hamilton_jacobi import HARMONIC_H, ResidualReport, harmonic_extended_hamiltonian, make_report
from .numerics import (
    ComplexField,
    PhaseSpaceGrid,
    apply_stencil,
    get_workers,
    integrate_2d,
    momentum_transform,
)
from .operator_algebra import evaluate_scalar, parse, to_pde_stencil
from .states import (
    DEFAULT_SUPPORT_THRESHOLD,
    EPSState,
    OscillatorParams,
    WavefunctionSpec,
    build_eps_state,
    eigenstate_p,
    eigenstate_q,
    state_from_wavefunctions,
    support_mask,
)
from .serialization import fmt
from .transforms import QuasiDistribution, husimi_from_wigner, wigner_from_psi

COEFF_CUTOFF = 1e-12
MASS_DEFICIT_LIMIT = 1e-10
NORM_FLOOR = 1e-8
SPLIT_STEP_LIMIT = 0.1


@dataclass(frozen=True)
class EvolutionConfig:
    t_final: float
    dt: float
    method: str = "eigenbasis"
    record_stride: int = 1
    split_order: int = 4

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ConfigError("t_final must be at least dt")
        if self.method not in ("eigenbasis", "split_step"):
            raise ConfigError(f"unknown evolution method {self.method!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError("record_stride must be a positive integer")
        if self.split_order not in (2, 4, 6):
            raise ConfigError("split_order must be 2, 4 or 6")

    @property
    def n_steps(self) -> int:
        n = self.t_final / self.dt
        steps = int(round(n))
        if abs(n - steps) > 1e-9 * max(1.0, n):
            raise ConfigError(f"t_final/dt = {n} is not an integer number of steps")
        return steps

    def validate(self, params: OscillatorParams):
        if self.method == "split_step" and self.dt * params.omega > SPLIT_STEP_LIMIT:
            raise ConfigError(
                f"split-step stability limit: dt*omega = {self.dt * params.omega:.4g} exceeds {SPLIT_STEP_LIMIT}"
            )
        return self

    def record_times(self) -> np.ndarray:
        n = self.n_steps
        idx = list(range(0, n + 1, self.record_stride))
        if idx[-1] != n:
            idx.append(n)
        return np.array(idx) * self.dt

    def to_dict(self) -> dict:
        return {
            "t_final": self.t_final,
            "dt": self.dt,
            "method": self.method,
            "record_stride": self.record_stride,
            "split_order": self.split_order,
        }


@dataclass(frozen=True, eq=False)
class WavefunctionSeries:
    """psi(t) and phi(t) sampled at ``times``; rows are times."""

    times: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    grid: PhaseSpaceGrid
    params: OscillatorParams
    spec: Optional[WavefunctionSpec] = None

    def state(self, i: int) -> EPSState:
        return state_from_wavefunctions(self.psi[i], self.phi[i], self.grid, self.params, float(self.times[i]), self.spec)


def _eigenbasis(spec: WavefunctionSpec, grid: PhaseSpaceGrid, times):
    coeffs = spec.eigen_coefficients(COEFF_CUTOFF)
    deficit = 1.0 - float(np.sum(np.abs(coeffs) ** 2))
    if deficit > MASS_DEFICIT_LIMIT:
        raise ExpansionError(f"eigenbasis truncation loses {deficit:.3e} of the norm")
    prm = spec.params
    keep = np.nonzero(np.abs(coeffs) >= COEFF_CUTOFF)[0]
    energies = np.array([prm.energy(n) for n in keep])
    basis_q = np.array([eigenstate_q(n, prm, grid.q) for n in keep])
    basis_p = np.array([eigenstate_p(n, prm, grid.p) for n in keep])
    phases = np.exp(-1j * np.outer(times, energies) / prm.hbar) * coeffs[keep][None, :]
    return phases @ basis_q, phases @ basis_p


def _yoshida_weights(order: int):
    """Substep weights composing the symmetric second-order step to ``order``."""
    w = [1.0]
    for k in range(2, order, 2):
        s = 2 ** (1 / (k + 1))
        w1 = 1 / (2 - s)
        w0 = -s * w1
        w = [x * w1 for x in w] + [x * w0 for x in w] + [x * w1 for x in w]
    return w


def _split_step(psi0, grid: PhaseSpaceGrid, params: OscillatorParams, config: EvolutionConfig):
    q = grid.q
    kq = 2 * np.pi * sp_fft.fftfreq(grid.n_q, d=grid.dq)
    hbar, m = params.hbar, params.m
    potential = 0.5 * params.k * q**2
    weights = _yoshida_weights(config.split_order)
    half_v = [np.exp(-0.5j * w * config.dt * potential / hbar) for w in weights]
    kinetic = [np.exp(-1j * w * config.dt * hbar * kq**2 / (2 * m)) for w in weights]
    workers = get_workers()

    def step(psi):
        for hv, kin in zip(half_v, kinetic):
            psi = hv * psi
            psi = sp_fft.ifft(kin * sp_fft.fft(psi, workers=workers), workers=workers)
            psi = hv * psi
        return psi

    n = config.n_steps
    record = set(np.round(config.record_times() / config.dt).astype(int))
    out = []
    psi = np.asarray(psi0, dtype=np.complex128)
    for i in range(n + 1):
        if i in record:
            out.append(psi.copy())
        if i < n:
            psi = step(psi)
    return np.array(out)


def evolve_wavefunctions(
    spec: WavefunctionSpec,
    params: Optional[OscillatorParams] = None,
    config: Optional[EvolutionConfig] = None,
    grid: Optional[PhaseSpaceGrid] = None,
) -> WavefunctionSeries:
    """psi(q, t) and phi(p, t) at the recorded times.

    ``eigenbasis`` applies exact phases exp(-i E_n t/hbar) to the eigenbasis
    expansion of the initial state; ``split_step`` integrates the
    q-representation Schrodinger equation with a symmetric Strang step
    composed to ``config.split_order`` and obtains phi by quadrature.
    """
    if params is not None and params != spec.params:
        spec = WavefunctionSpec(spec.kind, params, spec.n, spec.q0, spec.p0)
    params = spec.params
    if config is None:
        raise InvalidInputError("an EvolutionConfig is required")
    grid = grid or PhaseSpaceGrid()
    config.validate(params)
    times = config.record_times()
    if config.method == "eigenbasis":
        psi, phi = _eigenbasis(spec, grid, times)
    else:
        psi = _split_step(spec.psi(grid.q, 0.0), grid, params, config)
        phi = momentum_transform(psi, grid.q, grid.p, params.hbar)
    return WavefunctionSeries(times, psi, phi, grid, params, spec)


# ------------------------------------------------------------- averaging


def _observable_values(observable, grid: PhaseSpaceGrid, params: OscillatorParams) -> np.ndarray:
    P, Q = grid.mesh()
    if callable(observable):
        return np.broadcast_to(np.asarray(observable(P, Q)), grid.shape)
    expr = parse(observable) if isinstance(observable, str) else observable
    values = {"hbar": params.hbar, "m": params.m, "k": params.k, "omega": params.omega, "f": params.f}
    out = np.zeros(grid.shape, dtype=np.complex128)
    for powers in expr.operator_groups():
        a, b, c, d = powers
        if c or d:
            raise InvalidInputError("observables are c-number functions of p and q")
        coeff = evaluate_scalar(expr.coefficient_of(powers), values)
        out = out + coeff * Q**a * P**b
    return out


def eps_expectation(state: EPSState, observable: Union[str, Callable]) -> complex:
    """(1/N) * integral O(p, q) conj(chi) dp dq with N = integral conj(chi) dp dq.

    ``observable`` is a polynomial in p and q (text or expression) or a
    callable ``O(P, Q)`` on the mesh.  The real part is the physical average;
    the imaginary part is returned as a diagnostic.
    """
    chi_c = np.conj(state.chi.values)
    g = state.grid
    norm = integrate_2d(ComplexField(g, chi_c))
    if abs(norm) < NORM_FLOOR:
        raise NormalizationError(f"|integral conj(chi)| = {abs(norm):.3e} is below {NORM_FLOOR}")
    vals = _observable_values(observable, g, state.params)
    return integrate_2d(ComplexField(g, vals * chi_c)) / norm


@dataclass
class Trajectory:
    times: np.ndarray
    expectations: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise InvalidInputError("trajectory times must be strictly increasing")

    def to_csv(self) -> str:
        names = sorted(self.expectations)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["time"]
        for n in names:
            header += [n, f"{n}.imag"]
        writer.writerow(header)
        for i, t in enumerate(self.times):
            row = [fmt(t)]
            for n in names:
                v = complex(self.expectations[n][i])
                row += [fmt(v.real), fmt(v.imag)]
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        meta = dict(self.metadata)
        meta["observables"] = sorted(self.expectations)
        meta["n_times"] = int(len(self.times))
        return json.dumps(meta, indent=2, sort_keys=True)


DEFAULT_OBSERVABLES = {"q": "q", "p": "p", "H": HARMONIC_H}


def expectation_trajectory(series: WavefunctionSeries, observables=None) -> Trajectory:
    observables = observables or DEFAULT_OBSERVABLES
    exp = {name: [] for name in observables}
    for i in range(len(series.times)):
        st = series.state(i)
        for name, obs in observables.items():
            exp[name].append(eps_expectation(st, obs))
    return Trajectory(series.times, {k: np.array(v) for k, v in exp.items()})


def evolve_distributions(
    spec: WavefunctionSpec,
    params: Optional[OscillatorParams] = None,
    f=None,
    config: Optional[EvolutionConfig] = None,
    grid: Optional[PhaseSpaceGrid] = None,
    observables=None,
) -> Trajectory:
    """Evolve psi and phi, then rebuild chi, P_w and P_h at every recorded time."""
    series = evolve_wavefunctions(spec, params, config, grid)
    traj = expectation_trajectory(series, observables)
    for i, t in enumerate(series.times):
        st = series.state(i)
        pw = wigner_from_psi(series.psi[i], series.grid, series.params, float(t), source=series.spec)
        ph = husimi_from_wigner(pw, f)
        traj.snapshots.append({"t": float(t), "state": st, "wigner": pw, "husimi": ph})
    traj.metadata = {"spec": spec.to_dict(), "config": config.to_dict(), "f": traj.snapshots[0]["husimi"].f}
    return traj


def peak_location(qd: QuasiDistribution) -> tuple:
    """(q, p) of the largest sample."""
    i, j = np.unravel_index(np.argmax(qd.values), qd.values.shape)
    return float(qd.grid.q[j]), float(qd.grid.p[i])


# ------------------------------------------------------ equation residuals


def eps_states(spec: WavefunctionSpec, grid: PhaseSpaceGrid, times: Sequence[float]) -> list:
    """Exactly evolved EPS states at ``times``."""
    return [build_eps_state(spec, grid, float(t)) for t in times]


def eps_equation_residual(
    state_series: Sequence[EPSState],
    params: Optional[OscillatorParams] = None,
    threshold: float = DEFAULT_SUPPORT_THRESHOLD,
    method: str = "spectral",
    tolerance: Optional[float] = None,
    hamiltonian=None,
    sign: float = 1.0,
) -> ResidualReport:
    """Residual of i hbar d_t chi - H_ext chi at every interior snapshot.

    The time derivative is the centered difference of neighbouring snapshots
    (second order in dt); H_ext is applied as a differential stencil from the
    operator algebra.  The worst snapshot is reported.
    """
    states = list(state_series)
    if len(states) < 3:
        raise InvalidInputError("need at least three snapshots")
    params = params or states[0].params
    ts = np.array([s.t for s in states])
    steps = np.diff(ts)
    dt = steps[0]
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-9 * dt:
        raise InvalidInputError("snapshots must be uniformly spaced in time")
    expr = hamiltonian if hamiltonian is not None else harmonic_extended_hamiltonian()
    values = {"hbar": params.hbar, "m": params.m, "k": params.k, "omega": params.omega, "f": params.f}
    stencil = to_pde_stencil(expr).numeric(values)
    grid = states[0].grid
    worst = None
    for i in range(1, len(states) - 1):
        mid = states[i]
        dchi = (states[i + 1].chi.values - states[i - 1].chi.values) / (2 * dt)
        h_chi = apply_stencil(stencil, mid.chi, method).values
        residual = 1j * params.hbar * dchi - sign * h_chi
        mask = support_mask(np.abs(mid.chi.values), threshold)
        rep = make_report("", residual, mask, grid, params)
        if worst is None or rep.max_abs > worst.max_abs:
            worst, worst_t = rep, mid.t
    return ResidualReport(
        "EPS equation: i hbar d_t chi - H_ext chi",
        worst.max_abs,
        worst.l2,
        worst.mask_fraction,
        grid,
        params,
        tolerance,
        {"dt": float(dt), "method": method, "worst_time": float(worst_t), "n_snapshots": len(states)},
    )
