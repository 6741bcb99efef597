"""Quantum potential and Hamilton-Jacobi type residuals.

Writing chi = R exp(iS/hbar) and dividing i hbar d_t chi = H_ext chi by chi
splits the dynamics into

    real part:  d_t S + V_Q + H_ext(p, q, grad S) = 0
    imag part:  hbar d_t R / R = Im(H_ext chi / chi)

where for the oscillator V_Q = -(hbar^2/2m) R_qq/R + (hbar^2 k/2) R_pp/R.
In the Husimi representation the same dynamics is the transport equation
generated by H_h; at f = hbar/(m omega) its diffusion-like cross term drops
out and the Q-function is carried along classical orbits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .numerics import (
    EDGE_EXCLUSION,
    PhaseSpaceGrid,
    RealField,
    apply_stencil,
)
from .operator_algebra import (
    evaluate_scalar,
    extended_hamiltonian,
    husimi_hamiltonian,
    parse,
    to_pde_stencil,
    wigner_harmonic_hamiltonian,
)
from .states import (
    DEFAULT_SUPPORT_THRESHOLD,
    EPSState,
    OscillatorParams,
    PolarData,
    WavefunctionSpec,
    polar_decompose,
    support_mask,
)
from .transforms import husimi_distribution

UNREPRESENTATIVE_FRACTION = 0.1
# chi must fall this far below the mask threshold at the grid boundary, or the
# periodic wrap of spectral derivatives leaks into the edge of the mask
EDGE_MARGIN = 1e-3
HARMONIC_H = "p^2/(2*m) + (k/2)*q^2"


@dataclass(frozen=True)
class ResidualReport:
    """Masked statistics of a pointwise identity.

    ``l2`` is the discrete L2 norm sqrt(sum r^2 dq dp) over the mask.  When
    ``tolerance`` is set, ``passed`` records ``max_abs <= tolerance``; a report
    whose mask covers no more than 10% of the grid is flagged unrepresentative
    and never passes.
    """

    identity: str
    max_abs: float
    l2: float
    mask_fraction: float
    grid: PhaseSpaceGrid
    params: OscillatorParams
    tolerance: Optional[float] = None
    details: dict = field(default_factory=dict)

    @property
    def representative(self) -> bool:
        return self.mask_fraction > UNREPRESENTATIVE_FRACTION

    @property
    def passed(self) -> Optional[bool]:
        if self.tolerance is None:
            return None
        return bool(self.representative and self.max_abs <= self.tolerance)

    def with_tolerance(self, tolerance: float) -> "ResidualReport":
        return ResidualReport(
            self.identity, self.max_abs, self.l2, self.mask_fraction, self.grid, self.params, tolerance, self.details
        )

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "max_abs": self.max_abs,
            "l2": self.l2,
            "mask_fraction": self.mask_fraction,
            "representative": self.representative,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "grid": self.grid.to_dict(),
            "params": self.params.to_dict(),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _edge_details(polar: PolarData, threshold: float) -> dict:
    d = {"edge_ratio": polar.edge_ratio}
    if polar.edge_ratio > EDGE_MARGIN * threshold:
        d["warnings"] = [
            f"chi is only down to {polar.edge_ratio:.2g} of its maximum at the grid boundary;"
            " widen the domain for reliable values near the mask edge"
        ]
    return d


def make_report(identity, residual, mask, grid, params, tolerance=None, **details) -> ResidualReport:
    r = np.where(mask, np.abs(residual), 0.0)
    max_abs = float(np.max(r)) if np.any(mask) else float("nan")
    l2 = float(np.sqrt(np.sum(r**2) * grid.dq * grid.dp))
    return ResidualReport(identity, max_abs, l2, float(np.mean(mask)), grid, params, tolerance, details)


# ----------------------------------------------------------- quantum potential


@dataclass(frozen=True, eq=False)
class QuantumPotentialFields:
    qp_q: RealField
    qp_p: RealField
    total: RealField
    mask: np.ndarray

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.total.values[self.mask])))


def quantum_potential(polar: PolarData, params: OscillatorParams) -> QuantumPotentialFields:
    """-(hbar^2/2m) R_qq/R and +(hbar^2 k/2) R_pp/R on the support mask (zero elsewhere)."""
    mask = polar.support_mask
    if not np.any(mask):
        raise InvalidInputError("support mask is empty")
    hbar, m, k = params.hbar, params.m, params.k
    g = polar.grid
    qq = np.where(mask, -(hbar**2 / (2 * m)) * polar.lapR_over_R_q.values, 0.0)
    pp = np.where(mask, (hbar**2 * k / 2) * polar.lapR_over_R_p.values, 0.0)
    return QuantumPotentialFields(
        RealField(g, qq, "qp_q", edge=EDGE_EXCLUSION),
        RealField(g, pp, "qp_p", edge=EDGE_EXCLUSION),
        RealField(g, qq + pp, "qp_total", edge=EDGE_EXCLUSION),
        mask,
    )


def _param_values(params: OscillatorParams, f=None) -> dict:
    return {"hbar": params.hbar, "m": params.m, "k": params.k, "omega": params.omega, "f": params.f if f is None else f}


def harmonic_extended_hamiltonian():
    return extended_hamiltonian(parse(HARMONIC_H))


def extended_hamiltonian_value(polar: PolarData, params: OscillatorParams, hamiltonian=None) -> RealField:
    """H_ext(p, q, pi_q = dS/dq, pi_p = dS/dp) on the mask.

    The symbol comes from the operator algebra, with momenta replaced by the
    phase gradients as commuting numbers.
    """
    expr = hamiltonian if hamiltonian is not None else harmonic_extended_hamiltonian()
    values = _param_values(params)
    g = polar.grid
    P, Q = g.mesh()
    pq, pp = polar.gradS_q.values, polar.gradS_p.values
    out = np.zeros(g.shape)
    for term in to_pde_stencil(expr).terms:
        # undo the -i hbar per momentum that the stencil introduced
        a, b, c, d = term.powers
        coeff = term.coefficient * parse("i/hbar") ** (c + d)
        val = evaluate_scalar(coeff, values)
        if abs(val.imag) > 1e-12 * max(1.0, abs(val)):
            raise InvalidInputError("extended Hamiltonian symbol is not real")
        out = out + val.real * Q**a * P**b * pq**c * pp**d
    out = np.where(polar.support_mask, out, 0.0)
    return RealField(g, out, "H_ext(grad S)", edge=EDGE_EXCLUSION)


# ------------------------------------------------------------ time derivatives


@dataclass(frozen=True, eq=False)
class TimeDerivatives:
    """Centered time derivatives of S and log R at the middle of three snapshots."""

    dSdt: np.ndarray
    dlogRdt: np.ndarray
    mask: np.ndarray


def time_derivatives(before: EPSState, after: EPSState, threshold: float = DEFAULT_SUPPORT_THRESHOLD):
    """d_t S and d_t R / R from two snapshots straddling the evaluation time.

    Uses the local ratio chi(t+dt)/chi(t-dt): its argument is the phase
    change (no global unwrapping; the additive constant in S drops out) and
    the log of its modulus is the change in log R.
    """
    dt2 = after.t - before.t
    if not dt2 > 0:
        raise InvalidInputError("snapshots must be in increasing time order")
    hbar = after.params.hbar
    a, b = after.chi.values, before.chi.values
    mask = support_mask(np.abs(a), threshold) & support_mask(np.abs(b), threshold)
    ratio = np.where(mask, a * np.conj(np.where(mask, b, 1.0)), 1.0)
    ratio = ratio / np.where(mask, np.abs(b) ** 2, 1.0)
    ds = np.where(mask, hbar * np.angle(ratio) / dt2, 0.0)
    dlog = np.where(mask, np.log(np.abs(ratio)) / dt2, 0.0)
    return TimeDerivatives(ds, dlog, mask)


def _stationary(state: EPSState, stationary):
    if stationary is None:
        return bool(state.spec is not None and state.spec.stationary)
    return bool(stationary)


# -------------------------------------------------------------- residuals


def modified_hj_residual(
    state: EPSState,
    params: Optional[OscillatorParams] = None,
    dSdt=None,
    stationary: Optional[bool] = None,
    threshold: float = DEFAULT_SUPPORT_THRESHOLD,
    method: str = "spectral",
    tolerance: Optional[float] = None,
    sign: float = 1.0,
) -> ResidualReport:
    """Residual of d_t S + V_Q + H_ext(grad S) on the support mask.

    Eigenstates (or ``stationary=True``) use d_t S = 0.  Otherwise ``dSdt``
    must be given as an array, RealField or a :class:`TimeDerivatives`.
    ``sign`` multiplies the quantum-potential term and exists for negative
    controls.
    """
    params = params or state.params
    is_stat = _stationary(state, stationary)
    polar = polar_decompose(state, threshold, method)
    mask = polar.support_mask.copy()
    if is_stat:
        dsdt = 0.0
    elif dSdt is None:
        raise InvalidInputError("dSdt is required for a non-stationary state")
    elif isinstance(dSdt, TimeDerivatives):
        dsdt = dSdt.dSdt
        mask &= dSdt.mask
    else:
        dsdt = dSdt.values if isinstance(dSdt, RealField) else np.asarray(dSdt, dtype=float)
    qp = quantum_potential(polar, params)
    ham = extended_hamiltonian_value(polar, params)
    residual = dsdt + sign * qp.total.values + ham.values
    return make_report(
        "modified Hamilton-Jacobi: dS/dt + V_Q + H_ext(grad S)",
        residual,
        mask,
        state.grid,
        params,
        tolerance,
        method=method,
        stationary=is_stat,
        quantum_potential_max=qp.max_abs(),
        **_edge_details(polar, threshold),
    )


def imaginary_part_residual(
    state: EPSState,
    params: Optional[OscillatorParams] = None,
    dlogRdt=None,
    stationary: Optional[bool] = None,
    threshold: float = DEFAULT_SUPPORT_THRESHOLD,
    method: str = "spectral",
    tolerance: Optional[float] = None,
    sign: float = 1.0,
) -> ResidualReport:
    """Residual of d_t R/R - Im(H_ext chi/chi)/hbar assembled from R and grad S.

    Im(H_ext chi/chi)/hbar = -(1/m)(R_q/R) S_q - (1/2m) S_qq - (p/m) R_q/R
                             + k (R_p/R) S_p + (k/2) S_pp + k q R_p/R.
    """
    params = params or state.params
    is_stat = _stationary(state, stationary)
    polar = polar_decompose(state, threshold, method)
    mask = polar.support_mask.copy()
    if is_stat:
        dlog = 0.0
    elif dlogRdt is None:
        raise InvalidInputError("dlogRdt is required for a non-stationary state")
    elif isinstance(dlogRdt, TimeDerivatives):
        dlog = dlogRdt.dlogRdt
        mask &= dlogRdt.mask
    else:
        dlog = dlogRdt.values if isinstance(dlogRdt, RealField) else np.asarray(dlogRdt, dtype=float)
    m, k = params.m, params.k
    P, Q = state.grid.mesh()
    rq, rp = polar.dlogR_q.values, polar.dlogR_p.values
    sq, sp = polar.gradS_q.values, polar.gradS_p.values
    flux = (
        -(1 / m) * rq * sq
        - (1 / (2 * m)) * polar.lapS_q.values
        - (P / m) * rq
        + k * rp * sp
        + (k / 2) * polar.lapS_p.values
        + k * Q * rp
    )
    residual = dlog - sign * flux
    return make_report(
        "continuity: dR/dt / R - Im(H_ext chi / chi)/hbar",
        residual,
        mask,
        state.grid,
        params,
        tolerance,
        method=method,
        stationary=is_stat,
        **_edge_details(polar, threshold),
    )


# ------------------------------------------------- Husimi-representation checks


def husimi_stencil(params: OscillatorParams, f: float, full: bool = True):
    """Numeric stencil of H_h (``full``) or of the transport part (P/m) pi_Q - k Q pi_P."""
    expr = husimi_hamiltonian().result if full else wigner_harmonic_hamiltonian()
    return to_pde_stencil(expr).numeric(_param_values(params, f))


def _centered(samples, dt):
    return (samples[2] - samples[0]) / (2 * dt)


def husimi_equation_residual(
    spec: WavefunctionSpec,
    grid: PhaseSpaceGrid,
    f: Optional[float] = None,
    t_samples: Optional[Sequence[float]] = None,
    full: bool = True,
    threshold: float = DEFAULT_SUPPORT_THRESHOLD,
    method: str = "fd",
    tolerance: Optional[float] = None,
    sign: float = 1.0,
) -> ResidualReport:
    """Residual of d_t P_h - H_h P_h / (i hbar) over recomputed Husimi functions.

    ``full`` selects the complete H_h stencil; otherwise only the transport
    part.  Stationary states use d_t P_h = 0 at ``t_samples[0]`` (or t = 0).
    For other states ``t_samples`` must be a uniform sequence of at least
    three times; the residual is evaluated at every interior sample with a
    centered difference and the worst value is reported.
    """
    params = spec.params
    f = params.f if f is None else float(f)
    hbar = params.hbar
    stencil = husimi_stencil(params, f, full)
    stencil = [(c / (1j * hbar), a, b, cq, dp) for c, a, b, cq, dp in stencil]

    def ph(t):
        return husimi_distribution(spec, grid, f, t).field

    def rhs(fld):
        return apply_stencil(stencil, fld, method).values

    def local_mask(fld):
        return support_mask(np.abs(fld.values), threshold)

    if spec.stationary:
        t0 = float(t_samples[0]) if t_samples is not None and len(t_samples) else 0.0
        fld = ph(t0)
        residual = -sign * rhs(fld)
        mask = local_mask(fld)
        worst = make_report("", residual, mask, grid, params)
        times = [t0]
        per_time = [worst.max_abs]
    else:
        if t_samples is None or len(t_samples) < 3:
            raise InvalidInputError("need at least three time samples for a time-dependent state")
        ts = np.asarray(t_samples, dtype=float)
        steps = np.diff(ts)
        dt = steps[0]
        if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-9 * abs(dt):
            raise InvalidInputError("time samples must be uniform and increasing")
        window = [ph(ts[0]), ph(ts[1])]
        worst, per_time = None, []
        for i in range(1, len(ts) - 1):
            window.append(ph(ts[i + 1]))
            mid = window[1]
            dpdt = _centered([w.values for w in window], dt)
            residual = dpdt - sign * rhs(mid)
            rep = make_report("", residual, local_mask(mid), grid, params)
            per_time.append(rep.max_abs)
            if worst is None or rep.max_abs > worst.max_abs:
                worst = rep
            window.pop(0)
        times = list(ts[1:-1])
    label = "Husimi equation with full H_h" if full else "Husimi transport (P/m) d_Q - k Q d_P"
    details = {
        "f": f,
        "q_function": abs(f - params.q_function_f) <= 1e-12 * params.q_function_f,
        "stationary": spec.stationary,
        "method": method,
        "n_times": len(times),
        "worst_time": float(times[int(np.argmax(per_time))]),
        "reading": "classical Hamilton-Jacobi form tested as Liouville transport of the Q-function",
    }
    return ResidualReport(
        f"{label} [{spec.describe()}]",
        worst.max_abs,
        worst.l2,
        worst.mask_fraction,
        grid,
        params.with_f(f),
        tolerance,
        details,
    )


def q_representation_residual(
    spec: WavefunctionSpec,
    grid: PhaseSpaceGrid,
    t_samples: Optional[Sequence[float]] = None,
    f: Optional[float] = None,
    **kwargs,
) -> ResidualReport:
    """Classical transport residual of the Q-function, valid only at f = hbar/(m omega).

    For eigenstates this is the stationarity residual (P/m) d_Q P_h - k Q d_P P_h.
    """
    params = spec.params
    f = params.f if f is None else float(f)
    if abs(f - params.q_function_f) > 1e-12 * params.q_function_f:
        raise InvalidInputError(
            f"the classical form holds only at f = hbar/(m omega) = {params.q_function_f:g}, got f = {f:g}"
        )
    return husimi_equation_residual(spec, grid, f, t_samples, full=False, **kwargs)


def quantum_potential_magnitude(state: EPSState, threshold=DEFAULT_SUPPORT_THRESHOLD, method="spectral"):
    """Largest |V_Q| on the support mask; nonzero values mark a quantum potential."""
    polar = polar_decompose(state, threshold, method)
    return quantum_potential(polar, state.params).max_abs()


__all__ = [
    "ResidualReport",
    "QuantumPotentialFields",
    "TimeDerivatives",
    "quantum_potential",
    "extended_hamiltonian_value",
    "modified_hj_residual",
    "imaginary_part_residual",
    "time_derivatives",
    "husimi_equation_residual",
    "q_representation_residual",
    "quantum_potential_magnitude",
    "husimi_stencil",
    "make_report",
]
