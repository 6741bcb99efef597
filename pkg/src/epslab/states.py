"""Harmonic-oscillator wavefunctions and the EPS state function.

Fourier convention used throughout the package::

    phi(p) = (2*pi*hbar)^(-1/2) * integral psi(q) exp(-i*p*q/hbar) dq

Under it the eigenfunctions satisfy phi_n(p) = (-i)^n times the Hermite
function in the scaled momentum, and the displaced ground state with phase
``exp(i*p0*(q - q0/2)/hbar)`` is the Weyl-displaced vacuum, so its time
evolution is a rigid classical rotation times ``exp(-i*omega*t/2)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from math import lgamma, log, sqrt
from typing import Optional

import numpy as np

from .errors import DomainCoverageError, InvalidInputError, UnsupportedOrderError
from .numerics import (
    EDGE_EXCLUSION,
    ComplexField,
    PhaseSpaceGrid,
    RealField,
    edge_ratio,
    integrate_1d,
    partial_derivative,
)

MAX_EIGEN_INDEX = 60
COVERAGE_TOLERANCE = 1e-6
DEFAULT_SUPPORT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class OscillatorParams:
    """Physical constants; ``f`` defaults to the Q-function value hbar/(m*omega)."""

    m: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0
    f: Optional[float] = None

    def __post_init__(self):
        if not self.m > 0:
            raise InvalidInputError("mass must be positive")
        if not self.omega >= 0:
            raise InvalidInputError("omega must be non-negative")
        if not self.hbar > 0:
            raise InvalidInputError("hbar must be positive")
        if self.f is None:
            if self.omega == 0:
                raise InvalidInputError("f must be given explicitly when omega == 0")
            object.__setattr__(self, "f", self.hbar / (self.m * self.omega))
        if not self.f > 0:
            raise InvalidInputError("smoothing parameter f must be positive")

    @property
    def k(self) -> float:
        return self.m * self.omega**2

    @property
    def q_function_f(self) -> float:
        return self.hbar / (self.m * self.omega)

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    def energy(self, n: int) -> float:
        return self.hbar * self.omega * (n + 0.5)

    def with_f(self, f) -> "OscillatorParams":
        if isinstance(f, str):
            if f != "q-function":
                raise InvalidInputError(f"unknown smoothing token {f!r}")
            f = self.q_function_f
        return dataclasses.replace(self, f=float(f))

    def to_dict(self) -> dict:
        return {"m": self.m, "omega": self.omega, "hbar": self.hbar, "f": self.f, "k": self.k}


def _hermite_functions(n: int, xi: np.ndarray) -> np.ndarray:
    """Normalized Hermite functions h_0..h_n at ``xi`` by the three-term recurrence."""
    out = np.empty((n + 1,) + xi.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * xi**2)
    if n >= 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for j in range(1, n):
        out[j + 1] = np.sqrt(2.0 / (j + 1)) * xi * out[j] - np.sqrt(j / (j + 1)) * out[j - 1]
    return out


def _check_index(n):
    if int(n) != n or n < 0:
        raise InvalidInputError(f"eigenstate index must be a non-negative integer, got {n!r}")
    if n > MAX_EIGEN_INDEX:
        raise UnsupportedOrderError(f"eigenstate index {n} exceeds the guard {MAX_EIGEN_INDEX}")


def _require_oscillator(params):
    if params.omega <= 0:
        raise InvalidInputError("oscillator eigenstates need omega > 0")


def eigenstate_q(n: int, params: OscillatorParams, q) -> np.ndarray:
    """Normalized psi_n(q) at ``t = 0``."""
    _check_index(n)
    _require_oscillator(params)
    a = params.m * params.omega / params.hbar
    xi = np.asarray(q, dtype=float) * np.sqrt(a)
    return (a**0.25 * _hermite_functions(int(n), xi)[-1]).astype(np.complex128)


def eigenstate_p(n: int, params: OscillatorParams, p) -> np.ndarray:
    """Momentum-space eigenfunction phi_n(p) = (-i)^n (m omega hbar)^(-1/4) h_n(p/sqrt(m omega hbar))."""
    _check_index(n)
    _require_oscillator(params)
    b = params.m * params.omega * params.hbar
    xi = np.asarray(p, dtype=float) / np.sqrt(b)
    return (-1j) ** int(n) * b**-0.25 * _hermite_functions(int(n), xi)[-1]


def eigenstate_q_derivative(n: int, params: OscillatorParams, q) -> np.ndarray:
    """d psi_n/dq from the ladder identity; used as an independent check of numerical derivatives."""
    _check_index(n)
    a = params.m * params.omega / params.hbar
    xi = np.asarray(q, dtype=float) * np.sqrt(a)
    h = _hermite_functions(int(n) + 1, xi)
    lower = np.sqrt(n / 2) * h[n - 1] if n > 0 else 0.0
    return (a**0.75 * (lower - np.sqrt((n + 1) / 2) * h[n + 1])).astype(np.complex128)


def coherent_center(q0, p0, params, t):
    """Classical phase-space point reached from ``(q0, p0)`` after time ``t``."""
    w, m = params.omega, params.m
    c, s = np.cos(w * t), np.sin(w * t)
    if w == 0:
        return q0 + p0 * t / m, p0
    return q0 * c + p0 / (m * w) * s, p0 * c - m * w * q0 * s


def _coherent_q(q0, p0, params, q):
    a = params.m * params.omega / params.hbar
    q = np.asarray(q, dtype=float)
    return (a / np.pi) ** 0.25 * np.exp(-0.5 * a * (q - q0) ** 2 + 1j * p0 * (q - 0.5 * q0) / params.hbar)


def _coherent_p(q0, p0, params, p):
    b = params.m * params.omega * params.hbar
    p = np.asarray(p, dtype=float)
    return (np.pi * b) ** -0.25 * np.exp(-0.5 * (p - p0) ** 2 / b - 1j * q0 * (p - 0.5 * p0) / params.hbar)


def coherent_state(q0: float, p0: float, params: OscillatorParams, samples, representation: str = "q"):
    """Displaced ground state centred at ``(q0, p0)`` sampled in the q or p representation.

    Raises DomainCoverageError when the centre sits closer than six widths to
    either end of ``samples``.
    """
    _require_oscillator(params)
    samples = np.asarray(samples, dtype=float)
    if representation == "q":
        centre, width = q0, sqrt(params.hbar / (2 * params.m * params.omega))
    elif representation == "p":
        centre, width = p0, sqrt(params.hbar * params.m * params.omega / 2)
    else:
        raise InvalidInputError("representation must be 'q' or 'p'")
    margin = 6 * width
    if samples.size and (centre - margin < samples.min() or centre + margin > samples.max()):
        raise DomainCoverageError(
            f"coherent-state centre {centre} is within {margin:.3g} of the sample edge"
        )
    if representation == "q":
        return _coherent_q(q0, p0, params, samples)
    return _coherent_p(q0, p0, params, samples)


@dataclass(frozen=True)
class WavefunctionSpec:
    """Either an eigenstate ``n`` or a coherent state centred at ``(q0, p0)``."""

    kind: str
    params: OscillatorParams = OscillatorParams()
    n: int = 0
    q0: float = 0.0
    p0: float = 0.0

    def __post_init__(self):
        if self.kind == "eigenstate":
            _check_index(self.n)
            object.__setattr__(self, "n", int(self.n))
        elif self.kind == "coherent":
            if not (np.isfinite(self.q0) and np.isfinite(self.p0)):
                raise InvalidInputError("coherent-state centre must be finite")
        else:
            raise InvalidInputError(f"unknown wavefunction kind {self.kind!r}")
        _require_oscillator(self.params)

    @classmethod
    def eigenstate(cls, n: int, params: OscillatorParams = OscillatorParams()):
        return cls("eigenstate", params, n=n)

    @classmethod
    def coherent(cls, q0: float, p0: float, params: OscillatorParams = OscillatorParams()):
        return cls("coherent", params, q0=float(q0), p0=float(p0))

    @property
    def stationary(self) -> bool:
        return self.kind == "eigenstate"

    def psi(self, q, t: float = 0.0) -> np.ndarray:
        """Exactly evolved position wavefunction at arbitrary points."""
        if self.kind == "eigenstate":
            phase = np.exp(-1j * self.params.energy(self.n) * t / self.params.hbar)
            return phase * eigenstate_q(self.n, self.params, q)
        qc, pc = coherent_center(self.q0, self.p0, self.params, t)
        return np.exp(-0.5j * self.params.omega * t) * _coherent_q(qc, pc, self.params, q)

    def phi(self, p, t: float = 0.0) -> np.ndarray:
        """Exactly evolved momentum wavefunction at arbitrary points."""
        if self.kind == "eigenstate":
            phase = np.exp(-1j * self.params.energy(self.n) * t / self.params.hbar)
            return phase * eigenstate_p(self.n, self.params, p)
        qc, pc = coherent_center(self.q0, self.p0, self.params, t)
        return np.exp(-0.5j * self.params.omega * t) * _coherent_p(qc, pc, self.params, p)

    def eigen_coefficients(self, cutoff: float = 1e-12) -> np.ndarray:
        """Expansion coefficients c_n in the eigenbasis, truncated below ``cutoff``."""
        if self.kind == "eigenstate":
            c = np.zeros(self.n + 1, dtype=np.complex128)
            c[self.n] = 1.0
            return c
        prm = self.params
        alpha = (prm.m * prm.omega * self.q0 + 1j * self.p0) / sqrt(2 * prm.m * prm.omega * prm.hbar)
        mod2 = abs(alpha) ** 2
        coeffs = []
        for n in range(MAX_EIGEN_INDEX + 1):
            if alpha == 0:
                mag = 1.0 if n == 0 else 0.0
            else:
                mag = np.exp(-0.5 * mod2 + n * log(abs(alpha)) - 0.5 * lgamma(n + 1))
            coeffs.append(mag * np.exp(1j * n * np.angle(alpha)))
            if n > mod2 and mag < cutoff:
                break
        return np.array(coeffs, dtype=np.complex128)

    def describe(self) -> str:
        if self.kind == "eigenstate":
            return f"eigenstate n={self.n}"
        return f"coherent q0={self.q0:g} p0={self.p0:g}"

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "eigenstate":
            d["n"] = self.n
        else:
            d["q0"], d["p0"] = self.q0, self.p0
        return d


@dataclass(frozen=True, eq=False)
class EPSState:
    """chi(p, q, t) with the wavefunction factors it was assembled from.

    ``psi``/``phi`` and ``spec`` are None for synthetic states built with
    :meth:`from_field`.
    """

    chi: ComplexField
    psi: Optional[np.ndarray]
    phi: Optional[np.ndarray]
    t: float
    spec: Optional[WavefunctionSpec]
    params: OscillatorParams

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.chi.grid

    @classmethod
    def from_field(cls, chi, params: OscillatorParams, t: float = 0.0) -> "EPSState":
        if not isinstance(chi, ComplexField):
            chi = ComplexField(chi.grid, chi.values, chi.label)
        return cls(chi, None, None, t, None, params)


def assemble_chi(psi: np.ndarray, phi: np.ndarray, grid: PhaseSpaceGrid, hbar: float) -> np.ndarray:
    """chi(p, q) = psi(q) conj(phi(p)) exp(-i p q / hbar) as an ``(n_p, n_q)`` array."""
    P, Q = grid.mesh()
    return np.conj(phi)[:, None] * psi[None, :] * np.exp(-1j * P * Q / hbar)


def build_eps_state(spec: WavefunctionSpec, grid: PhaseSpaceGrid, t: float = 0.0) -> EPSState:
    hbar = spec.params.hbar
    psi = spec.psi(grid.q, t)
    phi = spec.phi(grid.p, t)
    return state_from_wavefunctions(psi, phi, grid, spec.params, t, spec)


def state_from_wavefunctions(psi, phi, grid, params, t=0.0, spec=None) -> EPSState:
    """Assemble an EPSState from sampled factors, checking grid coverage."""
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    norm_q = integrate_1d(np.abs(psi) ** 2, grid.dq)
    norm_p = integrate_1d(np.abs(phi) ** 2, grid.dp)
    for name, norm in (("psi", norm_q), ("phi", norm_p)):
        if abs(1 - norm) > COVERAGE_TOLERANCE:
            raise DomainCoverageError(f"grid misses part of {name}: norm {norm:.10f}")
    desc = spec.describe() if spec is not None else "wavefunctions"
    chi = ComplexField(grid, assemble_chi(psi, phi, grid, params.hbar), f"chi[{desc}, t={t:g}]")
    return EPSState(chi, psi, phi, float(t), spec, params)


@dataclass(frozen=True, eq=False)
class PolarData:
    """Amplitude and phase-gradient data of chi on its support mask.

    Every field is zero outside ``support_mask``.  ``dlogR_*`` hold
    (1/R) dR/dx and ``lapS_*`` the second derivatives of S; both are needed
    for the continuity part of the polar-decomposed dynamics.
    """

    R: RealField
    gradS_q: RealField
    gradS_p: RealField
    lapR_over_R_q: RealField
    lapR_over_R_p: RealField
    dlogR_q: RealField
    dlogR_p: RealField
    lapS_q: RealField
    lapS_p: RealField
    support_mask: np.ndarray
    hbar: float
    edge_ratio: float = 0.0

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.R.grid

    @property
    def mask_fraction(self) -> float:
        return float(np.mean(self.support_mask))


def support_mask(R: np.ndarray, threshold: float, edge: int = EDGE_EXCLUSION) -> np.ndarray:
    mask = R > threshold * np.max(R)
    if edge:
        mask[:edge, :] = mask[-edge:, :] = False
        mask[:, :edge] = mask[:, -edge:] = False
    return mask


def log_derivatives(chi: ComplexField, mask: np.ndarray, method: str):
    """Return ``(d1q, d2q, d1p, d2p)``: derivatives of chi divided by chi, zero off the mask."""
    safe = np.where(mask, chi.values, 1.0)
    out = []
    for axis in ("q", "p"):
        for order in (1, 2):
            d = partial_derivative(chi, axis, order, method).values
            out.append(np.where(mask, d / safe, 0.0))
    return out


def polar_decompose(
    state: EPSState, threshold: float = DEFAULT_SUPPORT_THRESHOLD, method: str = "spectral"
) -> PolarData:
    """Amplitude, phase gradients and (1/R) d^2R of chi without unwrapping the phase.

    Uses dR/R = Re(d chi/chi), dS = hbar Im(d chi/chi) and
    d^2R/R = Re(d^2 chi/chi) + (dS/hbar)^2 at points where R exceeds
    ``threshold * max(R)`` and outside the edge-exclusion zone.

    ``method`` selects spectral (default) or 4th-order finite-difference
    derivatives of chi.  Finite differences lose accuracy in the Gaussian
    tails: the relative error of d^2 chi/chi grows like (q h)^4 q^2, which
    is ~1e-2 at the 1e-6 mask edge on a 256-point grid over [-8, 8).
    """
    if not 0 < threshold < 1:
        raise InvalidInputError("threshold must lie in (0, 1)")
    chi = state.chi
    R = np.abs(chi.values)
    if not np.any(R > 0):
        raise InvalidInputError("chi vanishes everywhere")
    hbar = state.params.hbar
    mask = support_mask(R, threshold)
    d1q, d2q, d1p, d2p = log_derivatives(chi, mask, method)

    g = chi.grid
    fields = {}
    for axis, d1, d2 in (("q", d1q, d2q), ("p", d1p, d2p)):
        grad_s = hbar * d1.imag
        dlog_r = d1.real
        fields[f"gradS_{axis}"] = grad_s
        fields[f"dlogR_{axis}"] = dlog_r
        fields[f"lapR_over_R_{axis}"] = np.where(mask, d2.real + (grad_s / hbar) ** 2, 0.0)
        fields[f"lapS_{axis}"] = np.where(mask, hbar * d2.imag - 2 * dlog_r * grad_s, 0.0)

    wrap = {k: RealField(g, v, k, edge=EDGE_EXCLUSION) for k, v in fields.items()}
    mask.setflags(write=False)
    return PolarData(
        R=RealField(g, R, "R"), support_mask=mask, hbar=hbar, edge_ratio=edge_ratio(R), **wrap
    )
