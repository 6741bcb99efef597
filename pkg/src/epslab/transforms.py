"""Wigner and Husimi quasi-distributions.

The Husimi function is obtained from the Wigner function in two independent
ways: by Gaussian convolution with the kernel

    (1/(pi*hbar)) * exp(-(Q - q')**2/f - f*(P - p')**2/hbar**2)

and by the exponential differential operator exp((f/4) d_q^2 + (hbar^2/4f) d_p^2)
expanded as a truncated power series.  Agreement of the two is one of the
package's cross-checks.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from math import ceil, sqrt
from typing import Optional

import numpy as np
import scipy.fft as sp_fft
from scipy.signal import czt

from .errors import InvalidInputError, NumericalConsistencyError, TruncationError
from .numerics import (
    PhaseSpaceGrid,
    RealField,
    gaussian_convolve,
    get_workers,
    integrate_1d,
    integrate_2d,
)
from .states import OscillatorParams, WavefunctionSpec

IMAG_DISCARD = 1e-10
IMAG_RAISE = 1e-8
DEFAULT_ORDER = 24
BAND_FLOOR = 1e-14
BANDLIMIT_TOL = 1e-8
Q_FUNCTION_RTOL = 1e-12


@dataclass(frozen=True)
class SmoothingParams:
    f: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.f > 0:
            raise InvalidInputError("smoothing parameter f must be positive")
        if not self.hbar > 0:
            raise InvalidInputError("hbar must be positive")

    @property
    def sigma_q(self) -> float:
        return sqrt(self.f / 2)

    @property
    def sigma_p(self) -> float:
        return self.hbar / sqrt(2 * self.f)


@dataclass(frozen=True, eq=False)
class QuasiDistribution:
    """A Wigner or Husimi function sampled on a grid.

    ``kind`` is ``"wigner"``, ``"husimi"`` or ``"q_function"`` (the Husimi
    function at f = hbar/(m*omega)).  ``discrepancy`` is filled in by the
    differential-operator path with its sup-norm distance from the
    convolution path, relative to the peak.
    """

    kind: str
    field: RealField
    source: Optional[WavefunctionSpec] = None
    t: float = 0.0
    params: Optional[OscillatorParams] = None
    f: Optional[float] = None
    discrepancy: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("wigner", "husimi", "q_function"):
            raise InvalidInputError(f"unknown distribution kind {self.kind!r}")

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def mass(self) -> float:
        return integrate_2d(self.field)

    @property
    def warnings(self) -> tuple:
        return self.field.warnings

    def negativity(self) -> float:
        """min(field) relative to max|field|; zero fields report 0."""
        top = self.field.max_abs()
        return float(np.min(self.values) / top) if top else 0.0

    def metadata(self) -> dict:
        meta = {"kind": self.kind, "t": self.t, "f": self.f, "mass": self.mass}
        if self.source is not None:
            meta["source"] = self.source.to_dict()
        if self.params is not None:
            meta["params"] = self.params.to_dict()
        if self.discrepancy is not None:
            meta["discrepancy"] = self.discrepancy
        if self.warnings:
            meta["warnings"] = list(self.warnings)
        return meta


def _psi_pairs(psi, grid: PhaseSpaceGrid, t: float):
    """Samples of psi(Q+y) and psi(Q-y) plus the y spacing and centre offset.

    Analytic inputs are evaluated on an auxiliary lattice of spacing dq/2 so
    both arguments land on sample points; arrays use spacing dq and are taken
    to vanish off the grid.
    """
    n = grid.n_q
    if isinstance(psi, WavefunctionSpec):
        spec = psi
        psi = lambda x: spec.psi(x, t)  # noqa: E731
    j = np.arange(n)[:, None]
    if callable(psi):
        hy = grid.dq / 2
        width = grid.q_max - grid.q_min
        aux = grid.q_min - width / 2 + np.arange(4 * n - 1) * hy
        vals = np.asarray(psi(aux), dtype=np.complex128)
        k = np.arange(2 * n + 1)[None, :]
        return vals[2 * j + k], vals[2 * j + 2 * n - k], hy, n
    vals = np.asarray(psi, dtype=np.complex128)
    if vals.shape != (n,):
        raise InvalidInputError(f"psi must have {n} samples, got shape {vals.shape}")
    pad = np.zeros(3 * n, dtype=np.complex128)
    pad[n : 2 * n] = vals
    k = np.arange(-n, n + 1)[None, :]
    return pad[n + j + k], pad[n + j - k], grid.dq, n


def wigner_from_psi(psi, grid: PhaseSpaceGrid, params: OscillatorParams, t: float = 0.0, source=None):
    """P_w(P, Q) = (1/(pi hbar)) * integral conj(psi(Q+y)) psi(Q-y) exp(2iPy/hbar) dy.

    ``psi`` may be a WavefunctionSpec (evaluated at time ``t``), a callable,
    or an array of samples on ``grid.q``.  The y-integral for all P at once
    is a chirp-z transform per Q row.
    """
    if isinstance(psi, WavefunctionSpec) and source is None:
        source = psi
    hbar = params.hbar
    plus, minus, hy, centre = _psi_pairs(psi, grid, t)
    g = np.conj(plus) * minus
    p = grid.p
    a = np.exp(-2j * grid.p_min * hy / hbar)
    w = np.exp(2j * grid.dp * hy / hbar)
    # z_i^(-n) = exp(2i p_i n hy / hbar); the shift by `centre` puts y = 0 at n = centre
    spec = czt(g, m=grid.n_p, w=w, a=a, axis=1).T
    vals = spec * np.exp(-2j * p * centre * hy / hbar)[:, None] * (hy / (np.pi * hbar))

    top = np.max(np.abs(vals))
    resid = np.max(np.abs(vals.imag)) / top if top else 0.0
    warnings = ()
    if resid > IMAG_RAISE:
        raise NumericalConsistencyError(f"Wigner function has imaginary residue {resid:.3e}")
    if resid > IMAG_DISCARD:
        warnings = (f"imaginary-residue {resid:.2e}",)
    label = f"wigner[{source.describe() if source else 'psi'}, t={t:g}]"
    field = RealField(grid, vals.real, label, warnings=warnings)
    return QuasiDistribution("wigner", field, source, t, params)


def _is_q_function(f: float, params: Optional[OscillatorParams]) -> bool:
    if params is None or params.omega == 0:
        return False
    return abs(f - params.q_function_f) <= Q_FUNCTION_RTOL * params.q_function_f


def _resolve_f(f, params):
    if f is None:
        if params is None:
            raise InvalidInputError("f is required when the distribution carries no parameters")
        return params.f
    if isinstance(f, str):
        if params is None:
            raise InvalidInputError("'q-function' needs oscillator parameters")
        return params.with_f(f).f
    return float(f)


def husimi_from_wigner(pw: QuasiDistribution, f=None) -> QuasiDistribution:
    """Smooth a Wigner function with the minimum-uncertainty kernel of parameter ``f``."""
    if pw.kind != "wigner":
        raise InvalidInputError("husimi_from_wigner expects a Wigner distribution")
    f = _resolve_f(f, pw.params)
    hbar = pw.params.hbar if pw.params else 1.0
    sp = SmoothingParams(f, hbar)
    field = gaussian_convolve(pw.field, sp.sigma_q, sp.sigma_p)
    kind = "q_function" if _is_q_function(f, pw.params) else "husimi"
    field = field.replace(label=f"{kind}[f={f:g}]({pw.field.label})")
    return QuasiDistribution(kind, field, pw.source, pw.t, pw.params, f)


def _symbol(grid: PhaseSpaceGrid, f: float, hbar: float) -> np.ndarray:
    kq = 2 * np.pi * sp_fft.fftfreq(grid.n_q, d=grid.dq)
    kp = 2 * np.pi * sp_fft.fftfreq(grid.n_p, d=grid.dp)
    return -(f / 4) * kq[None, :] ** 2 - (hbar**2 / (4 * f)) * kp[:, None] ** 2


def _check_bandlimit(F: np.ndarray, grid: PhaseSpaceGrid):
    top = np.max(np.abs(F))
    if top == 0:
        return
    fq = np.abs(sp_fft.fftfreq(grid.n_q))[None, :]
    fp = np.abs(sp_fft.fftfreq(grid.n_p))[:, None]
    tail = (fq > 1 / 3) | (fp > 1 / 3)  # beyond 2/3 of Nyquist
    worst = np.max(np.abs(F[tail])) / top
    if worst >= BANDLIMIT_TOL:
        raise InvalidInputError(
            f"field is not bandlimited: spectral tail {worst:.2e} of peak (need < {BANDLIMIT_TOL:g})"
        )


def _series(F, d, order):
    """sum_{j<=order} d^j F / j!, with the L2 norm of every term."""
    term = F
    total = F.copy()
    norms = [float(np.linalg.norm(F))]
    for j in range(1, order + 1):
        term = term * d / j
        total += term
        norms.append(float(np.linalg.norm(term)))
    return total, norms


def _diverging(norms) -> bool:
    tail = [x for x in norms[-4:] if x > 0]
    return len(tail) == 4 and all(b >= a for a, b in zip(tail, tail[1:]))


def husimi_via_diffop(
    pw: QuasiDistribution, f=None, order: int = DEFAULT_ORDER, substeps="auto", compare: bool = True
) -> QuasiDistribution:
    """Husimi function from the truncated series of exp((f/4) d_q^2 + (hbar^2/4f) d_p^2).

    Derivatives are spectral, so every power of the operator is a Fourier
    multiplier.  The input must be bandlimited (spectral content beyond 2/3 of
    Nyquist below 1e-8 of the peak); modes below 1e-14 of the peak are dropped
    before the series is applied.

    The exponential of an unbounded operator has a finite convergence radius
    on sampled data, so by default the flow is split into ``M`` substeps with
    ``|d|/M <= 1`` on the retained band and the ``order``-term series applied
    ``M`` times.  ``substeps=1`` applies the literal single series; a series
    whose last three term norms are non-decreasing raises TruncationError.
    """
    if pw.kind != "wigner":
        raise InvalidInputError("husimi_via_diffop expects a Wigner distribution")
    if int(order) != order or order < 0:
        raise InvalidInputError("truncation order must be a non-negative integer")
    f = _resolve_f(f, pw.params)
    hbar = pw.params.hbar if pw.params else 1.0
    SmoothingParams(f, hbar)
    kind = "q_function" if _is_q_function(f, pw.params) else "husimi"
    grid = pw.grid

    if order == 0:
        field = pw.field.replace(label=f"{kind}[diffop N=0]({pw.field.label})")
        return QuasiDistribution(kind, field, pw.source, pw.t, pw.params, f, discrepancy=None)

    F = sp_fft.fft2(pw.values, workers=get_workers())
    _check_bandlimit(F, grid)
    top = np.max(np.abs(F))
    if top:
        F = np.where(np.abs(F) > BAND_FLOOR * top, F, 0.0)
    d = _symbol(grid, f, hbar)
    band = np.abs(F) > 0
    reach = float(np.max(np.abs(d[band]))) if np.any(band) else 0.0
    if substeps == "auto":
        m = max(1, ceil(reach))
    else:
        m = int(substeps)
        if m < 1:
            raise InvalidInputError("substeps must be >= 1")

    out = F
    diagnostics = {"order": order, "substeps": m, "band_reach": reach}
    for step in range(m):
        out, norms = _series(out, d / m, order)
        if step == 0:
            diagnostics["term_norms"] = norms
        if _diverging(norms):
            partial = np.real(sp_fft.ifft2(out, workers=get_workers()))
            raise TruncationError(
                f"operator series diverges at order {order} (term norms non-decreasing)",
                partial=partial,
                diagnostics=diagnostics,
            )
    vals = np.real(sp_fft.ifft2(out, workers=get_workers()))
    label = f"{kind}[f={f:g}, diffop N={order}]({pw.field.label})"
    field = RealField(grid, vals, label, warnings=pw.field.warnings)
    disc = None
    if compare:
        ref = husimi_from_wigner(pw, f).values
        peak = np.max(np.abs(ref))
        disc = float(np.max(np.abs(vals - ref)) / peak) if peak else float(np.max(np.abs(vals)))
    return QuasiDistribution(kind, field, pw.source, pw.t, pw.params, f, discrepancy=disc)


def marginals(qd) -> tuple[np.ndarray, np.ndarray]:
    """``(q-marginal, p-marginal)``: integrate out p and q respectively."""
    field = qd.field if isinstance(qd, QuasiDistribution) else qd
    g = field.grid
    vals = field.values
    return integrate_1d(vals.T, g.dp), integrate_1d(vals, g.dq)


def smoothed(qd: QuasiDistribution, sigma_q: float, sigma_p: float) -> QuasiDistribution:
    """Gaussian-smooth any distribution with explicit kernel widths."""
    field = gaussian_convolve(qd.field, sigma_q, sigma_p)
    return dataclasses.replace(qd, field=field, kind="husimi" if qd.kind == "wigner" else qd.kind)


def husimi_distribution(spec: WavefunctionSpec, grid: PhaseSpaceGrid, f=None, t: float = 0.0, path="convolution"):
    """Wigner then Husimi for an analytic state; ``path`` is ``convolution`` or ``diffop``."""
    pw = wigner_from_psi(spec, grid, spec.params, t)
    if path == "convolution":
        return husimi_from_wigner(pw, f)
    if path == "diffop":
        return husimi_via_diffop(pw, f)
    raise InvalidInputError(f"unknown transform path {path!r}")


__all__ = [
    "SmoothingParams",
    "QuasiDistribution",
    "wigner_from_psi",
    "husimi_from_wigner",
    "husimi_via_diffop",
    "husimi_distribution",
    "marginals",
    "smoothed",
]
