"""Grid, quadrature, differentiation and convolution primitives.

Every numerical module works on a uniform (p, q) lattice.  Arrays are stored
with shape ``(n_p, n_q)``: rows are momentum samples, columns are position
samples, so ``values[i, j]`` is the sample at ``(p_i, q_j)``.

The lattice is half-open, ``q_j = q_min + j*dq`` with ``dq = (q_max - q_min)/n_q``,
which makes the plain sample sum the trapezoidal rule for periodic or
edge-decayed integrands and makes the FFT frequencies line up with the grid.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.fft as sp_fft

from .errors import InvalidInputError, UnsupportedOrderError

EDGE_EXCLUSION = 3
DECAY_THRESHOLD = 1e-12
AXES = {"q": 1, "p": 0}


def get_workers() -> int:
    """Thread count for FFTs, capped by the ``EPS_THREADS`` environment variable."""
    raw = os.environ.get("EPS_THREADS")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, min(n, os.cpu_count() or 1))


@dataclass(frozen=True)
class PhaseSpaceGrid:
    q_min: float = -8.0
    q_max: float = 8.0
    n_q: int = 256
    p_min: float = -8.0
    p_max: float = 8.0
    n_p: int = 256

    def __post_init__(self):
        for name in ("n_q", "n_p"):
            n = getattr(self, name)
            if int(n) != n or n < 8:
                raise InvalidInputError(f"{name} must be an integer >= 8, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("q_min", "q_max", "p_min", "p_max"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise InvalidInputError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not self.q_max > self.q_min or not self.p_max > self.p_min:
            raise InvalidInputError("grid extents must satisfy min < max")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_p, self.n_q)

    @property
    def q(self) -> np.ndarray:
        return self.q_min + np.arange(self.n_q) * self.dq

    @property
    def p(self) -> np.ndarray:
        return self.p_min + np.arange(self.n_p) * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(P, Q)`` coordinate arrays of shape ``(n_p, n_q)``."""
        return np.meshgrid(self.p, self.q, indexing="ij")

    def index_of(self, q: float, p: float) -> tuple[int, int]:
        """Array index ``(i_p, j_q)`` of the sample nearest to ``(q, p)``."""
        j = int(round((q - self.q_min) / self.dq))
        i = int(round((p - self.p_min) / self.dp))
        if not (0 <= j < self.n_q and 0 <= i < self.n_p):
            raise InvalidInputError(f"point ({q}, {p}) lies outside the grid")
        return i, j

    def refined(self, factor: int = 2) -> "PhaseSpaceGrid":
        """Same extent with the spacing divided by ``factor``."""
        return dataclasses.replace(self, n_q=self.n_q * factor, n_p=self.n_p * factor)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseSpaceGrid":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class _Field:
    grid: PhaseSpaceGrid
    values: np.ndarray
    label: str = ""
    edge: int = 0
    warnings: tuple = field(default=())

    _dtype = np.float64

    def __post_init__(self):
        vals = np.array(self.values, dtype=self._dtype)
        if vals.size == 0:
            raise InvalidInputError("field has no samples")
        if vals.shape != self.grid.shape:
            raise InvalidInputError(
                f"field values have shape {vals.shape}, grid expects {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError(f"field {self.label!r} contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def interior_mask(self) -> np.ndarray:
        """Boolean mask that is False inside the edge-exclusion zone."""
        mask = np.ones(self.grid.shape, dtype=bool)
        e = self.edge
        if e:
            mask[:e, :] = mask[-e:, :] = False
            mask[:, :e] = mask[:, -e:] = False
        return mask

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at(self, q: float, p: float):
        i, j = self.grid.index_of(q, p)
        return self.values[i, j]


class RealField(_Field):
    _dtype = np.float64


class ComplexField(_Field):
    _dtype = np.complex128

    @property
    def real(self) -> RealField:
        return RealField(self.grid, self.values.real, self.label + ".re", self.edge, self.warnings)

    @property
    def imag(self) -> RealField:
        return RealField(self.grid, self.values.imag, self.label + ".im", self.edge, self.warnings)


def make_field(grid, values, label="", **kw):
    """Wrap ``values`` in a RealField or ComplexField depending on dtype."""
    values = np.asarray(values)
    cls = ComplexField if np.iscomplexobj(values) else RealField
    return cls(grid, values, label, **kw)


# ---------------------------------------------------------------- quadrature


def integrate_1d(values, spacing: float):
    """Trapezoidal rule on a half-open uniform grid (sample sum times spacing)."""
    values = np.asarray(values)
    if values.size == 0:
        raise InvalidInputError("cannot integrate an empty array")
    return np.sum(values, axis=-1) * spacing


def integrate_2d(f):
    """Trapezoidal approximation of the double integral over the grid.

    Accepts a RealField (returns float) or ComplexField (returns complex).
    """
    values = f.values
    if values.size == 0:
        raise InvalidInputError("cannot integrate an empty field")
    # row sums first, then the column of row sums: fixed reduction order
    total = np.sum(np.sum(values, axis=1)) * f.grid.dq * f.grid.dp
    return complex(total) if np.iscomplexobj(values) else float(total)


# ---------------------------------------------------------- differentiation


def _solve_exact(a, b):
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col] != 0)
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col and m[r][col] != 0:
                ratio = m[r][col] / m[col][col]
                m[r] = [x - ratio * y for x, y in zip(m[r], m[col])]
    return [m[i][n] / m[i][i] for i in range(n)]


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> tuple:
    """Exact finite-difference weights for ``d^order/dx^order`` on integer offsets."""
    a = [[Fraction(o) ** i for o in offsets] for i in range(len(offsets))]
    b = [Fraction(factorial(order)) if i == order else Fraction(0) for i in range(len(offsets))]
    return tuple(_solve_exact(a, b))


# (row index from the boundary, offsets) for the one-sided 4th-order stencils
_EDGE_STENCILS = {
    1: ((0, (0, 1, 2, 3, 4)), (1, (-1, 0, 1, 2, 3))),
    2: ((0, (0, 1, 2, 3, 4, 5)), (1, (-1, 0, 1, 2, 3, 4))),
}
_CENTRAL = (-2, -1, 0, 1, 2)


def _fd_axis0(f: np.ndarray, order: int, h: float) -> np.ndarray:
    n = f.shape[0]
    out = np.zeros_like(f)
    w = [float(x) for x in fd_weights(_CENTRAL, order)]
    for wj, off in zip(w, _CENTRAL):
        out[2:-2] += wj * f[2 + off : n - 2 + off]
    for row, offsets in _EDGE_STENCILS[order]:
        wts = [float(x) for x in fd_weights(offsets, order)]
        out[row] = sum(wj * f[row + off] for wj, off in zip(wts, offsets))
        # mirrored stencil at the far edge; odd derivatives flip sign
        sign = -1.0 if order % 2 else 1.0
        out[n - 1 - row] = sign * sum(wj * f[n - 1 - row - off] for wj, off in zip(wts, offsets))
    return out / h**order


def _spectral_axis(f: np.ndarray, order: int, h: float, axis: int) -> np.ndarray:
    n = f.shape[axis]
    k = 2 * np.pi * sp_fft.fftfreq(n, d=h)
    mult = (1j * k) ** order
    if order % 2 and n % 2 == 0:
        mult[n // 2] = 0.0  # Nyquist mode has no odd derivative
    shape = [1] * f.ndim
    shape[axis] = n
    F = sp_fft.fft(f, axis=axis, workers=get_workers())
    out = sp_fft.ifft(F * mult.reshape(shape), axis=axis, workers=get_workers())
    return out.real if not np.iscomplexobj(f) else out


def derivative_array(values: np.ndarray, axis: int, order: int, h: float, method: str = "fd"):
    """Derivative of a raw array along ``axis``; see :func:`partial_derivative`."""
    if order not in (1, 2):
        raise InvalidInputError(f"derivative order must be 1 or 2, got {order!r}")
    values = np.asarray(values)
    if values.shape[axis] < 8:
        raise InvalidInputError("need at least 8 samples along the derivative axis")
    if method == "fd":
        moved = np.moveaxis(values, axis, 0)
        return np.moveaxis(_fd_axis0(moved, order, h), 0, axis)
    if method == "spectral":
        return _spectral_axis(values, order, h, axis)
    raise InvalidInputError(f"unknown differentiation method {method!r}")


def partial_derivative(f, axis: str, order: int = 1, method: str = "fd"):
    """Partial derivative of a field along ``"q"`` or ``"p"``.

    The default ``"fd"`` method uses 4th-order central differences inside and
    one-sided stencils of the same order on the two outermost samples.
    ``"spectral"`` multiplies by ``(ik)^order`` in Fourier space and is only
    meaningful for periodic or edge-decayed fields.  Either way the output
    carries an edge-exclusion zone of three samples.
    """
    if axis not in AXES:
        raise InvalidInputError(f"axis must be 'q' or 'p', got {axis!r}")
    h = f.grid.dq if axis == "q" else f.grid.dp
    vals = derivative_array(f.values, AXES[axis], order, h, method)
    d = "d" if order == 1 else "d2"
    return f.replace(
        values=vals,
        label=f"{d}/{axis}{'' if order == 1 else '2'}({f.label})",
        edge=max(f.edge, EDGE_EXCLUSION),
    )


def derivative(values, grid: PhaseSpaceGrid, nq: int, np_: int, method: str = "fd"):
    """Mixed partial ``d^nq/dq^nq d^np/dp^np`` of a raw ``(n_p, n_q)`` array.

    Orders above two are built by repeated application.
    """
    out = np.asarray(values)
    for axis, n, h in ((1, nq, grid.dq), (0, np_, grid.dp)):
        while n > 0:
            step = 2 if n >= 2 else 1
            out = derivative_array(out, axis, step, h, method)
            n -= step
    return out


def apply_stencil(terms, f, method: str = "fd"):
    """Apply ``sum c * q^a p^b d_q^c d_p^d`` to a field.

    ``terms`` is an iterable of ``(coefficient, a, b, c, d)`` with numeric
    coefficients, e.g. from ``PDEStencil.numeric``.
    """
    P, Q = f.grid.mesh()
    out = np.zeros(f.grid.shape, dtype=np.complex128)
    cache = {}
    for coeff, a, b, c, d in terms:
        if (c, d) not in cache:
            cache[(c, d)] = derivative(f.values, f.grid, c, d, method) if (c or d) else f.values
        out = out + coeff * Q**a * P**b * cache[(c, d)]
    return ComplexField(
        f.grid, out, f"stencil({f.label})", edge=max(f.edge, EDGE_EXCLUSION), warnings=f.warnings
    )


# --------------------------------------------------------------- convolution


def gaussian_weights(n: int, h: float, sigma: float) -> np.ndarray:
    """Sampled Gaussian on offsets ``-(n-1)..(n-1)`` normalized to unit sum."""
    off = np.arange(-(n - 1), n) * h
    w = np.exp(-0.5 * (off / sigma) ** 2)
    return w / np.sum(w)


def _convolve_axis(values: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    n = values.shape[axis]
    length = sp_fft.next_fast_len(n + len(weights) - 1, real=True)
    workers = get_workers()
    F = sp_fft.rfft(values, length, axis=axis, workers=workers)
    K = sp_fft.rfft(weights, length)
    shape = [1] * values.ndim
    shape[axis] = K.size
    full = sp_fft.irfft(F * K.reshape(shape), length, axis=axis, workers=workers)
    return np.take(full, np.arange(n - 1, 2 * n - 1), axis=axis)


def edge_ratio(values: np.ndarray) -> float:
    """Largest magnitude on the outer ring of samples relative to the overall maximum."""
    top = np.max(np.abs(values))
    if top == 0:
        return 0.0
    ring = max(
        np.max(np.abs(values[0])),
        np.max(np.abs(values[-1])),
        np.max(np.abs(values[:, 0])),
        np.max(np.abs(values[:, -1])),
    )
    return float(ring / top)


def edge_decayed(values: np.ndarray, threshold: float = DECAY_THRESHOLD) -> bool:
    return edge_ratio(values) < threshold


def gaussian_convolve(f: RealField, sigma_q: float, sigma_p: float) -> RealField:
    """Convolve with a unit-mass separable Gaussian of widths ``sigma_q``, ``sigma_p``.

    Zero padding is used on both axes (linear, not circular, convolution), so
    the result is exact for fields that vanish outside the grid.  If the input
    has not decayed to ``1e-12`` of its peak on the boundary ring, the output
    carries an ``"edge-not-decayed"`` warning.
    """
    if not (sigma_q > 0 and sigma_p > 0):
        raise InvalidInputError("kernel widths must be positive")
    g = f.grid
    vals = np.asarray(f.values, dtype=np.float64)
    out = _convolve_axis(vals, gaussian_weights(g.n_q, g.dq, sigma_q), axis=1)
    out = _convolve_axis(out, gaussian_weights(g.n_p, g.dp, sigma_p), axis=0)
    warnings = tuple(f.warnings)
    if not edge_decayed(vals):
        warnings += ("edge-not-decayed",)
    return RealField(g, out, f"gauss({f.label})", edge=f.edge, warnings=warnings)


# ------------------------------------------------------------------- Fourier


def momentum_transform(psi, q: np.ndarray, p: np.ndarray, hbar: float) -> np.ndarray:
    """phi(p) = (2 pi hbar)^(-1/2) * integral psi(q) exp(-i p q / hbar) dq.

    Evaluated by direct quadrature onto an arbitrary uniform ``p`` grid; works
    on the last axis, so a stack of wavefunctions can be transformed at once.
    """
    q = np.asarray(q)
    dq = q[1] - q[0]
    kernel = np.exp(-1j * np.outer(q, p) / hbar) * (dq / np.sqrt(2 * np.pi * hbar))
    return np.asarray(psi) @ kernel


def position_transform(phi, p: np.ndarray, q: np.ndarray, hbar: float) -> np.ndarray:
    """Inverse of :func:`momentum_transform`."""
    p = np.asarray(p)
    dp = p[1] - p[0]
    kernel = np.exp(1j * np.outer(p, q) / hbar) * (dp / np.sqrt(2 * np.pi * hbar))
    return np.asarray(phi) @ kernel


def check_order(order: int, allowed=(1, 2)):
    if order not in allowed:
        raise UnsupportedOrderError(f"order {order} not in {allowed}")
