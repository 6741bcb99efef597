"""Derivations built on the operator algebra.

Covers the extended Hamiltonian of a polynomial H(p, q), linear extended
canonical transformations, terminating Baker-Campbell-Hausdorff similarity
transforms, parameter specialization and conversion to differential stencils.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Mapping

from ..errors import InvalidInputError, TruncationError, UnboundSymbolError, UnsupportedError
from .expression import REPRESENTATIONS, SYMBOLS, OperatorExpression, commutator, multiply
from .grammar import parse
from .scalars import GaussianRational

MAX_HAMILTONIAN_DEGREE = 8


def _as_expr(x, rep="eps") -> OperatorExpression:
    if isinstance(x, OperatorExpression):
        return x
    if isinstance(x, str):
        return parse(x, rep)
    if isinstance(x, (int, Fraction, GaussianRational)) and not isinstance(x, bool):
        return OperatorExpression.scalar(x, rep)
    raise InvalidInputError(f"expected an expression, text or exact number, got {type(x).__name__}")


def _gens(rep):
    return tuple(OperatorExpression.generator(n, rep) for n in REPRESENTATIONS[rep])


def _check_classical(h: OperatorExpression):
    for (powers, _), _c in h.items():
        if powers[2] or powers[3]:
            raise UnsupportedError("H must be a polynomial in p and q only")
    if h.degree() > MAX_HAMILTONIAN_DEGREE:
        raise UnsupportedError(f"H has degree {h.degree()} > {MAX_HAMILTONIAN_DEGREE}")


def _monomial(powers, exps, c, rep) -> OperatorExpression:
    return OperatorExpression({(powers, exps): c}, rep)


def extended_hamiltonian_substitution(h) -> OperatorExpression:
    """H(p + pi_q, q) - H(p, q + pi_p) by operator substitution.

    Each monomial q^a p^b is written with the substituted variable on the
    right, q^a (p + pi_q)^b and p^b (q + pi_p)^a, which places the momenta
    pi to the right of their coefficient functions.
    """
    h = _as_expr(h)
    _check_classical(h)
    rep = h.rep
    q, p, pi_q, pi_p = _gens(rep)
    out = OperatorExpression({}, rep)
    for ((a, b, _, _), exps), c in h.items():
        coeff = _monomial((0, 0, 0, 0), exps, c, rep)
        shifted_p = multiply(q**a, (p + pi_q) ** b)
        shifted_q = multiply(p**b, (q + pi_p) ** a)
        out = out + coeff * (shifted_p - shifted_q)
    return out


def _d(h: OperatorExpression, index: int) -> OperatorExpression:
    """Partial derivative of a classical polynomial along generator ``index`` (0=q, 1=p)."""
    out = {}
    for (powers, exps), c in h.items():
        n = powers[index]
        if n:
            new = list(powers)
            new[index] -= 1
            out[(tuple(new), exps)] = c * n
    return OperatorExpression(out, h.rep)


def extended_hamiltonian_series(h) -> OperatorExpression:
    """sum_n (1/n!) [d_p^n H pi_q^n - d_q^n H pi_p^n], the derivative-series form."""
    h = _as_expr(h)
    _check_classical(h)
    rep = h.rep
    _, _, pi_q, pi_p = _gens(rep)
    out = OperatorExpression({}, rep)
    dp, dq = h, h
    for n in range(1, h.degree() + 1):
        dp, dq = _d(dp, 1), _d(dq, 0)
        w = GaussianRational(1) / factorial(n)
        out = out + w * (multiply(dp, pi_q**n) - multiply(dq, pi_p**n))
    return out


def extended_hamiltonian(h, check: bool = True) -> OperatorExpression:
    """Extended Hamiltonian of a polynomial H(p, q) of degree at most 8.

    Built by substitution; with ``check`` the derivative-series construction
    is computed too and must agree exactly.
    """
    sub = extended_hamiltonian_substitution(h)
    if check:
        ser = extended_hamiltonian_series(h)
        if sub != ser:
            raise AssertionError(f"builder paths disagree: {sub} vs {ser}")
    return sub


# ------------------------------------------------------- linear transformations


def _is_linear(expr: OperatorExpression) -> bool:
    return all(sum(powers) == 1 for (powers, _), _c in expr.items())


def apply_linear_transformation(expr, mapping: Mapping) -> OperatorExpression:
    """Substitute each generator by its image and re-normal-order.

    ``mapping`` maps generator names (or positions 0..3) to expressions that
    are linear combinations of generators; unmapped generators stay fixed.
    """
    expr = _as_expr(expr)
    rep = expr.rep
    names = REPRESENTATIONS[rep]
    images = list(_gens(rep))
    for key, img in mapping.items():
        idx = names.index(key) if isinstance(key, str) else int(key)
        img = _as_expr(img, rep)
        if not _is_linear(img):
            raise UnsupportedError(f"image of {names[idx]} is not a linear combination of generators")
        images[idx] = img
    one = OperatorExpression.scalar(1, rep)
    out = OperatorExpression({}, rep)
    for ((a, b, c, d), exps), coeff in expr.items():
        term = _monomial((0, 0, 0, 0), exps, coeff, rep)
        for img, n in zip(images, (a, b, c, d)):
            term = multiply(term, img**n if n else one)
        out = out + term
    return out


def transformation_parameters(rep="eps"):
    """alpha = -f/(2 i hbar) = i f/(2 hbar) and beta = 1/2 as exact scalars."""
    alpha = parse("i*f/(2*hbar)", rep)
    beta = parse("1/2", rep)
    return alpha, beta


def husimi_transformation(alpha=None, beta=None, rep="eps") -> dict:
    """Generator images of the linear transformation with parameters alpha, beta.

    p -> p + alpha (hbar^2/f^2) pi_p + beta pi_q,  q -> q + alpha pi_q + beta pi_p,
    with pi_q and pi_p unchanged.  Defaults are the Husimi values.
    """
    a0, b0 = transformation_parameters(rep)
    alpha = a0 if alpha is None else _as_expr(alpha, rep)
    beta = b0 if beta is None else _as_expr(beta, rep)
    q, p, pi_q, pi_p = _gens(rep)
    names = REPRESENTATIONS[rep]
    scale = parse("hbar^2/f^2", rep)
    return {
        names[0]: q + alpha * pi_q + beta * pi_p,
        names[1]: p + alpha * scale * pi_p + beta * pi_q,
        names[2]: pi_q,
        names[3]: pi_p,
    }


def commutator_table(images: Mapping, rep="eps") -> dict:
    """All ten commutators [x, y] over unordered generator pairs (including x = y)."""
    names = REPRESENTATIONS[rep]
    table = {}
    for i, x in enumerate(names):
        for y in names[i:]:
            table[(x, y)] = commutator(_as_expr(images[x], rep), _as_expr(images[y], rep))
    return table


# ------------------------------------------------------------------- BCH


@dataclass(frozen=True)
class BCHResult:
    """Outcome of a BCH expansion; ``termination_order`` is the depth of the first zero commutator."""

    result: OperatorExpression
    termination_order: int
    nested: tuple

    def __str__(self):
        return str(self.result)


def bch_similarity(a, x, max_order: int = 12) -> BCHResult:
    """e^A X e^-A = X + [A,X] + [A,[A,X]]/2! + ... summed until a nested commutator is exactly zero."""
    if int(max_order) != max_order or max_order < 1:
        raise InvalidInputError("max_order must be a positive integer")
    a = _as_expr(a)
    x = _as_expr(x, a.rep)
    total = x
    current = x
    nested = []
    for depth in range(1, int(max_order) + 1):
        current = commutator(a, current)
        if current.is_zero():
            return BCHResult(total, depth, tuple(nested))
        nested.append(current)
        total = total + current * (GaussianRational(1) / factorial(depth))
    raise TruncationError(
        f"BCH series did not terminate within {max_order} nested commutators",
        partial=total,
        diagnostics={"max_order": max_order, "nested": [str(c) for c in nested]},
    )


def husimi_exponent(rep="wigner") -> OperatorExpression:
    """A = -(f/(4 hbar^2)) pi_Q^2 - (1/(4f)) pi_P^2, the exponent taking Wigner to Husimi."""
    n = REPRESENTATIONS[rep]
    return parse(f"-(f/(4*hbar^2))*{n[2]}^2 - (1/(4*f))*{n[3]}^2", rep)


def wigner_harmonic_hamiltonian(rep="wigner") -> OperatorExpression:
    """(P/m) pi_Q - k Q pi_P."""
    n = REPRESENTATIONS[rep]
    return parse(f"(1/m)*{n[1]}*{n[2]} - k*{n[0]}*{n[3]}", rep)


def generator_terms(rep="eps"):
    """G1 = (hbar^2/f^2)(1/2) pi_p^2 + (1/2) pi_q^2 and G2 = pi_p pi_q."""
    n = REPRESENTATIONS[rep]
    g1 = parse(f"(hbar^2/(2*f^2))*{n[3]}^2 + (1/2)*{n[2]}^2", rep)
    g2 = parse(f"{n[3]}*{n[2]}", rep)
    return g1, g2


def similarity_exponent(rep="eps", include_cross: bool = True) -> OperatorExpression:
    """i alpha G1/hbar + i beta G2/hbar at the Husimi parameters.

    Without the cross generator G2 this is the Wigner-representation exponent
    i alpha G'/hbar, equal to :func:`husimi_exponent`.
    """
    alpha, beta = transformation_parameters(rep)
    g1, g2 = generator_terms(rep)
    i_over_hbar = parse("i/hbar", rep)
    out = i_over_hbar * alpha * g1
    if include_cross:
        out = out + i_over_hbar * beta * g2
    return out


def husimi_hamiltonian(max_order: int = 12) -> BCHResult:
    """BCH transform of the harmonic Wigner Hamiltonian by :func:`husimi_exponent`."""
    return bch_similarity(husimi_exponent(), wigner_harmonic_hamiltonian(), max_order)


# ------------------------------------------------------ specialization


def q_function_bindings(rep="eps") -> dict:
    """f -> hbar/(m omega) and k -> m omega^2."""
    return {"f": parse("hbar/(m*omega)", rep), "k": parse("m*omega^2", rep)}


def _binding_power(value: OperatorExpression, e: int, cache) -> OperatorExpression:
    key = (id(value), e)
    if key not in cache:
        if e >= 0:
            cache[key] = value**e
        else:
            from .grammar import invert_scalar

            try:
                inv = invert_scalar(value)
            except UnsupportedError:
                raise UnsupportedError("negative powers need a monomial binding") from None
            cache[key] = inv ** (-e)
    return cache[key]


def specialize(expr, bindings: Mapping) -> OperatorExpression:
    """Substitute parameter symbols by exact scalars or scalar expressions.

    Values may be ints, Fractions, GaussianRationals, scalar expressions or
    text such as ``"hbar/(m*omega)"``; the token ``"q-function"`` for ``f``
    means hbar/(m*omega).
    """
    expr = _as_expr(expr)
    rep = expr.rep
    resolved = {}
    for name, value in bindings.items():
        if name not in SYMBOLS:
            raise InvalidInputError(f"unknown parameter symbol {name!r}")
        if name == "f" and value == "q-function":
            value = q_function_bindings(rep)["f"]
        if isinstance(value, str):
            value = parse(value, rep)
        elif not isinstance(value, OperatorExpression):
            value = OperatorExpression.scalar(GaussianRational.coerce(value), rep)
        if not value.is_scalar():
            raise UnsupportedError(f"binding for {name} must be a scalar")
        resolved[name] = value.relabel(rep)

    cache: dict = {}
    out = OperatorExpression({}, rep)
    for (powers, exps), c in expr.items():
        kept = []
        factor = OperatorExpression.scalar(c, rep)
        for name, e in zip(SYMBOLS, exps):
            if e and name in resolved:
                factor = factor * _binding_power(resolved[name], e, cache)
                kept.append(0)
            else:
                kept.append(e)
        out = out + factor * _monomial(powers, tuple(kept), 1, rep)
    return out


def evaluate_scalar(expr, values: Mapping) -> complex:
    """Numeric value of a scalar expression; every present symbol must be bound."""
    expr = _as_expr(expr)
    if not expr.is_scalar():
        raise InvalidInputError("only scalar expressions evaluate to numbers")
    total = 0j
    for (_, exps), c in expr.items():
        val = complex(c)
        for name, e in zip(SYMBOLS, exps):
            if e:
                if name not in values:
                    raise UnboundSymbolError(f"symbol {name!r} has no value")
                val *= float(values[name]) ** e
        total += val
    return total


def cross_term(expr) -> OperatorExpression:
    """Coefficient of pi_Q pi_P (or pi_q pi_p) in ``expr``."""
    return _as_expr(expr).coefficient_of((0, 0, 1, 1))


# --------------------------------------------------------------- stencils


@dataclass(frozen=True)
class StencilTerm:
    """coefficient(params) * x^a y^b d_x^c d_y^d with x = q (or Q), y = p (or P)."""

    coefficient: OperatorExpression
    powers: tuple

    def render(self, x: str = "x", y: str = "y") -> str:
        a, b, c, d = self.powers
        parts = [f"({self.coefficient})"]
        parts += [f"{n}^{e}" if e > 1 else n for n, e in ((x, a), (y, b)) if e]
        parts += [f"d_{n}^{e}" if e > 1 else f"d_{n}" for n, e in ((x, c), (y, d)) if e]
        return "*".join(parts)

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class PDEStencil:
    """Differential operator obtained from pi -> -i hbar d.

    Coefficients stay exact; :meth:`numeric` binds parameter values and yields
    ``(complex, a, b, c, d)`` tuples for :func:`epslab.numerics.apply_stencil`.
    """

    terms: tuple
    rep: str

    def numeric(self, values: Mapping) -> list:
        return [(evaluate_scalar(t.coefficient, values), *t.powers) for t in self.terms]

    def __str__(self):
        x, y = REPRESENTATIONS[self.rep][:2]
        return " + ".join(t.render(x, y) for t in self.terms) or "0"


def to_pde_stencil(expr) -> PDEStencil:
    """Replace pi_x by -i hbar d/dx in every normal-ordered term.

    Normal order already has all momenta on the right, so each monomial
    q^a p^b pi_q^c pi_p^d becomes (-i hbar)^(c+d) q^a p^b d_q^c d_p^d.
    """
    expr = _as_expr(expr)
    rep = expr.rep
    minus_i_hbar = parse("-i*hbar", rep)
    terms = []
    for powers, coeffs in sorted(expr.operator_groups().items()):
        coeff = OperatorExpression({((0, 0, 0, 0), e): c for e, c in coeffs.items()}, rep)
        coeff = coeff * minus_i_hbar ** (powers[2] + powers[3])
        terms.append(StencilTerm(coeff, powers))
    return PDEStencil(tuple(terms), rep)
