"""Text form of operator expressions.

Grammar (``^`` and ``**`` both mean power)::

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := ("+" | "-") factor | atom ("^" int)?
    atom    := integer | name | "(" expr ")"
    name    := q | p | pi_q | pi_p          (eps representation)
             | Q | P | pi_Q | pi_P          (wigner representation)
             | i | I | hbar | m | f | k | omega

Division is allowed only by a single scalar monomial such as ``2*m*f``.
Floats are rejected.

Printing is canonical: operator monomials are ordered by descending pi_q,
pi_p, p, q powers, and coefficient monomials by descending parameter
exponents (hbar first).  A coefficient with several monomials is printed in
parentheses in front of its operator, e.g.
``(i*hbar/(2*m*f) - i*f*k/(2*hbar))*pi_Q*pi_P``.
"""

from __future__ import annotations

import ast
from fractions import Fraction

from ..errors import InvalidInputError, UnsupportedError
from .expression import REPRESENTATIONS, SYMBOLS, OperatorExpression
from .scalars import GaussianRational

# ------------------------------------------------------------------ printing


def _power(name: str, e: int) -> str:
    return name if e == 1 else f"{name}^{e}"


def _signed_parts(c: GaussianRational):
    """Split a coefficient into (sign, magnitude, imaginary?) real monomial pieces."""
    parts = []
    if c.re:
        parts.append((c.re < 0, abs(c.re), False))
    if c.im:
        parts.append((c.im < 0, abs(c.im), True))
    return parts


def _monomial_text(mag: Fraction, imag: bool, exps) -> str:
    num = [str(mag.numerator)] if mag.numerator != 1 else []
    if imag:
        num.append("i")
    den = [str(mag.denominator)] if mag.denominator != 1 else []
    for name, e in zip(SYMBOLS, exps):
        if e > 0:
            num.append(_power(name, e))
        elif e < 0:
            den.append(_power(name, -e))
    top = "*".join(num) if num else "1"
    if not den:
        return top
    bottom = den[0] if len(den) == 1 else "(" + "*".join(den) + ")"
    return f"{top}/{bottom}"


def _operator_text(powers, names) -> str:
    return "*".join(_power(n, e) for n, e in zip(names, powers) if e)


def _join(pieces) -> str:
    """Join (negative?, text) pieces with explicit signs."""
    out = ""
    for k, (neg, text) in enumerate(pieces):
        if k == 0:
            out = ("-" if neg else "") + text
        else:
            out += (" - " if neg else " + ") + text
    return out


def _group_sort_key(powers):
    a, b, c, d = powers
    return (-c, -d, -b, -a)


def to_text(expr: OperatorExpression) -> str:
    """Canonical text of ``expr``; ``parse(to_text(e)) == e`` for every expression."""
    if expr.is_zero():
        return "0"
    names = REPRESENTATIONS[expr.rep]
    groups = expr.operator_groups()
    pieces = []
    for powers in sorted(groups, key=_group_sort_key):
        coeffs = groups[powers]
        mono = []
        for exps in sorted(coeffs, reverse=True):
            for neg, mag, imag in _signed_parts(coeffs[exps]):
                mono.append((neg, _monomial_text(mag, imag, exps)))
        op = _operator_text(powers, names)
        if not op:
            pieces.extend(mono)
        elif len(mono) == 1:
            neg, text = mono[0]
            if text == "1":
                pieces.append((neg, op))
            elif "/" in text:
                pieces.append((neg, f"({text})*{op}"))
            else:
                pieces.append((neg, f"{text}*{op}"))
        else:
            pieces.append((False, f"({_join(mono)})*{op}"))
    return _join(pieces)


# ------------------------------------------------------------------- parsing

_ALL_GENERATORS = {n: rep for rep, names in REPRESENTATIONS.items() for n in names}


def _detect_rep(tree) -> str:
    reps = {_ALL_GENERATORS[n.id] for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id in _ALL_GENERATORS}
    if len(reps) > 1:
        raise InvalidInputError("expression mixes eps (q, p, ...) and wigner (Q, P, ...) generators")
    return reps.pop() if reps else "eps"


class _Builder:
    def __init__(self, rep):
        self.rep = rep

    def build(self, node) -> OperatorExpression:
        method = getattr(self, "_" + type(node).__name__, None)
        if method is None:
            raise UnsupportedError(f"unsupported syntax: {type(node).__name__}")
        return method(node)

    def _Expression(self, node):
        return self.build(node.body)

    def _Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, int):
            raise UnsupportedError(f"only integer literals are allowed, got {node.value!r}")
        return OperatorExpression.scalar(node.value, self.rep)

    def _Name(self, node):
        name = node.id
        if name in ("i", "I"):
            return OperatorExpression.scalar(GaussianRational(0, 1), self.rep)
        if name in SYMBOLS:
            return OperatorExpression.scalar(1, self.rep, **{name: 1})
        if name in REPRESENTATIONS[self.rep]:
            return OperatorExpression.generator(name, self.rep)
        raise InvalidInputError(f"unknown name {name!r}")

    def _UnaryOp(self, node):
        val = self.build(node.operand)
        if isinstance(node.op, ast.USub):
            return -val
        if isinstance(node.op, ast.UAdd):
            return val
        raise UnsupportedError("unsupported unary operator")

    def _BinOp(self, node):
        op = node.op
        if isinstance(op, ast.Pow):
            return self._power(node)
        left, right = self.build(node.left), self.build(node.right)
        if isinstance(op, ast.Add):
            return left + right
        if isinstance(op, ast.Sub):
            return left - right
        if isinstance(op, ast.Mult):
            return left * right
        if isinstance(op, ast.Div):
            return left * invert_scalar(right)
        raise UnsupportedError(f"unsupported operator {type(op).__name__}")

    def _power(self, node):
        exp_node = node.right
        sign = 1
        if isinstance(exp_node, ast.UnaryOp) and isinstance(exp_node.op, ast.USub):
            sign, exp_node = -1, exp_node.operand
        if not (isinstance(exp_node, ast.Constant) and type(exp_node.value) is int):
            raise UnsupportedError("exponents must be integer literals")
        n = sign * exp_node.value
        base = self.build(node.left)
        if n >= 0:
            return base**n
        return invert_scalar(base) ** (-n)


def invert_scalar(x: OperatorExpression) -> OperatorExpression:
    """Inverse of a single scalar monomial ``c * hbar^e0 ...``."""
    items = list(x.items())
    if len(items) != 1 or items[0][0][0] != (0, 0, 0, 0):
        raise UnsupportedError("division is only defined by a single scalar monomial")
    (_, exps), c = items[0]
    return OperatorExpression.monomial(
        (0, 0, 0, 0), GaussianRational(1) / c, x.rep, **{s: -e for s, e in zip(SYMBOLS, exps)}
    )


def parse(text: str, rep: str | None = None) -> OperatorExpression:
    """Parse the text grammar into a canonical OperatorExpression."""
    if not isinstance(text, str) or not text.strip():
        raise InvalidInputError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InvalidInputError(f"cannot parse expression {text!r}: {exc.msg}") from None
    found = _detect_rep(tree)
    if rep is None:
        rep = found
    elif found != rep and any(isinstance(n, ast.Name) and n.id in _ALL_GENERATORS for n in ast.walk(tree)):
        raise InvalidInputError(f"expression uses {found} generators, expected {rep}")
    return _Builder(rep).build(tree)
