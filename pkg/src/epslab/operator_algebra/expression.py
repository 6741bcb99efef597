"""Normal-ordered elements of the extended-phase-space operator algebra.

Generators q, p, pi_q, pi_p obey [pi_q, q] = [pi_p, p] = -i*hbar with every
other pair commuting.  Each term is stored as

    coeff * hbar^e0 m^e1 f^e2 k^e3 omega^e4 * q^a p^b pi_q^c pi_p^d

keyed by ``((a, b, c, d), (e0, ..., e4))``.  Since products are reduced to
this single order as they are formed, two expressions are equal exactly when
their term dictionaries are equal.
"""

from __future__ import annotations

from math import comb, perm
from typing import Mapping

from ..errors import ExpressionBlowupError, InvalidInputError
from .scalars import ONE, GaussianRational

SYMBOLS = ("hbar", "m", "f", "k", "omega")
MAX_EXPONENT = 16
REPRESENTATIONS = {
    "eps": ("q", "p", "pi_q", "pi_p"),
    "wigner": ("Q", "P", "pi_Q", "pi_P"),
}
_NO_EXPS = (0,) * len(SYMBOLS)
_HBAR = tuple(1 if s == "hbar" else 0 for s in SYMBOLS)


def _add_exps(e1, e2):
    out = tuple(x + y for x, y in zip(e1, e2))
    if any(abs(x) > MAX_EXPONENT for x in out):
        raise ExpressionBlowupError(f"parameter exponent exceeds {MAX_EXPONENT}: {out}")
    return out


def _check_exps(exps):
    if len(exps) != len(SYMBOLS):
        raise InvalidInputError("exponent tuple has the wrong length")
    if any(abs(x) > MAX_EXPONENT for x in exps):
        raise ExpressionBlowupError(f"parameter exponent exceeds {MAX_EXPONENT}: {exps}")
    return tuple(int(x) for x in exps)


class OperatorExpression:
    """Immutable canonical operator expression; build with the helpers below."""

    __slots__ = ("_terms", "rep", "_hash")

    def __init__(self, terms: Mapping | None = None, rep: str = "eps"):
        if rep not in REPRESENTATIONS:
            raise InvalidInputError(f"unknown representation {rep!r}")
        clean = {}
        for (powers, exps), c in (terms or {}).items():
            c = GaussianRational.coerce(c)
            if c:
                if len(powers) != 4 or any(x < 0 for x in powers):
                    raise InvalidInputError(f"bad operator powers {powers!r}")
                clean[(tuple(powers), _check_exps(exps))] = c
        self._terms = clean
        self.rep = rep
        self._hash = None

    # -- construction ------------------------------------------------------

    @classmethod
    def scalar(cls, c=1, rep="eps", **exps) -> "OperatorExpression":
        unknown = set(exps) - set(SYMBOLS)
        if unknown:
            raise InvalidInputError(f"unknown parameter symbols {sorted(unknown)}")
        key = ((0, 0, 0, 0), tuple(exps.get(s, 0) for s in SYMBOLS))
        return cls({key: c}, rep)

    @classmethod
    def generator(cls, name: str, rep: str | None = None) -> "OperatorExpression":
        for r, names in REPRESENTATIONS.items():
            if name in names and (rep is None or rep == r):
                powers = [0, 0, 0, 0]
                powers[names.index(name)] = 1
                return cls({(tuple(powers), _NO_EXPS): ONE}, r)
        raise InvalidInputError(f"unknown generator {name!r}")

    @classmethod
    def monomial(cls, powers, c=1, rep="eps", **exps) -> "OperatorExpression":
        key = (tuple(powers), tuple(exps.get(s, 0) for s in SYMBOLS))
        return cls({key: c}, rep)

    # -- inspection --------------------------------------------------------

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def is_scalar(self) -> bool:
        return all(powers == (0, 0, 0, 0) for powers, _ in self._terms)

    def degree(self) -> int:
        return max((sum(p) for p, _ in self._terms), default=0)

    def operator_groups(self) -> dict:
        """Map operator powers to ``{exps: coeff}`` coefficient polynomials."""
        groups: dict = {}
        for (powers, exps), c in self._terms.items():
            groups.setdefault(powers, {})[exps] = c
        return groups

    def coefficient_of(self, powers) -> "OperatorExpression":
        """Scalar coefficient multiplying the operator monomial ``powers``."""
        powers = tuple(powers)
        return OperatorExpression(
            {((0, 0, 0, 0), e): c for (p, e), c in self._terms.items() if p == powers}, self.rep
        )

    def generator_names(self) -> tuple:
        return REPRESENTATIONS[self.rep]

    def relabel(self, rep: str) -> "OperatorExpression":
        """Same terms under another representation's generator names."""
        return OperatorExpression(self._terms, rep)

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other) -> "OperatorExpression":
        if isinstance(other, OperatorExpression):
            if other.rep != self.rep and not (other.is_scalar() or self.is_scalar()):
                raise InvalidInputError(f"cannot combine {self.rep} and {other.rep} expressions")
            return other
        return OperatorExpression.scalar(other, self.rep)

    def _result_rep(self, other):
        return self.rep if not self.is_scalar() or other.is_scalar() else other.rep

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for key, c in other._terms.items():
            out[key] = out.get(key, GaussianRational(0)) + c
        return OperatorExpression(out, self._result_rep(other))

    __radd__ = __add__

    def __neg__(self):
        return OperatorExpression({k: -c for k, c in self._terms.items()}, self.rep)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        return multiply(self, self._coerce(other))

    def __rmul__(self, other):
        return multiply(self._coerce(other), self)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise InvalidInputError("only non-negative integer powers of operators")
        out = OperatorExpression.scalar(1, self.rep)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, OperatorExpression):
            return self._terms == other._terms and (self.rep == other.rep or self.is_scalar())
        try:
            return self == OperatorExpression.scalar(other, self.rep)
        except (TypeError, InvalidInputError):
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __str__(self):
        from .grammar import to_text

        return to_text(self)

    def __repr__(self):
        return f"OperatorExpression({str(self)!r}, rep={self.rep!r})"


def _falling(n: int, j: int) -> int:
    return perm(n, j)


def _monomial_product(p1, p2):
    """Normal-ordered product of two operator monomials.

    Moves pi_q^c past q^a' and pi_p^d past p^b' using
    pi^c x^a' = sum_j C(c, j) a'!/(a'-j)! (-i hbar)^j x^(a'-j) pi^(c-j).
    Yields ``(powers, j_total, integer_weight)``.
    """
    a, b, c, d = p1
    a2, b2, c2, d2 = p2
    for j1 in range(min(c, a2) + 1):
        w1 = comb(c, j1) * _falling(a2, j1)
        for j2 in range(min(d, b2) + 1):
            w2 = comb(d, j2) * _falling(b2, j2)
            yield (a + a2 - j1, b + b2 - j2, c + c2 - j1, d + d2 - j2), j1 + j2, w1 * w2


_MINUS_I_POWERS = (
    GaussianRational(1),
    GaussianRational(0, -1),
    GaussianRational(-1),
    GaussianRational(0, 1),
)


def multiply(x: OperatorExpression, y: OperatorExpression) -> OperatorExpression:
    """Product ``x*y`` reduced to normal order; exact throughout."""
    if not isinstance(y, OperatorExpression):
        y = x._coerce(y)
    if not isinstance(x, OperatorExpression):
        x = y._coerce(x)
    rep = x._result_rep(y) if x.rep != y.rep else x.rep
    if x.rep != y.rep and not (x.is_scalar() or y.is_scalar()):
        raise InvalidInputError(f"cannot multiply {x.rep} and {y.rep} expressions")
    out: dict = {}
    for (p1, e1), c1 in x._terms.items():
        for (p2, e2), c2 in y._terms.items():
            base = c1 * c2
            exps = _add_exps(e1, e2)
            for powers, j, w in _monomial_product(p1, p2):
                key = (powers, _add_exps(exps, tuple(j * h for h in _HBAR)) if j else exps)
                out[key] = out.get(key, GaussianRational(0)) + base * _MINUS_I_POWERS[j % 4] * w
    return OperatorExpression(out, rep)


def commutator(x: OperatorExpression, y: OperatorExpression) -> OperatorExpression:
    """``x*y - y*x`` in canonical form."""
    return multiply(x, y) - multiply(y, x)


def generators(rep: str = "eps"):
    """The four generators of ``rep`` as expressions, in normal order."""
    return tuple(OperatorExpression.generator(n, rep) for n in REPRESENTATIONS[rep])


def symbol(name: str, power: int = 1, rep: str = "eps") -> OperatorExpression:
    return OperatorExpression.scalar(1, rep, **{name: power})
