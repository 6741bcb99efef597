"""Exact operator algebra of extended phase space."""

from .constructions import (
    BCHResult,
    PDEStencil,
    apply_linear_transformation,
    bch_similarity,
    commutator_table,
    cross_term,
    evaluate_scalar,
    extended_hamiltonian,
    extended_hamiltonian_series,
    extended_hamiltonian_substitution,
    generator_terms,
    husimi_exponent,
    husimi_hamiltonian,
    husimi_transformation,
    q_function_bindings,
    similarity_exponent,
    specialize,
    to_pde_stencil,
    wigner_harmonic_hamiltonian,
)
from .expression import (
    MAX_EXPONENT,
    SYMBOLS,
    OperatorExpression,
    commutator,
    generators,
    multiply,
    symbol,
)
from .grammar import parse, to_text
from .scalars import GaussianRational

__all__ = [
    "BCHResult",
    "GaussianRational",
    "MAX_EXPONENT",
    "OperatorExpression",
    "PDEStencil",
    "SYMBOLS",
    "apply_linear_transformation",
    "bch_similarity",
    "commutator",
    "commutator_table",
    "cross_term",
    "evaluate_scalar",
    "extended_hamiltonian",
    "extended_hamiltonian_series",
    "extended_hamiltonian_substitution",
    "generator_terms",
    "generators",
    "husimi_exponent",
    "husimi_hamiltonian",
    "husimi_transformation",
    "multiply",
    "parse",
    "q_function_bindings",
    "similarity_exponent",
    "specialize",
    "symbol",
    "to_pde_stencil",
    "to_text",
    "wigner_harmonic_hamiltonian",
]
