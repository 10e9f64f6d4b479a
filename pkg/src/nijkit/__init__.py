"""Exact verification toolkit for Nijenhuis operators and related integrable structures."""

from .algebra import AlgebraError, RationalFunction, rf, symbols, var
from .dsl import ModelSpec, ParseError, SemanticError, parse_expression, parse_model, print_model
from .tensors import (
    MetricField,
    OneForm,
    OperatorField,
    Tensor,
    Tensor12,
    VectorField,
    char_poly,
    companion_operator,
    is_nijenhuis,
    nijenhuis_bracket,
    nijenhuis_torsion,
    verify_core_identities,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraError",
    "MetricField",
    "ModelSpec",
    "OneForm",
    "OperatorField",
    "ParseError",
    "RationalFunction",
    "SemanticError",
    "Tensor",
    "Tensor12",
    "VectorField",
    "char_poly",
    "companion_operator",
    "is_nijenhuis",
    "nijenhuis_bracket",
    "nijenhuis_torsion",
    "parse_expression",
    "parse_model",
    "print_model",
    "rf",
    "symbols",
    "var",
    "verify_core_identities",
]
