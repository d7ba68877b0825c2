"""Source language: text syntax, typing and desugaring."""

from .desugar import desugar_iterate_with_context, needs_context, uniquify
from .parser import parse_program, parse_source, parse_term, parse_type
from .printer import pretty_program, pretty_term, pretty_type
from .typing import Context, op_type, typecheck_program, typecheck_source
from ..terms import subst

__all__ = [
    "Context",
    "desugar_iterate_with_context",
    "needs_context",
    "op_type",
    "parse_program",
    "parse_source",
    "parse_term",
    "parse_type",
    "pretty_program",
    "pretty_term",
    "pretty_type",
    "subst",
    "typecheck_program",
    "typecheck_source",
    "uniquify",
]
