"""Target language: linear and dependent types, type checking, text syntax."""

from ..source_lang.parser import parse_ltype
from ..source_lang.parser import parse_program as _parse_program
from ..source_lang.parser import parse_term as _parse_term
from ..source_lang.parser import parse_type as _parse_type
from ..source_lang.printer import pretty_ltype, pretty_program, pretty_term, pretty_type
from .equality import EQUAL, NOT_EQUAL, UNKNOWN, Verdict, normalize, type_equal
from .typing import TargetChecker, op_cotangent_type, sigma_fst, typecheck_target


def parse_target_program(text: str):
    return _parse_program(text, target=True)


def parse_target_term(text: str):
    return _parse_term(text, target=True)


def parse_target_type(text: str):
    return _parse_type(text, target=True)


__all__ = [
    "EQUAL",
    "NOT_EQUAL",
    "UNKNOWN",
    "TargetChecker",
    "Verdict",
    "normalize",
    "op_cotangent_type",
    "parse_ltype",
    "parse_target_program",
    "parse_target_term",
    "parse_target_type",
    "pretty_ltype",
    "pretty_program",
    "pretty_term",
    "pretty_type",
    "sigma_fst",
    "type_equal",
    "typecheck_target",
]
