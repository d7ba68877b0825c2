"""Decidable fragment of type equality for the target language.

Types are compared after normalization:

* type-level ``case`` on an injection reduces to the chosen branch;
* a type-level ``case`` whose branches are all equal and ignore their binder
  collapses to that branch;
* terms inside types are reduced with the value β-rules (``let`` of a
  value, ``match`` of a tuple, ``split`` of a pair, ``case`` of an injection).

Anything else is compared up to α-equivalence. A mismatch that involves a
type-level case over a compound stuck scrutinee is reported as
:data:`UNKNOWN`, since the two sides might still be equal in the full theory.
"""

from __future__ import annotations

import enum
from dataclasses import replace

from .. import syntax as S
from ..terms import alpha_eq, free_vars, is_value, map_children, subst, subterms


class Verdict(enum.Enum):
    EQUAL = "equal"
    NOT_EQUAL = "not-equal"
    UNKNOWN = "unknown"


EQUAL, NOT_EQUAL, UNKNOWN = Verdict.EQUAL, Verdict.NOT_EQUAL, Verdict.UNKNOWN


def _step(t):
    """One head β-step on a term, or ``None``."""
    if isinstance(t, S.Let) and is_value(t.bound):
        return subst(t.body, {t.name: t.bound})
    if isinstance(t, S.ProdMatch) and isinstance(t.scrutinee, S.Tuple) and is_value(t.scrutinee):
        comps = t.scrutinee.components
        if len(comps) == len(t.names):
            return subst(t.body, dict(zip(t.names, comps)))
    if isinstance(t, S.SumMatch) and isinstance(t.scrutinee, S.Inj) and is_value(t.scrutinee):
        name, body = t.branches[t.scrutinee.index - 1]
        return subst(body, {name: t.scrutinee.payload})
    if isinstance(t, S.PairMatch) and isinstance(t.scrutinee, S.Pair) and is_value(t.scrutinee):
        return subst(t.body, {t.first_name: t.scrutinee.first, t.second_name: t.scrutinee.second})
    return None


def whnf(t):
    """Head β-reduct of a term: reduce until the head is not a redex."""
    while True:
        if isinstance(t, (S.ProdMatch, S.SumMatch, S.PairMatch)):
            scrut = whnf(t.scrutinee)
            if scrut is not t.scrutinee:
                t = replace(t, scrutinee=scrut)
        r = _step(t)
        if r is None:
            return t
        t = r


def normalize_term(t):
    cached = t.__dict__.get("_nff")
    if cached is not None:
        return cached
    out = map_children(t, full_normalize)
    while True:
        r = _step(out)
        if r is None:
            break
        out = map_children(r, full_normalize)
    object.__setattr__(t, "_nff", out)
    object.__setattr__(out, "_nff", out)
    return out


def _cached(node, key, fn):
    if node is None:
        return None
    cached = node.__dict__.get(key)
    if cached is not None:
        return cached
    out = fn(node)
    object.__setattr__(node, key, out)
    if out is not node:
        object.__setattr__(out, key, out)
    return out


def normalize(node):
    """Head normal form of a type; terms are fully normalized.

    Terms inside a type are only reduced as far as needed to resolve
    type-level cases, which keeps types built from large terms cheap.
    """
    if isinstance(node, S.Term):
        return normalize_term(node)
    return _cached(node, "_nf", lambda n: _normalize_type(n, whnf, normalize))


def full_normalize(node):
    """Normal form with every term inside the type fully reduced."""
    if isinstance(node, S.Term):
        return normalize_term(node)
    return _cached(node, "_nfull", lambda n: _normalize_type(n, normalize_term, full_normalize))


def _normalize_type(node, term_nf, again):
    if isinstance(node, S.TypeCase):
        scrut = term_nf(node.scrutinee)
        if isinstance(scrut, S.Inj) and 1 <= scrut.index <= len(node.branches):
            name, body = node.branches[scrut.index - 1]
            return again(subst(body, {name: scrut.payload}))
        branches = tuple((b, again(ty)) for b, ty in node.branches)
        if branches:
            first = branches[0][1]
            if all(b not in free_vars(ty) for b, ty in branches) and all(
                alpha_eq(first, ty) for _, ty in branches[1:]
            ):
                return first
        return S.TypeCase(scrut, branches)
    return map_children(node, again)


def _has_compound_case(t) -> bool:
    for n in subterms(t):
        if isinstance(n, S.TypeCase) and not isinstance(n.scrutinee, S.Var):
            return True
    return False


def type_equal(a, b) -> Verdict:
    if alpha_eq(normalize(a), normalize(b)):
        return EQUAL
    na, nb = full_normalize(a), full_normalize(b)
    if alpha_eq(na, nb):
        return EQUAL
    if _has_compound_case(na) or _has_compound_case(nb):
        return UNKNOWN
    return NOT_EQUAL
