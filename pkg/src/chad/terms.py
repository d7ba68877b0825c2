"""Generic binding-aware traversals over terms and types.

Every node class is described by a list of slots. A slot says which field
holds a child and which names are bound over it, so free variables,
capture-avoiding substitution and alpha-equivalence are written once for
both languages.
"""

from __future__ import annotations

import re
from dataclasses import fields, replace

from . import syntax as S
from .syntax import LIN

# Slot kinds:
#   ("c", field)             constant payload, compared by equality
#   ("free", field)          a string field that is a free variable occurrence
#   ("lin",)                 an occurrence of the linear identifier
#   ("t", field, binders)    child node (may be None) with binders over it
#   ("ts", field)            tuple of child nodes, nothing bound
#   ("br", field)            tuple of (binder, child) pairs
# A binder entry is a field name holding a str, "*field" for a tuple of
# names, or the constant LIN.
_SLOTS = {
    S.Var: (("free", "name"),),
    S.Op: (("c", "name"), ("c", "params"), ("ts", "args")),
    S.Let: (("t", "bound", ()), ("t", "body", ("name",))),
    S.Inj: (("c", "index"), ("t", "payload", ()), ("t", "annotation", ())),
    S.SumMatch: (("t", "scrutinee", ()), ("br", "branches"), ("t", "annotation", ())),
    S.Tuple: (("ts", "components"),),
    S.ProdMatch: (("t", "scrutinee", ()), ("t", "body", ("*names",))),
    S.Iterate: (("free", "var"), ("t", "body", ("var",))),
    S.LinVar: (("lin",),),
    S.LinLet: (("t", "bound", ()), ("t", "body", (LIN,))),
    S.LOp: (("c", "name"), ("c", "params"), ("ts", "args"), ("t", "lin_arg", ())),
    S.LinTuple: (("ts", "components"),),
    S.LinProj: (("c", "index"), ("t", "term", ())),
    S.LinAbs: (("t", "body", (LIN,)), ("t", "domain", ())),
    S.LinApp: (("t", "fun", ()), ("t", "arg", ())),
    S.Zero: (),
    S.Plus: (("t", "left", ()), ("t", "right", ())),
    S.Fold: (
        ("free", "loop_var"),
        ("t", "loop_body", ("loop_var",)),
        ("t", "seed", ()),
        ("t", "algebra", ("loop_var", LIN)),
    ),
    S.Pair: (("t", "first", ()), ("t", "second", ()), ("t", "annotation", ())),
    S.PairMatch: (("t", "scrutinee", ()), ("t", "body", ("first_name", "second_name"))),
    S.Real: (("c", "n"),),
    S.Unit: (),
    S.Product: (("ts", "factors"),),
    S.Void: (),
    S.Sum: (("ts", "summands"),),
    S.LinFun: (("t", "dom", ()), ("t", "cod", ())),
    S.Sigma: (("t", "first", ()), ("t", "second", ("binder",))),
    S.CReal: (("c", "n"),),
    S.LUnit: (),
    S.Biproduct: (("ts", "factors"),),
    S.TypeCase: (("t", "scrutinee", ()), ("br", "branches")),
}


def _binder_names(node, binders) -> tuple:
    out = []
    for b in binders:
        if b == LIN:
            out.append(LIN)
        elif b.startswith("*"):
            out.extend(getattr(node, b[1:]))
        else:
            out.append(getattr(node, b))
    return tuple(out)


_SUFFIX = re.compile(r"_\d+$")


def fresh(base: str, avoid) -> str:
    """Smallest ``base_k`` not in ``avoid``; ``base`` itself if it is free."""
    if base not in avoid and base != LIN:
        return base
    stem = _SUFFIX.sub("", base)
    k = 1
    while f"{stem}_{k}" in avoid:
        k += 1
    return f"{stem}_{k}"


# ---------------------------------------------------------------------------
# free variables


def free_vars(node) -> frozenset:
    """Free term variables of a term or type (the linear identifier included as LIN)."""
    if node is None:
        return frozenset()
    cached = node.__dict__.get("_fv")
    if cached is not None:
        return cached
    out = set()
    for slot in _SLOTS[type(node)]:
        kind = slot[0]
        if kind == "free":
            out.add(getattr(node, slot[1]))
        elif kind == "lin":
            out.add(LIN)
        elif kind == "t":
            child = getattr(node, slot[1])
            if child is not None:
                out |= free_vars(child) - set(_binder_names(node, slot[2]))
        elif kind == "ts":
            for child in getattr(node, slot[1]):
                out |= free_vars(child)
        elif kind == "br":
            for b, child in getattr(node, slot[1]):
                out |= free_vars(child) - {b}
    out = frozenset(out)
    object.__setattr__(node, "_fv", out)
    return out


def all_names(node) -> frozenset:
    """Every identifier mentioned anywhere, bound or free."""
    if node is None:
        return frozenset()
    cached = node.__dict__.get("_an")
    if cached is not None:
        return cached
    out = set()
    for slot in _SLOTS[type(node)]:
        kind = slot[0]
        if kind == "free":
            out.add(getattr(node, slot[1]))
        elif kind == "t":
            out |= set(_binder_names(node, slot[2]))
            out |= all_names(getattr(node, slot[1]))
        elif kind == "ts":
            for child in getattr(node, slot[1]):
                out |= all_names(child)
        elif kind == "br":
            for b, child in getattr(node, slot[1]):
                out.add(b)
                out |= all_names(child)
    out.discard(LIN)
    out = frozenset(out)
    object.__setattr__(node, "_an", out)
    return out


# ---------------------------------------------------------------------------
# substitution


def subst(node, mapping: dict):
    """Simultaneous capture-avoiding substitution of terms for variables.

    Works on terms and on types (which mention terms inside type-level case
    scrutinees). The key ``LIN`` substitutes for the linear identifier.
    """
    if node is None or not mapping:
        return node
    fv = free_vars(node)
    mapping = {k: v for k, v in mapping.items() if k in fv}
    if not mapping:
        return node
    if isinstance(node, S.Var):
        return mapping.get(node.name, node)
    if isinstance(node, S.LinVar):
        return mapping.get(LIN, node)
    if isinstance(node, (S.Iterate, S.Fold)):
        return _subst_loop(node, mapping)

    repl_fv = set()
    for v in mapping.values():
        repl_fv |= free_vars(v)
    updates = {}
    renames = {}
    for slot in _SLOTS[type(node)]:
        kind = slot[0]
        if kind == "t":
            child = getattr(node, slot[1])
            if child is None:
                continue
            names = _binder_names(node, slot[2])
            inner = {k: v for k, v in mapping.items() if k not in names}
            child, new_names = _under_binders(child, names, inner, repl_fv)
            updates[slot[1]] = child
            if new_names != names:
                renames[slot[2]] = new_names
        elif kind == "ts":
            updates[slot[1]] = tuple(subst(c, mapping) for c in getattr(node, slot[1]))
        elif kind == "br":
            new = []
            for b, child in getattr(node, slot[1]):
                inner = {k: v for k, v in mapping.items() if k != b}
                child, (b2,) = _under_binders(child, (b,), inner, repl_fv)
                new.append((b2, child))
            updates[slot[1]] = tuple(new)
    for binders, new_names in renames.items():
        updates.update(_binder_updates(node, binders, new_names))
    return replace(node, **updates)


def _under_binders(child, names, inner, repl_fv):
    if not inner:
        return child, names
    child_fv = free_vars(child)
    relevant_fv = set()
    for k, v in inner.items():
        if k in child_fv:
            relevant_fv |= free_vars(v)
    clashes = [n for n in names if n in relevant_fv and n != LIN]
    if not clashes:
        return subst(child, inner), names
    avoid = set(repl_fv) | all_names(child) | set(names)
    renaming = {}
    new_names = []
    for n in names:
        if n in clashes:
            n2 = fresh(n, avoid)
            avoid.add(n2)
            renaming[n] = S.Var(n2)
            new_names.append(n2)
        else:
            new_names.append(n)
    child = subst(child, renaming)
    return subst(child, inner), tuple(new_names)


def _binder_updates(node, binders, new_names) -> dict:
    updates = {}
    i = 0
    for b in binders:
        if b == LIN:
            i += 1
        elif b.startswith("*"):
            k = len(getattr(node, b[1:]))
            updates[b[1:]] = tuple(new_names[i:i + k])
            i += k
        else:
            updates[b] = new_names[i]
            i += 1
    return updates


def _subst_loop(node, mapping):
    # The loop variable is both free (initial state) and bound (each state),
    # so it cannot be renamed in place; fall back to a let-bound fresh state.
    x = node.var if isinstance(node, S.Iterate) else node.loop_var
    inner = {k: v for k, v in mapping.items() if k != x}
    inner_fv = set()
    for v in inner.values():
        inner_fv |= free_vars(v)
    target = mapping.get(x)
    if target is None and x not in inner_fv:
        if isinstance(node, S.Iterate):
            return S.Iterate(x, subst(node.body, inner))
        alg_inner = {k: v for k, v in inner.items() if k != LIN}
        return S.Fold(
            x,
            subst(node.loop_body, inner),
            subst(node.seed, mapping),
            subst(node.algebra, alg_inner),
        )
    if isinstance(target, S.Var) and target.name != LIN:
        y = target.name
        body_fv = free_vars(node.body if isinstance(node, S.Iterate) else node.loop_body)
        alg_fv = free_vars(node.algebra) if isinstance(node, S.Fold) else frozenset()
        if y not in (body_fv | alg_fv) - {x} and y not in inner_fv and y not in inner:
            return subst(_rename_loop(node, y), inner)
    avoid = all_names(node) | inner_fv | (free_vars(target) if target is not None else set())
    z = fresh(x, avoid)
    if target is None:
        target = S.Var(x)
    renamed = _rename_loop(node, z)
    return S.Let(z, target, subst(renamed, inner))


def _rename_loop(node, z):
    x = node.var if isinstance(node, S.Iterate) else node.loop_var
    to_z = {x: S.Var(z)}
    if isinstance(node, S.Iterate):
        return S.Iterate(z, subst(node.body, to_z))
    return S.Fold(z, subst(node.loop_body, to_z), subst(node.seed, to_z), subst(node.algebra, to_z))


# ---------------------------------------------------------------------------
# alpha-equivalence


def alpha_eq(a, b) -> bool:
    return _alpha(a, b, {}, {}, [0])


def _lookup(env, name):
    return env.get(name)


def _alpha(a, b, ea, eb, counter) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if type(a) is not type(b):
        return False
    for slot in _SLOTS[type(a)]:
        kind = slot[0]
        if kind == "c":
            if getattr(a, slot[1]) != getattr(b, slot[1]):
                return False
        elif kind == "free":
            if not _same_var(getattr(a, slot[1]), getattr(b, slot[1]), ea, eb):
                return False
        elif kind == "lin":
            if not _same_var(LIN, LIN, ea, eb):
                return False
        elif kind == "t":
            na = _binder_names(a, slot[2])
            nb = _binder_names(b, slot[2])
            if len(na) != len(nb):
                return False
            ea2, eb2 = _bind(na, nb, ea, eb, counter)
            if not _alpha(getattr(a, slot[1]), getattr(b, slot[1]), ea2, eb2, counter):
                return False
        elif kind == "ts":
            ca, cb = getattr(a, slot[1]), getattr(b, slot[1])
            if len(ca) != len(cb):
                return False
            if not all(_alpha(x, y, ea, eb, counter) for x, y in zip(ca, cb)):
                return False
        elif kind == "br":
            ca, cb = getattr(a, slot[1]), getattr(b, slot[1])
            if len(ca) != len(cb):
                return False
            for (xa, ta), (xb, tb) in zip(ca, cb):
                ea2, eb2 = _bind((xa,), (xb,), ea, eb, counter)
                if not _alpha(ta, tb, ea2, eb2, counter):
                    return False
    return True


def _same_var(x, y, ea, eb) -> bool:
    lx, ly = ea.get(x), eb.get(y)
    if lx is None and ly is None:
        return x == y
    return lx == ly


def _bind(na, nb, ea, eb, counter):
    ea2, eb2 = dict(ea), dict(eb)
    for x, y in zip(na, nb):
        counter[0] += 1
        ea2[x] = counter[0]
        eb2[y] = counter[0]
    return ea2, eb2


# ---------------------------------------------------------------------------
# abstraction of a subterm


def abstract(node, pattern, name: str):
    """Replace every occurrence of ``pattern`` (up to alpha) by ``Var(name)``.

    ``name`` must be fresh for ``node``. Occurrences under a binder that
    captures a free variable of ``pattern`` are left alone.
    """
    pfv = free_vars(pattern)
    return _abstract(node, pattern, name, pfv)


def _abstract(node, pattern, name, pfv):
    if node is None:
        return None
    if pfv and not pfv <= free_vars(node):
        return node
    if isinstance(node, S.Term) and alpha_eq(node, pattern):
        return S.Var(name)
    updates = {}
    for slot in _SLOTS[type(node)]:
        kind = slot[0]
        if kind == "t":
            child = getattr(node, slot[1])
            if child is None:
                continue
            names = set(_binder_names(node, slot[2]))
            if names & pfv:
                continue
            updates[slot[1]] = _abstract(child, pattern, name, pfv)
        elif kind == "ts":
            updates[slot[1]] = tuple(_abstract(c, pattern, name, pfv) for c in getattr(node, slot[1]))
        elif kind == "br":
            new = []
            for b, child in getattr(node, slot[1]):
                new.append((b, child if b in pfv else _abstract(child, pattern, name, pfv)))
            updates[slot[1]] = tuple(new)
    if not updates or all(_same(getattr(node, k), v) for k, v in updates.items()):
        return node
    return replace(node, **updates)


def _same(old, new) -> bool:
    if isinstance(old, tuple):
        return len(old) == len(new) and all(
            (a is b) if not isinstance(a, tuple) else (a[0] == b[0] and a[1] is b[1]) for a, b in zip(old, new)
        )
    return old is new


def replace_subterm(node, pattern, replacement):
    """Capture-avoiding replacement of occurrences of ``pattern``."""
    if isinstance(pattern, S.Var):
        return subst(node, {pattern.name: replacement})
    pfv = free_vars(pattern)
    if pfv and not pfv <= free_vars(node):
        return node
    z = fresh("_abs", all_names(node) | all_names(pattern) | all_names(replacement))
    return subst(abstract(node, pattern, z), {z: replacement})


# ---------------------------------------------------------------------------
# misc


def children(node):
    """Immediate child nodes (terms and types), in field order."""
    out = []
    for slot in _SLOTS[type(node)]:
        kind = slot[0]
        if kind == "t":
            c = getattr(node, slot[1])
            if c is not None:
                out.append(c)
        elif kind == "ts":
            out.extend(getattr(node, slot[1]))
        elif kind == "br":
            out.extend(c for _, c in getattr(node, slot[1]))
    return out


def subterms(node):
    """Pre-order iterator over a node and all its descendants."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def size(node) -> int:
    return sum(1 for _ in subterms(node))


def is_value(t) -> bool:
    """Complex values: computations without primitive operations or iteration.

    Types are ignored; ``LinAbs`` is a value whatever its body, since
    building a closure is total.
    """
    cached = t.__dict__.get("_iv")
    if cached is not None:
        return cached
    if isinstance(t, (S.Op, S.Iterate, S.LOp, S.Fold)):
        out = False
    elif isinstance(t, S.LinAbs):
        out = True
    else:
        out = all(is_value(c) for c in children(t) if isinstance(c, S.Term))
    object.__setattr__(t, "_iv", out)
    return out


def node_fields(node) -> dict:
    return {f.name: getattr(node, f.name) for f in fields(node)}


def map_children(node, f):
    """Rebuild ``node`` with ``f`` applied to every immediate child (binders kept)."""
    updates = {}
    for slot in _SLOTS[type(node)]:
        kind = slot[0]
        if kind == "t":
            c = getattr(node, slot[1])
            if c is not None:
                updates[slot[1]] = f(c)
        elif kind == "ts":
            updates[slot[1]] = tuple(f(c) for c in getattr(node, slot[1]))
        elif kind == "br":
            updates[slot[1]] = tuple((b, f(c)) for b, c in getattr(node, slot[1]))
    if not updates:
        return node
    new = replace(node, **updates)
    if all(getattr(new, k) is getattr(node, k) for k in updates):
        return node
    return new
