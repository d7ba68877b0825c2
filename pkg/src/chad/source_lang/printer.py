"""Canonical pretty-printer for both languages.

A term is printed on one line when it fits in :data:`WIDTH` columns and
broken into an indented block otherwise (two spaces per level). The output is
deterministic, so it doubles as the golden-test format, and it is always
accepted by the parser in :mod:`chad.source_lang.parser`.
"""

from __future__ import annotations

import contextvars

from .. import syntax as S

WIDTH = 80

_BINDER_FORMS = (S.Let, S.LinLet, S.SumMatch, S.ProdMatch, S.LinAbs, S.PairMatch)


def fmt_number(x) -> str:
    return str(x) if isinstance(x, int) and not isinstance(x, bool) else repr(float(x))


def _params(params) -> str:
    return "[" + ", ".join(fmt_number(p) for p in params) + "]" if params else ""


# ---------------------------------------------------------------------------
# types


def pretty_type(t) -> str:
    if isinstance(t, S.Real):
        return f"real {t.n}"
    if isinstance(t, S.Unit):
        return "unit"
    if isinstance(t, S.Void):
        return "void"
    if isinstance(t, S.Product):
        return " * ".join(_wrap_type(f, (S.Product, S.Sum)) for f in t.factors)
    if isinstance(t, S.Sum):
        return " + ".join(_wrap_type(f, (S.Sum,)) for f in t.summands)
    if isinstance(t, S.LinFun):
        return f"lin({pretty_ltype(t.dom)} -o {pretty_ltype(t.cod)})"
    if isinstance(t, S.Sigma):
        return f"sigma({t.binder} : {pretty_type(t.first)} . {pretty_type(t.second)})"
    if isinstance(t, S.LIN_TYPES):
        return pretty_ltype(t)
    raise TypeError(f"not a type: {t!r}")


def _wrap_type(t, kinds) -> str:
    s = pretty_type(t)
    return f"({s})" if isinstance(t, kinds) else s


def pretty_ltype(t) -> str:
    if isinstance(t, S.CReal):
        return f"creal {t.n}"
    if isinstance(t, S.LUnit):
        return "lunit"
    if isinstance(t, S.Biproduct):
        parts = []
        for f in t.factors:
            s = pretty_ltype(f)
            parts.append(f"({s})" if isinstance(f, S.Biproduct) else s)
        return " & ".join(parts)
    if isinstance(t, S.TypeCase):
        return f"case {flat(t.scrutinee)} of {_flat_branches(t.branches, pretty_ltype)}"
    raise TypeError(f"not a linear type: {t!r}")


# ---------------------------------------------------------------------------
# terms, single line


def _flat_branches(branches, render) -> str:
    if not branches:
        return "{}"
    inner = " | ".join(f"in{i} {n} -> {render(b)}" for i, (n, b) in enumerate(branches, 1))
    return "{ " + inner + " }"


def _is_iterate_sugar(t) -> bool:
    return isinstance(t, S.Let) and isinstance(t.body, S.Iterate) and t.body.var == t.name


def _plus_operand(t, right: bool, render) -> str:
    s = render(t)
    if isinstance(t, _BINDER_FORMS) and not _is_iterate_sugar(t) or (right and isinstance(t, S.Plus)):
        return f"({s})"
    return s


# renderings keyed by id (flat) or (id, indent) (block), live for one
# top-level call; the block layout asks for the same subtree many times
_memo: contextvars.ContextVar = contextvars.ContextVar("flat_memo", default=None)


def flat(t) -> str:
    """Single-line rendering of a term."""
    memo = _memo.get()
    if memo is None:
        return _flat(t)
    hit = memo.get(id(t))
    if hit is None:
        hit = memo[id(t)] = _flat(t)
    return hit


def _flat(t) -> str:
    if isinstance(t, S.Var):
        return t.name
    if isinstance(t, S.Op):
        return f"op {t.name}{_params(t.params)}({', '.join(flat(a) for a in t.args)})"
    if _is_iterate_sugar(t):
        return f"iterate {t.name} from {flat(t.bound)} {{ {flat(t.body.body)} }}"
    if isinstance(t, S.Let):
        return f"let {t.name} = {flat(t.bound)} in {flat(t.body)}"
    if isinstance(t, S.Inj):
        return f"in{t.index}[{pretty_type(t.annotation)}]({flat(t.payload)})"
    if isinstance(t, S.SumMatch):
        ann = f"[{pretty_type(t.annotation)}]" if t.annotation is not None else ""
        return f"case{ann} {flat(t.scrutinee)} of {_flat_branches(t.branches, flat)}"
    if isinstance(t, S.Tuple):
        return "(" + ", ".join(flat(c) for c in t.components) + ")"
    if isinstance(t, S.ProdMatch):
        return f"match {flat(t.scrutinee)} with ({', '.join(t.names)}) -> {flat(t.body)}"
    if isinstance(t, S.Iterate):
        return f"iterate {t.var} {{ {flat(t.body)} }}"
    if isinstance(t, S.LinVar):
        return "@v"
    if isinstance(t, S.LinLet):
        return f"let @v = {flat(t.bound)} in {flat(t.body)}"
    if isinstance(t, S.LOp):
        args = ", ".join(flat(a) for a in t.args)
        return f"lop {t.name}{_params(t.params)}({args}; {flat(t.lin_arg)})"
    if isinstance(t, S.LinTuple):
        return "<" + ", ".join(flat(c) for c in t.components) + ">"
    if isinstance(t, S.LinProj):
        return f"lprj[{t.index}]({flat(t.term)})"
    if isinstance(t, S.LinAbs):
        dom = f" [{pretty_ltype(t.domain)}]" if t.domain is not None else ""
        return f"fn @v{dom} => {flat(t.body)}"
    if isinstance(t, S.LinApp):
        return f"lapp({flat(t.fun)}, {flat(t.arg)})"
    if isinstance(t, S.Zero):
        return "0"
    if isinstance(t, S.Plus):
        return f"{_plus_operand(t.left, False, flat)} + {_plus_operand(t.right, True, flat)}"
    if isinstance(t, S.Fold):
        return (
            f"fold {t.loop_var} {{ {flat(t.loop_body)} }} ({flat(t.seed)}) "
            f"with @v {{ {flat(t.algebra)} }}"
        )
    if isinstance(t, S.Pair):
        ann = f"[{pretty_type(t.annotation)}]" if t.annotation is not None else ""
        return f"pair{ann}({flat(t.first)}, {flat(t.second)})"
    if isinstance(t, S.PairMatch):
        return f"split {flat(t.scrutinee)} with ({t.first_name}, {t.second_name}) -> {flat(t.body)}"
    raise TypeError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# terms, block layout


def _pad(n: int) -> str:
    return " " * n


def render(t, ind: int = 0) -> str:
    """Rendering whose first line starts at column ``ind``; later lines carry their own indent."""
    f = flat(t)
    if ind + len(f) <= WIDTH:
        return f
    memo = _memo.get()
    if memo is None:
        return _block(t, ind)
    key = (id(t), ind)
    hit = memo.get(key)
    if hit is None:
        hit = memo[key] = _block(t, ind)
    return hit


def _call(head: str, args, ind: int, lin=None) -> str:
    inner = _pad(ind + 2)
    parts = [render(a, ind + 2) for a in args]
    body = (",\n" + inner).join(parts)
    if lin is not None:
        body = (body + ";\n" + inner if parts else "; ") + render(lin, ind + 2)
    return f"{head}(\n{inner}{body}\n{_pad(ind)})"


def _scrutinee(keyword: str, scrut, closer: str, ind: int) -> str:
    """``keyword S closer``, moving a multi-line ``S`` onto its own indented lines."""
    one = render(scrut, ind + len(keyword) + 1)
    if "\n" not in one:
        return f"{keyword} {one} {closer}"
    return f"{keyword}\n{_pad(ind + 2)}{render(scrut, ind + 2)}\n{_pad(ind)}{closer}"


def _block(t, ind: int) -> str:
    pad = _pad(ind)
    if _is_iterate_sugar(t):
        bound = render(t.bound, ind + 14 + len(t.name))
        if "\n" not in bound:
            head = f"iterate {t.name} from {bound} {{"
            return f"{head}\n{_pad(ind + 2)}{render(t.body.body, ind + 2)}\n{pad}}}"
        # a long start term reads better as the equivalent let
    if isinstance(t, (S.Let, S.LinLet)):
        name = t.name if isinstance(t, S.Let) else "@v"
        head = f"let {name} = "
        bound = render(t.bound, ind + len(head))
        if "\n" not in bound:
            first = f"{head}{bound} in"
        else:
            first = f"let {name} =\n{_pad(ind + 2)}{render(t.bound, ind + 2)}\n{pad}in"
        return f"{first}\n{pad}{render(t.body, ind)}"
    if isinstance(t, S.ProdMatch):
        head = _scrutinee("match", t.scrutinee, "with", ind)
        return f"{head} ({', '.join(t.names)}) ->\n{pad}{render(t.body, ind)}"
    if isinstance(t, S.PairMatch):
        head = _scrutinee("split", t.scrutinee, "with", ind)
        return f"{head} ({t.first_name}, {t.second_name}) ->\n{pad}{render(t.body, ind)}"
    if isinstance(t, S.SumMatch):
        ann = f"[{pretty_type(t.annotation)}]" if t.annotation is not None else ""
        lines = [_scrutinee(f"case{ann}", t.scrutinee, "of", ind) + " {"]
        for i, (n, b) in enumerate(t.branches, 1):
            lines.append(f"{_pad(ind + 2)}| in{i} {n} ->")
            lines.append(f"{_pad(ind + 4)}{render(b, ind + 4)}")
        lines.append(pad + "}")
        return "\n".join(lines)
    if isinstance(t, S.Iterate):
        return f"iterate {t.var} {{\n{_pad(ind + 2)}{render(t.body, ind + 2)}\n{pad}}}"
    if isinstance(t, S.LinAbs):
        dom = f" [{pretty_ltype(t.domain)}]" if t.domain is not None else ""
        return f"fn @v{dom} =>\n{_pad(ind + 2)}{render(t.body, ind + 2)}"
    if isinstance(t, S.Fold):
        inner = _pad(ind + 2)
        return (
            f"fold {t.loop_var} {{\n{inner}{render(t.loop_body, ind + 2)}\n{pad}}} "
            f"({render(t.seed, ind + 3)}) with @v {{\n{inner}{render(t.algebra, ind + 2)}\n{pad}}}"
        )
    if isinstance(t, S.Plus):
        def operand(x, right):
            wrapped = isinstance(x, _BINDER_FORMS) and not _is_iterate_sugar(x) or (right and isinstance(x, S.Plus))
            if wrapped:
                return "(" + render(x, ind + 1 + (2 if right else 0)) + ")"
            return render(x, ind + (2 if right else 0))

        return f"{operand(t.left, False)}\n{pad}+ {operand(t.right, True)}"
    if isinstance(t, S.Op):
        return _call(f"op {t.name}{_params(t.params)}", t.args, ind)
    if isinstance(t, S.LOp):
        return _call(f"lop {t.name}{_params(t.params)}", t.args, ind, lin=t.lin_arg)
    if isinstance(t, S.Tuple):
        return _call("", t.components, ind)
    if isinstance(t, S.LinTuple):
        inner = _pad(ind + 2)
        body = (",\n" + inner).join(render(c, ind + 2) for c in t.components)
        return f"<\n{inner}{body}\n{pad}>"
    if isinstance(t, S.Inj):
        return _call(f"in{t.index}[{pretty_type(t.annotation)}]", (t.payload,), ind)
    if isinstance(t, S.LinProj):
        return _call(f"lprj[{t.index}]", (t.term,), ind)
    if isinstance(t, S.LinApp):
        return _call("lapp", (t.fun, t.arg), ind)
    if isinstance(t, S.Pair):
        ann = f"[{pretty_type(t.annotation)}]" if t.annotation is not None else ""
        return _call(f"pair{ann}", (t.first, t.second), ind)
    return flat(t)


def _memoized(fn):
    def wrapper(*args):
        if _memo.get() is not None:
            return fn(*args)
        token = _memo.set({})
        try:
            return fn(*args)
        finally:
            _memo.reset(token)

    wrapper.__name__, wrapper.__doc__ = fn.__name__, fn.__doc__
    return wrapper


@_memoized
def pretty_term(t) -> str:
    return render(t, 0)


@_memoized
def pretty_program(p: S.Program) -> str:
    lines = [f"-- {c}" if c else "--" for c in p.comments]
    params = ", ".join(f"{n}: {pretty_type(ty)}" for n, ty in p.params)
    lines.append(f"def {p.name} ({params}) : {pretty_type(p.result)} =")
    lines.append("  " + render(p.body, 2))
    return "\n".join(lines) + "\n"
