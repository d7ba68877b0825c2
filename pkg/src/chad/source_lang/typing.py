"""Syntax-directed type checking for the source language."""

from __future__ import annotations

from .. import primitives
from .. import syntax as S
from ..errors import ChadError, ChadTypeError
from ..terms import children


class Context:
    """Ordered typing context; extending with an existing name shadows it."""

    __slots__ = ("_items",)

    def __init__(self, items=()):
        if isinstance(items, Context):
            items = items.items()
        elif isinstance(items, dict):
            items = items.items()
        self._items = tuple((n, t) for n, t in items)
        names = [n for n, _ in self._items]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate names in context: {names}")

    def items(self):
        return self._items

    def names(self):
        return tuple(n for n, _ in self._items)

    def types(self):
        return tuple(t for _, t in self._items)

    def __contains__(self, name) -> bool:
        return any(n == name for n, _ in self._items)

    def __getitem__(self, name):
        for n, t in self._items:
            if n == name:
                return t
        raise KeyError(name)

    def get(self, name, default=None):
        for n, t in self._items:
            if n == name:
                return t
        return default

    def __len__(self):
        return len(self._items)

    def index(self, name) -> int:
        return self.names().index(name)

    def extend(self, name, ty) -> "Context":
        return Context(tuple((n, t) for n, t in self._items if n != name) + ((name, ty),))

    def extend_many(self, pairs) -> "Context":
        ctx = self
        for n, t in pairs:
            ctx = ctx.extend(n, t)
        return ctx

    def restrict(self, names) -> "Context":
        keep = set(names)
        return Context(tuple((n, t) for n, t in self._items if n in keep))

    def __eq__(self, other):
        return isinstance(other, Context) and self._items == other._items

    def __hash__(self):
        return hash(self._items)

    def __repr__(self):
        return f"Context({list(self._items)!r})"


def op_type(name: str, params, arg_types, rule_path=()):
    """Result type of ``op name[params](args)`` given argument types."""
    dims = []
    for i, t in enumerate(arg_types):
        if not isinstance(t, S.Real):
            raise ChadTypeError("op", f"argument {i + 1} of {name} has type {t}, expected a real array", rule_path)
        dims.append(t.n)
    try:
        op = primitives.resolve(name, params, dims)
    except ChadError as e:
        raise ChadTypeError("op", str(e), rule_path) from None
    outs = [S.Real(m) for m in op.out_dims]
    return outs[0] if len(outs) == 1 else S.Sum(outs)


def _child_index(term, child) -> int:
    for i, c in enumerate(children(term)):
        if c is child:
            return i
    return -1


class SourceChecker:
    def check(self, ctx: Context, t):
        return self._check(ctx, t)

    def _sub(self, ctx, parent, child):
        try:
            return self._check(ctx, child)
        except ChadTypeError as e:
            raise e.at(_child_index(parent, child)) from None

    def _check(self, ctx: Context, t):
        if isinstance(t, S.Var):
            ty = ctx.get(t.name)
            if ty is None:
                raise ChadTypeError("var", f"unbound variable {t.name}")
            return ty
        if isinstance(t, S.Op):
            arg_types = [self._sub(ctx, t, a) for a in t.args]
            return op_type(t.name, t.params, arg_types)
        if isinstance(t, S.Let):
            bound = self._sub(ctx, t, t.bound)
            return self._sub(ctx.extend(t.name, bound), t, t.body)
        if isinstance(t, S.Inj):
            payload = self._sub(ctx, t, t.payload)
            want = t.annotation.summands[t.index - 1]
            if payload != want:
                raise ChadTypeError("inj", f"payload has type {payload}, annotation expects {want}")
            return t.annotation
        if isinstance(t, S.SumMatch):
            scrut = self._sub(ctx, t, t.scrutinee)
            if not isinstance(scrut, (S.Sum, S.Void)):
                raise ChadTypeError("case", f"scrutinee has non-sum type {scrut}")
            summands = S.sum_summands(scrut)
            if len(summands) != len(t.branches):
                raise ChadTypeError(
                    "case", f"{len(t.branches)} branches for a sum with {len(summands)} summands"
                )
            result = t.annotation
            for (name, body), ty in zip(t.branches, summands):
                bt = self._sub(ctx.extend(name, ty), t, body)
                if result is None:
                    result = bt
                elif bt != result:
                    raise ChadTypeError("case", f"branch types disagree: {result} vs {bt}")
            if result is None:
                raise ChadTypeError("case", "empty case needs a result annotation")
            return result
        if isinstance(t, S.Tuple):
            return S.product([self._sub(ctx, t, c) for c in t.components])
        if isinstance(t, S.ProdMatch):
            scrut = self._sub(ctx, t, t.scrutinee)
            if not isinstance(scrut, (S.Product, S.Unit)):
                raise ChadTypeError("match", f"scrutinee has non-product type {scrut}")
            factors = S.product_factors(scrut)
            if len(factors) != len(t.names):
                raise ChadTypeError("match", f"pattern binds {len(t.names)} names, product has {len(factors)}")
            if len(set(t.names)) != len(t.names):
                raise ChadTypeError("match", "pattern names must be distinct")
            return self._sub(ctx.extend_many(zip(t.names, factors)), t, t.body)
        if isinstance(t, S.Iterate):
            state = ctx.get(t.var)
            if state is None:
                raise ChadTypeError("iterate", f"loop variable {t.var} is not in scope as the initial state")
            body = self._sub(ctx, t, t.body)
            if not isinstance(body, S.Sum) or len(body.summands) != 2:
                raise ChadTypeError("iterate", f"loop body has type {body}, expected a binary sum")
            if body.summands[1] != state:
                raise ChadTypeError(
                    "iterate", f"loop body continues with {body.summands[1]}, state has type {state}"
                )
            return body.summands[0]
        raise ChadTypeError("syntax", f"{type(t).__name__} is not a source term")


def typecheck_source(ctx, term):
    """Type of ``term`` in ``ctx`` (a :class:`Context`, dict or list of pairs)."""
    return SourceChecker().check(ctx if isinstance(ctx, Context) else Context(ctx), term)


def typecheck_program(p: S.Program):
    ty = typecheck_source(Context(p.params), p.body)
    if ty != p.result:
        raise ChadTypeError("def", f"body has type {ty}, declared {p.result}")
    return ty
