"""The CHAD source-to-source transformation.

A source term ``Γ ⊢ t : τ`` becomes a target term of type

    Σ p : D₁τ . (D₂τ ⊸ D₂Γ)

pairing the primal value with a linear map that pulls output cotangents
back to the context. Primal types are unchanged (first-order source types
already live in the target). Cotangent types depend on the primal value
``p``: products give biproducts of the components' cotangents and sums
give a type-level case on ``p``.

Lets, products and sums are translated clause by clause, each clause
threading the cotangent maps of its subterms. A loop ``iterate x. t`` whose
body mentions only ``x`` becomes a primal loop over the primal part of
``D[t]`` paired with a ``fold`` that runs the cotangent part of ``D[t]``
backwards along the visited states. A loop whose body reads other
variables is first rewritten so that those variables travel inside the
loop state (see :func:`chad.source_lang.desugar_iterate_with_context`).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import syntax as S
from .errors import ChadTypeError
from .source_lang.desugar import desugar_iterate_with_context, uniquify
from .source_lang.typing import Context, op_type, typecheck_program
from .terms import all_names, free_vars, subst


# ---------------------------------------------------------------------------
# types


def chad_type_primal(ty):
    if not isinstance(ty, S.SOURCE_TYPES):
        raise TypeError(f"not a source type: {ty!r}")
    return ty


def chad_type_cotangent(ty, binder: str = "p"):
    """Cotangent type of ``ty``, with ``binder`` free for the primal point."""
    if isinstance(ty, S.Real):
        return S.CReal(ty.n)
    if isinstance(ty, S.Unit):
        return S.LUnit()
    if isinstance(ty, S.Product):
        k = len(ty.factors)
        names = tuple(f"{binder}{i}" for i in range(1, k + 1))
        factors = []
        for i, f in enumerate(ty.factors):
            proj = S.ProdMatch(S.Var(binder), names, S.Var(names[i]))
            factors.append(subst(chad_type_cotangent(f, binder), {binder: proj}))
        return S.Biproduct(factors)
    if isinstance(ty, (S.Sum, S.Void)):
        return S.TypeCase(S.Var(binder), tuple((binder, chad_type_cotangent(s, binder)) for s in S.sum_summands(ty)))
    raise TypeError(f"not a source type: {ty!r}")


def cotangent_at(ty, term):
    """Cotangent type of ``ty`` at the primal point ``term``."""
    return subst(chad_type_cotangent(ty, "p"), {"p": term})


def chad_context(ctx):
    """Primal context and the cotangent type of the whole context."""
    ctx = ctx if isinstance(ctx, Context) else Context(ctx)
    lin = S.biproduct([cotangent_at(t, S.Var(n)) for n, t in ctx.items()])
    return Context(tuple((n, chad_type_primal(t)) for n, t in ctx.items())), lin


def sigma_type(ty, ctx: Context):
    binder = "p"
    k = 1
    while binder in ctx:
        binder = f"p_{k}"
        k += 1
    _, lin_ctx = chad_context(ctx)
    return S.Sigma(binder, chad_type_primal(ty), S.LinFun(chad_type_cotangent(ty, binder), lin_ctx))


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class ChadOutput:
    primal_context: Context
    term: object
    type: S.Sigma
    source_type: object


def lparts(v, n: int) -> list:
    """Components of a value of an ``n``-ary biproduct (unary ones are collapsed)."""
    if n == 1:
        return [v]
    return [S.LinProj(i, v) for i in range(1, n + 1)]


def ltuple(components) -> object:
    components = list(components)
    return components[0] if len(components) == 1 else S.LinTuple(components)


class Transformer:
    """One transformation run; owns the fresh-name supply ``_g0, _g1, ...``."""

    def __init__(self, avoid=()):
        self.used = set(avoid)
        self.counter = 0

    def fresh(self) -> str:
        while True:
            name = f"_g{self.counter}"
            self.counter += 1
            if name not in self.used:
                self.used.add(name)
                return name

    def coproj(self, i: int, n: int, term):
        """``term`` injected as component ``i`` (0-based) of an ``n``-ary biproduct."""
        if n == 1:
            return term
        return S.LinTuple([term if j == i else S.Zero() for j in range(n)])

    def _gather(self, lin_v, n, extra, back):
        """``fst(v) + back(snd(v))`` for ``v`` of the context extended by ``extra`` entries."""
        parts = lparts(lin_v, n + extra)
        return S.Plus(ltuple(parts[:n]) if n != 1 else parts[0], back(parts[n:]))

    # --- clauses -------------------------------------------------------------

    def term(self, ctx: Context, t):
        """Translate ``t``; returns ``(target term, source type)``."""
        if isinstance(t, S.Var):
            if t.name not in ctx:
                raise ChadTypeError("var", f"unbound variable {t.name}")
            ty = ctx[t.name]
            cot = self.coproj(ctx.index(t.name), len(ctx), S.LinVar())
            return S.Pair(t, S.LinAbs(cot), sigma_type(ty, ctx)), ty

        if isinstance(t, S.Op):
            pieces = [self.term(ctx, a) for a in t.args]
            ty = op_type(t.name, t.params, [p[1] for p in pieces])
            names = [(self.fresh(), self.fresh()) for _ in pieces]
            xs = [S.Var(x) for x, _ in names]
            k = len(pieces)
            if k == 0:
                cot = S.Zero()
            else:
                parts = lparts(S.LinVar(), k)
                back = S.plus_all(S.LinApp(S.Var(xd), part) for (_, xd), part in zip(names, parts))
                cot = S.LinLet(S.LOp(t.name, xs, S.LinVar(), t.params), back)
            out = S.Pair(S.Op(t.name, xs, t.params), S.LinAbs(cot), sigma_type(ty, ctx))
            for (dt, _), (x, xd) in reversed(list(zip(pieces, names))):
                out = S.PairMatch(dt, x, xd, out)
            return out, ty

        if isinstance(t, S.Let):
            dt, sigma = self.term(ctx, t.bound)
            inner = ctx.extend(t.name, sigma)
            if len(inner) != len(ctx) + 1:
                raise ChadTypeError("let", f"binder {t.name} shadows the context; uniquify first")
            ds, ty = self.term(inner, t.body)
            xd, y, yd = self.fresh(), self.fresh(), self.fresh()
            n = len(ctx)
            cot = S.LinLet(
                S.LinApp(S.Var(yd), S.LinVar()),
                self._gather(S.LinVar(), n, 1, lambda rest: S.LinApp(S.Var(xd), rest[0])),
            )
            body = S.PairMatch(ds, y, yd, S.Pair(S.Var(y), S.LinAbs(cot), sigma_type(ty, ctx)))
            return S.PairMatch(dt, t.name, xd, body), ty

        if isinstance(t, S.Inj):
            dt, _ = self.term(ctx, t.payload)
            x, xd = self.fresh(), self.fresh()
            ty = t.annotation
            return S.PairMatch(dt, x, xd, S.Pair(S.Inj(t.index, S.Var(x), ty), S.Var(xd), sigma_type(ty, ctx))), ty

        if isinstance(t, S.SumMatch):
            ds, sty = self.term(ctx, t.scrutinee)
            if not isinstance(sty, (S.Sum, S.Void)):
                raise ChadTypeError("case", f"scrutinee has non-sum type {sty}")
            x, xd = self.fresh(), self.fresh()
            n = len(ctx)
            results = []
            ty = t.annotation
            for i, ((y, body), si) in enumerate(zip(t.branches, S.sum_summands(sty)), 1):
                inner = ctx.extend(y, si)
                db, bty = self.term(inner, body)
                ty = bty if ty is None else ty
                z, zd = self.fresh(), self.fresh()
                rebound = S.Let(x, S.Inj(i, S.Var(y), sty), S.Var(xd))
                cot = S.LinLet(
                    S.LinApp(S.Var(zd), S.LinVar()),
                    self._gather(S.LinVar(), n, 1, lambda rest, rb=rebound: S.LinApp(rb, rest[0])),
                )
                results.append((y, (db, z, zd, cot)))
            if ty is None:
                raise ChadTypeError("case", "empty case needs a result annotation")
            ann = sigma_type(ty, ctx)
            branches = [
                (y, S.PairMatch(db, z, zd, S.Pair(S.Var(z), S.LinAbs(cot), ann)))
                for y, (db, z, zd, cot) in results
            ]
            empty_ann = ann if not branches else None
            return S.PairMatch(ds, x, xd, S.SumMatch(S.Var(x), branches, empty_ann)), ty

        if isinstance(t, S.Tuple):
            pieces = [self.term(ctx, c) for c in t.components]
            ty = S.product([p[1] for p in pieces])
            names = [(self.fresh(), self.fresh()) for _ in pieces]
            parts = lparts(S.LinVar(), len(pieces))
            cot = S.plus_all(S.LinApp(S.Var(xd), part) for (_, xd), part in zip(names, parts))
            out = S.Pair(S.Tuple([S.Var(x) for x, _ in names]), S.LinAbs(cot), sigma_type(ty, ctx))
            for (dc, _), (x, xd) in reversed(list(zip(pieces, names))):
                out = S.PairMatch(dc, x, xd, out)
            return out, ty

        if isinstance(t, S.ProdMatch):
            ds, sty = self.term(ctx, t.scrutinee)
            if not isinstance(sty, (S.Product, S.Unit)):
                raise ChadTypeError("match", f"scrutinee has non-product type {sty}")
            factors = S.product_factors(sty)
            inner = ctx.extend_many(zip(t.names, factors))
            if len(inner) != len(ctx) + len(factors):
                raise ChadTypeError("match", "pattern shadows the context; uniquify first")
            db, ty = self.term(inner, t.body)
            x, xd, z, zd = self.fresh(), self.fresh(), self.fresh(), self.fresh()
            n, k = len(ctx), len(factors)
            cot = S.LinLet(
                S.LinApp(S.Var(zd), S.LinVar()),
                self._gather(S.LinVar(), n, k, lambda rest: S.LinApp(S.Var(xd), S.LinTuple(rest) if k != 1 else rest[0])),
            )
            body = S.PairMatch(db, z, zd, S.Pair(S.Var(z), S.LinAbs(cot), sigma_type(ty, ctx)))
            return S.PairMatch(ds, x, xd, S.ProdMatch(S.Var(x), t.names, body)), ty

        if isinstance(t, S.Iterate):
            if t.var not in ctx:
                raise ChadTypeError("iterate", f"loop variable {t.var} is not in scope")
            captured = free_vars(t.body) - {t.var}
            if captured:
                local = ctx.restrict(captured | {t.var})
                expanded = desugar_iterate_with_context(
                    local, t.var, t.body, avoid=set(ctx.names()) | self.used | all_names(t.body)
                )
                self.used |= all_names(expanded)
                return self.term(ctx, expanded)
            return self.iterate(ctx, t)

        raise ChadTypeError("syntax", f"{type(t).__name__} is not a source term")

    def iterate(self, ctx: Context, t: S.Iterate):
        x = t.var
        state = ctx[x]
        f, body_ty = self.term(Context([(x, state)]), t.body)
        if not isinstance(body_ty, S.Sum) or len(body_ty.summands) != 2 or body_ty.summands[1] != state:
            raise ChadTypeError("iterate", f"loop body has type {body_ty}")
        ty = body_ty.summands[0]
        a, ad = self.fresh(), self.fresh()
        loop_body = S.PairMatch(f, a, ad, S.Var(a))
        algebra = S.PairMatch(f, a, ad, S.LinApp(S.Var(ad), S.LinVar()))
        fold = S.Fold(x, loop_body, S.LinVar(), algebra)
        cot = self.coproj(ctx.index(x), len(ctx), fold)
        return S.Pair(S.Iterate(x, loop_body), S.LinAbs(cot), sigma_type(ty, ctx)), ty


def chad_term(ctx, term, transformer: Transformer | None = None) -> ChadOutput:
    """Transform a well-typed source term in context ``ctx``."""
    ctx = ctx if isinstance(ctx, Context) else Context(ctx)
    term = uniquify(term, ctx.names())
    tr = transformer or Transformer()
    tr.used |= set(ctx.names()) | all_names(term)
    out, ty = tr.term(ctx, term)
    primal_ctx, _ = chad_context(ctx)
    return ChadOutput(primal_ctx, out, sigma_type(ty, ctx), ty)


def transform_program(program: S.Program, transformer: Transformer | None = None) -> S.Program:
    """Target program with the same parameters and the paired result type."""
    typecheck_program(program)
    res = chad_term(program.params, program.body, transformer)
    return S.Program(program.name, program.params, res.type, res.term, program.comments)


def structure_preservation_probe(t1: S.Program, t2: S.Program, points, rtol: float = 1e-10, fuel=None):
    """Compare ``D[t2 ∘ t1]`` with the composite of ``D[t2]`` and ``D[t1]`` at sample points.

    Returns ``(ok, report)`` where the report lists the disagreeing points.
    """
    from .deriv_check import composite_agreement

    return composite_agreement(t1, t2, points, rtol=rtol, fuel=fuel)
