"""Random well-typed terms, values and cotangents for property tests.

Generators are driven by a ``numpy.random.Generator`` so every draw is
reproducible from a seed. Source terms are built type-directed: a term of
type ``τ`` is either a variable of that type, an introduction form for
``τ`` or an elimination form (let, match, case, primitive op, bounded loop)
whose pieces are generated recursively at smaller depth.

Loops follow one template that always terminates: the state carries a
counter that is incremented on every step and compared against a
non-integer bound by ``decider``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import syntax as S
from .source_interp import InjV
from .source_lang.typing import Context

R1 = S.Real(1)
R2 = S.Real(2)
PROD = S.Product((R1, R2))
SUM = S.Sum((R1, R2))
UNIT = S.Unit()

SOURCE_TYPES = (R1, R2, PROD, SUM)
STANDARD_CONTEXT = Context([("a", R1), ("b", R2), ("c", PROD), ("d", SUM)])

LINEAR_TYPES = (S.CReal(1), S.CReal(2), S.Biproduct((S.CReal(1), S.CReal(2))))


@dataclass
class Gen:
    rng: np.random.Generator
    ops: bool = True  # allow primitive operations (values have none)
    loops: bool = True
    partial: bool = False  # allow partial ops in generated terms
    counter: list = field(default_factory=lambda: [0])

    def fresh(self, stem: str = "v") -> str:
        self.counter[0] += 1
        return f"{stem}{self.counter[0]}"

    def choice(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def coin(self, p: float = 0.5) -> bool:
        return bool(self.rng.random() < p)

    def values_only(self) -> "Gen":
        return Gen(self.rng, ops=False, loops=False, partial=False, counter=self.counter)

    # --- source terms ------------------------------------------------------

    def term(self, ctx: Context, ty, depth: int = 3):
        vars_ = [S.Var(n) for n, t in zip(ctx.names(), ctx.types()) if t == ty]
        if depth <= 0:
            return self.choice(vars_) if vars_ and self.coin(0.7) else self._leaf(ctx, ty)
        makers = [self._intro, self._let, self._match, self._case]
        if vars_:
            makers += [lambda c, t, d: self.choice(vars_)] * 2
        if self.ops and isinstance(ty, S.Real):
            makers += [self._op, self._op]
        if self.loops and self.coin(0.3):
            makers.append(self._loop)
        return self.choice(makers)(ctx, ty, depth)

    def _leaf(self, ctx, ty):
        if isinstance(ty, S.Real):
            vars_ = [S.Var(n) for n, t in zip(ctx.names(), ctx.types()) if t == ty]
            if vars_:
                return self.choice(vars_)
            if self.ops:
                return S.Op("cnst", (), tuple(round(float(x), 3) for x in self.rng.uniform(-2, 2, ty.n)))
            raise ValueError(f"no value of type {ty} in context")
        return self._intro(ctx, ty, 0)

    def _intro(self, ctx, ty, depth):
        if isinstance(ty, (S.Product, S.Unit)):
            return S.Tuple([self.term(ctx, f, depth - 1) for f in S.product_factors(ty)])
        if isinstance(ty, S.Sum):
            i = int(self.rng.integers(len(ty.summands))) + 1
            return S.Inj(i, self.term(ctx, ty.summands[i - 1], depth - 1), ty)
        return self._leaf(ctx, ty) if depth <= 0 else self.term(ctx, ty, depth - 1)

    def _let(self, ctx, ty, depth):
        bty = self.choice(SOURCE_TYPES)
        x = self.fresh()
        bound = self.term(ctx, bty, depth - 1)
        return S.Let(x, bound, self.term(ctx.extend(x, bty), ty, depth - 1))

    def _match(self, ctx, ty, depth):
        names = [self.fresh(), self.fresh()]
        scrut = self.term(ctx, PROD, depth - 1)
        return S.ProdMatch(scrut, names, self.term(ctx.extend_many(zip(names, PROD.factors)), ty, depth - 1))

    def _case(self, ctx, ty, depth):
        if self.ops and self.partial and self.coin(0.3):
            scrut, sty = S.Op("sign", [self.term(ctx, R1, depth - 1)]), S.Sum((R1, R1))
        else:
            scrut, sty = self.term(ctx, SUM, depth - 1), SUM
        branches = []
        for sty_i in sty.summands:
            y = self.fresh()
            branches.append((y, self.term(ctx.extend(y, sty_i), ty, depth - 1)))
        return S.SumMatch(scrut, branches)

    def _op(self, ctx, ty, depth):
        n = ty.n
        sub = lambda t: self.term(ctx, t, depth - 1)  # noqa: E731
        options = ["add", "mul", "sigmoid", "cnst"]
        if n == 1:
            options += ["sum", "matvec"]
            if self.partial:
                options += ["recpr", "norm"]
        elif self.partial:
            options.append("normalize")
        name = self.choice(options)
        if name in ("add", "mul"):
            return S.Op(name, [sub(ty), sub(ty)])
        if name in ("sigmoid", "normalize", "recpr"):
            return S.Op(name, [sub(ty)])
        if name == "cnst":
            return S.Op("cnst", (), tuple(round(float(x), 3) for x in self.rng.uniform(-2, 2, n)))
        if name == "matvec":
            return S.Op("matvec", [sub(R2), sub(R2)], (1, 2, 1))
        return S.Op(name, [sub(R2)])

    def _loop(self, ctx, ty, depth):
        init = self.term(ctx, ty, depth - 1)
        return self.loop(ctx, ty, depth, init)

    def loop(self, ctx, ty, depth, init, captures: bool = True):
        """``iterate`` over ``(counter, payload)`` running a fixed number of steps."""
        s, k, u, k1, k2 = (self.fresh(n) for n in ("s", "k", "u", "k", "k"))
        state = S.Product((R1, ty))
        res = S.Sum((ty, state))
        inner = (ctx if captures else Context()).extend_many([(k, R1), (u, ty), (k2, R1)])
        step = self.choice([0.5, 1.5, 2.5, 3.5])
        update = self.term(inner, ty, depth - 1)
        body = S.ProdMatch(
            S.Var(s),
            [k, u],
            S.SumMatch(
                S.Op("decider", [S.Var(k)], (step,)),
                [
                    (k1, S.Inj(1, S.Var(u), res)),
                    (k2, S.Inj(2, S.Tuple([S.Op("add", [S.Var(k2), S.Op("cnst", [], (1.0,))]), update]), res)),
                ],
            ),
        )
        start = S.Tuple([S.Op("cnst", [], (0.0,)), init])
        return S.Let(s, start, S.Iterate(s, body))

    def value(self, ctx: Context, ty, depth: int = 2):
        return self.values_only().term(ctx, ty, depth)

    # --- linear terms ------------------------------------------------------

    def lin(self, ctx: Context, dom, cod, depth: int = 3):
        """Linear term of type ``cod`` in which ``@v`` has type ``dom``."""
        if depth <= 0:
            if dom == cod and self.coin(0.7):
                return S.LinVar()
            if isinstance(cod, S.Biproduct):
                return S.LinTuple([self.lin(ctx, dom, f, 0) for f in cod.factors])
            return S.LinVar() if dom == cod else S.Zero()
        makers = [self._lzero, self._lplus, self._lproj, self._llet, self._lapp, self._lcart]
        if dom == cod:
            makers += [lambda c, a, b, d: S.LinVar()] * 2
        if isinstance(cod, S.Biproduct):
            makers += [self._ltuple] * 2
        if isinstance(cod, S.CReal):
            makers += [self._lop] * 2
        return self.choice(makers)(ctx, dom, cod, depth)

    def _lzero(self, ctx, dom, cod, depth):
        return S.Zero()

    def _lplus(self, ctx, dom, cod, depth):
        return S.Plus(self.lin(ctx, dom, cod, depth - 1), self.lin(ctx, dom, cod, depth - 1))

    def _ltuple(self, ctx, dom, cod, depth):
        return S.LinTuple([self.lin(ctx, dom, f, depth - 1) for f in cod.factors])

    def _lproj(self, ctx, dom, cod, depth):
        other = self.choice(LINEAR_TYPES[:2])
        i = int(self.rng.integers(2)) + 1
        factors = (cod, other) if i == 1 else (other, cod)
        return S.LinProj(i, self.lin(ctx, dom, S.Biproduct(factors), depth - 1))

    def _llet(self, ctx, dom, cod, depth):
        mid = self.choice(LINEAR_TYPES)
        return S.LinLet(self.lin(ctx, dom, mid, depth - 1), self.lin(ctx, mid, cod, depth - 1))

    def _lapp(self, ctx, dom, cod, depth):
        mid = self.choice(LINEAR_TYPES)
        fun = S.LinAbs(self.lin(ctx, mid, cod, depth - 1), mid)
        return S.LinApp(fun, self.lin(ctx, dom, mid, depth - 1))

    def _lcart(self, ctx, dom, cod, depth):
        if self.coin():
            x = self.fresh()
            bty = self.choice((R1, R2))
            bound = Gen(self.rng, ops=True, loops=False, counter=self.counter).term(ctx, bty, 1)
            return S.Let(x, bound, self.lin(ctx.extend(x, bty), dom, cod, depth - 1))
        branches = []
        for sty in SUM.summands:
            y = self.fresh()
            branches.append((y, self.lin(ctx.extend(y, sty), dom, cod, depth - 1)))
        scrut = [n for n, t in zip(ctx.names(), ctx.types()) if t == SUM]
        if not scrut:
            return self._lplus(ctx, dom, cod, depth)
        return S.SumMatch(S.Var(self.choice(scrut)), branches)

    def _lop(self, ctx, dom, cod, depth):
        n = cod.n
        reals = [nm for nm, t in zip(ctx.names(), ctx.types()) if t == S.Real(n)]
        if not reals:
            return self._lplus(ctx, dom, cod, depth)
        pick = lambda: S.Var(self.choice(reals))  # noqa: E731
        name = self.choice(["sigmoid", "mul", "sum", "add"])
        if name == "sigmoid":
            return S.LOp("sigmoid", [pick()], self.lin(ctx, dom, cod, depth - 1))
        if name == "sum":
            return S.LOp("sum", [pick()], self.lin(ctx, dom, S.CReal(1), depth - 1))
        i = int(self.rng.integers(2)) + 1
        return S.LinProj(i, S.LOp(name, [pick(), pick()], self.lin(ctx, dom, cod, depth - 1)))


# ---------------------------------------------------------------------------
# runtime samples


def sample_value(rng: np.random.Generator, ty, low: float = -2.0, high: float = 2.0):
    if isinstance(ty, S.Real):
        return rng.uniform(low, high, ty.n)
    if isinstance(ty, (S.Product, S.Unit)):
        return tuple(sample_value(rng, f, low, high) for f in S.product_factors(ty))
    if isinstance(ty, S.Sum):
        i = int(rng.integers(len(ty.summands))) + 1
        return InjV(i, sample_value(rng, ty.summands[i - 1], low, high))
    raise ValueError(f"cannot sample a value of type {ty}")


def sample_env(rng: np.random.Generator, ctx: Context) -> dict:
    return {n: sample_value(rng, t) for n, t in zip(ctx.names(), ctx.types())}


def sample_cotangent(rng: np.random.Generator, ltype):
    if isinstance(ltype, S.CReal):
        return rng.normal(size=ltype.n)
    if isinstance(ltype, S.LUnit):
        return ()
    if isinstance(ltype, S.Biproduct):
        return tuple(sample_cotangent(rng, f) for f in ltype.factors)
    raise ValueError(f"cannot sample a cotangent of {ltype}")
