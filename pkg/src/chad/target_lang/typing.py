"""Bidirectional type checker for the target language.

There are two judgments. The cartesian one, ``Γ ⊢ t : τ``, types ordinary
terms. The linear one, ``Γ; v : ρ ⊢ t : ρ'``, types terms over the single
linear identifier. Both have an inference mode and a checking mode, and
checking is needed for ``0``, unannotated linear abstractions and ``fold``.

Types depend on terms through type-level ``case``. Eliminators therefore
refine what they know: inside ``case s of in_i y -> ...`` occurrences of
``s`` in the context and in the expected type become ``in_i y``; inside
``match s with (y1, ..., yk) -> ...`` they become ``(y1, ..., yk)``; inside
``split s with (a, b) -> ...`` the first projection of ``s`` becomes ``a``.
Binders that would shadow a context entry are renamed first, so contexts
never contain duplicates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import primitives
from .. import syntax as S
from ..errors import ChadError, ChadTypeError, TypeEqUnknown
from ..source_lang.typing import Context
from ..terms import abstract, all_names, children, fresh, free_vars, replace_subterm, subst, subterms
from .equality import EQUAL, UNKNOWN, full_normalize, normalize, type_equal


def sigma_fst(term, n1="_a", n2="_b"):
    return S.PairMatch(term, n1, n2, S.Var(n1))


def op_cotangent_type(name, params, args, out_dims):
    """Linear type of cotangents at the output of ``op name[params](args)``."""
    if len(out_dims) == 1:
        return S.CReal(out_dims[0])
    return S.TypeCase(S.Op(name, args, params), tuple(("p", S.CReal(m)) for m in out_dims))


@dataclass
class CheckStats:
    equalities: int = 0
    unknown: int = 0


class TargetChecker:
    def __init__(self):
        self.stats = CheckStats()

    # --- helpers ---------------------------------------------------------

    def expect_equal(self, got, want, rule, what="term"):
        self.stats.equalities += 1
        verdict = type_equal(got, want)
        if verdict is EQUAL:
            return
        if verdict is UNKNOWN:
            self.stats.unknown += 1
            raise TypeEqUnknown(rule, f"cannot decide whether {what} type {got} equals {want}")
        raise ChadTypeError(rule, f"{what} has type {got}, expected {want}")

    def _sub(self, parent, child, fn, *args):
        try:
            return fn(*args)
        except ChadTypeError as e:
            idx = next((i for i, c in enumerate(children(parent)) if c is child), -1)
            raise e.at(idx) from None

    @staticmethod
    def _fresh_binders(ctx: Context, names, bodies, extra=()):
        """Rename binders that clash with the context; returns (names, bodies)."""
        taken = set(ctx.names())
        if not any(n in taken for n in names):
            return list(names), list(bodies)
        avoid = taken | set(names) | set(extra)
        for b in bodies:
            avoid |= all_names(b) | free_vars(b)
        renaming, new = {}, []
        for n in names:
            if n in taken:
                n2 = fresh(n, avoid)
                avoid.add(n2)
                renaming[n] = S.Var(n2)
                new.append(n2)
            else:
                new.append(n)
        return new, [subst(b, renaming) for b in bodies]

    @staticmethod
    def _refine(ctx: Context, lin, expected, pattern, replacement):
        def r(ty):
            return None if ty is None else replace_subterm(ty, pattern, replacement)

        new_ctx = Context(tuple((n, r(t)) for n, t in ctx.items()))
        return new_ctx, r(lin), r(expected)

    def _whnf(self, ty):
        return normalize(ty)

    # --- kinds -----------------------------------------------------------

    def check_ctype(self, ctx: Context, ty):
        if isinstance(ty, (S.Real, S.Unit, S.Void)):
            return
        if isinstance(ty, (S.Product,)):
            for f in ty.factors:
                self.check_ctype(ctx, f)
            return
        if isinstance(ty, S.Sum):
            for f in ty.summands:
                self.check_ctype(ctx, f)
            return
        if isinstance(ty, S.LinFun):
            self.check_ltype(ctx, ty.dom)
            self.check_ltype(ctx, ty.cod)
            return
        if isinstance(ty, S.Sigma):
            self.check_ctype(ctx, ty.first)
            self.check_ctype(ctx.extend(ty.binder, ty.first), ty.second)
            return
        raise ChadTypeError("kind", f"{ty} is not a cartesian type")

    def check_ltype(self, ctx: Context, ty):
        if isinstance(ty, (S.CReal, S.LUnit)):
            return
        if isinstance(ty, S.Biproduct):
            for f in ty.factors:
                self.check_ltype(ctx, f)
            return
        if isinstance(ty, S.TypeCase):
            st = normalize(self.infer(ctx, ty.scrutinee))
            if not isinstance(st, (S.Sum, S.Void)):
                raise ChadTypeError("kind", f"type-level case on non-sum {st}")
            summands = S.sum_summands(st)
            if len(summands) != len(ty.branches):
                raise ChadTypeError("kind", "type-level case arity does not match the scrutinee")
            for (b, bt), st_i in zip(ty.branches, summands):
                self.check_ltype(ctx.extend(b, st_i), bt)
            return
        raise ChadTypeError("kind", f"{ty} is not a linear type")

    # --- cartesian judgment ---------------------------------------------

    def infer(self, ctx: Context, t):
        return self.cart(ctx, t, None)

    def check(self, ctx: Context, t, expected):
        got = self.cart(ctx, t, expected)
        if expected is not None:
            self.expect_equal(got, expected, type(t).__name__.lower())
        return expected

    def cart(self, ctx: Context, t, expected):
        if isinstance(t, S.Var):
            ty = ctx.get(t.name)
            if ty is None:
                raise ChadTypeError("var", f"unbound variable {t.name}")
            return ty
        if isinstance(t, S.Op):
            arg_types = [normalize(self._sub(t, a, self.infer, ctx, a)) for a in t.args]
            dims = []
            for i, at in enumerate(arg_types):
                if not isinstance(at, S.Real):
                    raise ChadTypeError("op", f"argument {i + 1} of {t.name} has type {at}")
                dims.append(at.n)
            try:
                op = primitives.resolve(t.name, t.params, dims)
            except ChadError as e:
                raise ChadTypeError("op", str(e)) from None
            outs = [S.Real(m) for m in op.out_dims]
            return outs[0] if len(outs) == 1 else S.Sum(outs)
        if isinstance(t, S.Let):
            return self.let(ctx, None, t, expected, linear=False)
        if isinstance(t, S.Inj):
            self.check_ctype(ctx, t.annotation)
            self._sub(t, t.payload, self.check, ctx, t.payload, t.annotation.summands[t.index - 1])
            return t.annotation
        if isinstance(t, S.SumMatch):
            return self.sum_match(ctx, None, t, expected, linear=False)
        if isinstance(t, S.Tuple):
            want = None
            if expected is not None:
                e = normalize(expected)
                if isinstance(e, (S.Product, S.Unit)) and len(S.product_factors(e)) == len(t.components):
                    want = S.product_factors(e)
            if want is None:
                return S.product([self._sub(t, c, self.infer, ctx, c) for c in t.components])
            for c, w in zip(t.components, want):
                self._sub(t, c, self.check, ctx, c, w)
            return expected
        if isinstance(t, S.ProdMatch):
            return self.prod_match(ctx, None, t, expected, linear=False)
        if isinstance(t, S.Iterate):
            state = ctx.get(t.var)
            if state is None:
                raise ChadTypeError("iterate", f"loop variable {t.var} is not in scope")
            body = normalize(self._sub(t, t.body, self.infer, ctx, t.body))
            if not isinstance(body, S.Sum) or len(body.summands) != 2:
                raise ChadTypeError("iterate", f"loop body has type {body}, expected a binary sum")
            self.expect_equal(body.summands[1], state, "iterate", "continuation")
            return body.summands[0]
        if isinstance(t, S.Pair):
            ann = t.annotation if t.annotation is not None else expected
            if ann is None:
                raise ChadTypeError("pair", "cannot infer the type of an unannotated pair")
            sig = normalize(ann)
            if not isinstance(sig, S.Sigma):
                raise ChadTypeError("pair", f"pair checked against non-sigma type {ann}")
            if t.annotation is not None:
                self.check_ctype(ctx, t.annotation)
            self._sub(t, t.first, self.check, ctx, t.first, sig.first)
            self._sub(t, t.second, self.check, ctx, t.second, subst(sig.second, {sig.binder: t.first}))
            return ann
        if isinstance(t, S.PairMatch):
            return self.pair_match(ctx, None, t, expected, linear=False)
        if isinstance(t, S.LinAbs):
            dom = t.domain
            cod = None
            if expected is not None:
                e = normalize(expected)
                if not isinstance(e, S.LinFun):
                    raise ChadTypeError("lam", f"linear abstraction checked against {expected}")
                if dom is not None:
                    self.expect_equal(dom, e.dom, "lam", "domain")
                dom, cod = e.dom, e.cod
            elif dom is None:
                raise ChadTypeError("lam", "cannot infer the domain of an unannotated linear abstraction")
            if t.domain is not None:
                self.check_ltype(ctx, t.domain)
            got = self._sub(t, t.body, self.lin, ctx, dom, t.body, cod)
            return S.LinFun(dom, got if cod is None else cod)
        if isinstance(t, S.LinVar):
            raise ChadTypeError("linvar", "the linear identifier is not in scope in a cartesian term")
        raise ChadTypeError("cart", f"{type(t).__name__} is not a cartesian term")

    # --- eliminators shared by both judgments ---------------------------

    def _body(self, ctx, lin, body, expected, linear):
        if linear:
            return self.lin(ctx, lin, body, expected)
        return self.check(ctx, body, expected) if expected is not None else self.infer(ctx, body)

    def let(self, ctx, lin, t: S.Let, expected, linear):
        bound = self._sub(t, t.bound, self.infer, ctx, t.bound)
        (name,), (body,) = self._fresh_binders(ctx, [t.name], [t.body], free_vars(t.bound))
        inner_exp = None
        if expected is not None:
            inner_exp = abstract(expected, t.bound, name) if not isinstance(t.bound, S.Var) else expected
        ty = self._sub(t, t.body, self._body, ctx.extend(name, bound), lin, body, inner_exp, linear)
        if expected is not None:
            return expected
        return subst(ty, {name: t.bound})

    def sum_match(self, ctx, lin, t: S.SumMatch, expected, linear):
        scrut_ty = normalize(self._sub(t, t.scrutinee, self.infer, ctx, t.scrutinee))
        if not isinstance(scrut_ty, (S.Sum, S.Void)):
            raise ChadTypeError("case", f"scrutinee has non-sum type {scrut_ty}")
        summands = S.sum_summands(scrut_ty)
        if len(summands) != len(t.branches):
            raise ChadTypeError("case", f"{len(t.branches)} branches for {len(summands)} summands")
        if expected is None and t.annotation is not None:
            expected = t.annotation
        result = expected
        for i, ((b, body), ty) in enumerate(zip(t.branches, summands), 1):
            (b2,), (body2,) = self._fresh_binders(ctx, [b], [body], free_vars(t.scrutinee))
            rctx, rlin, rexp = ctx, lin, result
            if isinstance(scrut_ty, S.Sum):
                inj = S.Inj(i, S.Var(b2), scrut_ty)
                rctx, rlin, rexp = self._refine(ctx, lin, result, t.scrutinee, inj)
            bt = self._sub(t, body, self._body, rctx.extend(b2, ty), rlin, body2, rexp, linear)
            if result is None:
                if b2 in free_vars(bt):
                    raise ChadTypeError("case", f"branch type {bt} depends on the branch binder")
                result = bt
        if result is None:
            raise ChadTypeError("case", "cannot infer the type of an empty case")
        return result

    def prod_match(self, ctx, lin, t: S.ProdMatch, expected, linear):
        scrut_ty = normalize(self._sub(t, t.scrutinee, self.infer, ctx, t.scrutinee))
        if not isinstance(scrut_ty, (S.Product, S.Unit)):
            raise ChadTypeError("match", f"scrutinee has non-product type {scrut_ty}")
        factors = S.product_factors(scrut_ty)
        if len(factors) != len(t.names):
            raise ChadTypeError("match", f"pattern binds {len(t.names)} names, product has {len(factors)}")
        if len(set(t.names)) != len(t.names):
            raise ChadTypeError("match", "pattern names must be distinct")
        names, (body,) = self._fresh_binders(ctx, t.names, [t.body], free_vars(t.scrutinee))
        tup = S.Tuple([S.Var(n) for n in names])
        rctx, rlin, rexp = self._refine(ctx, lin, expected, t.scrutinee, tup)
        ty = self._sub(t, t.body, self._body, rctx.extend_many(zip(names, factors)), rlin, body, rexp, linear)
        if expected is not None:
            return expected
        if set(names) & free_vars(ty):
            ty = subst(ty, {n: _proj_of(t.scrutinee, i, len(names), names) for i, n in enumerate(names)})
        return ty

    def pair_match(self, ctx, lin, t: S.PairMatch, expected, linear):
        scrut_ty = normalize(self._sub(t, t.scrutinee, self.infer, ctx, t.scrutinee))
        if not isinstance(scrut_ty, S.Sigma):
            raise ChadTypeError("split", f"scrutinee has non-sigma type {scrut_ty}")
        (a, b), (body,) = self._fresh_binders(
            ctx, [t.first_name, t.second_name], [t.body], free_vars(t.scrutinee)
        )
        if a == b:
            raise ChadTypeError("split", "pair pattern names must be distinct")
        second = subst(scrut_ty.second, {scrut_ty.binder: S.Var(a)})
        rctx, rlin, rexp = self._refine(ctx, lin, expected, sigma_fst(t.scrutinee), S.Var(a))
        inner = rctx.extend(a, scrut_ty.first).extend(b, second)
        ty = self._sub(t, t.body, self._body, inner, rlin, body, rexp, linear)
        if expected is not None:
            return expected
        if a in free_vars(ty):
            ty = subst(ty, {a: sigma_fst(t.scrutinee)})
        if b in free_vars(ty):
            raise ChadTypeError("split", f"result type {ty} depends on the second component")
        return ty

    # --- linear judgment -------------------------------------------------

    def lin(self, ctx: Context, lin, t, expected=None):
        got = self._lin(ctx, lin, t, expected)
        if expected is not None and got is not expected:
            self.expect_equal(got, expected, type(t).__name__.lower())
            return expected
        return got

    def _lin(self, ctx: Context, lin, t, expected):
        if isinstance(t, S.LinVar):
            if lin is None:
                raise ChadTypeError("linvar", "no linear identifier in scope")
            return lin
        if isinstance(t, S.LinLet):
            bound = self._sub(t, t.bound, self.lin, ctx, lin, t.bound)
            return self._sub(t, t.body, self.lin, ctx, bound, t.body, expected)
        if isinstance(t, S.LOp):
            arg_types = [normalize(self._sub(t, a, self.infer, ctx, a)) for a in t.args]
            dims = []
            for i, at in enumerate(arg_types):
                if not isinstance(at, S.Real):
                    raise ChadTypeError("lop", f"argument {i + 1} of {t.name} has type {at}")
                dims.append(at.n)
            try:
                op = primitives.resolve(t.name, t.params, dims)
            except ChadError as e:
                raise ChadTypeError("lop", str(e)) from None
            want = op_cotangent_type(t.name, t.params, t.args, op.out_dims)
            self._sub(t, t.lin_arg, self.lin, ctx, lin, t.lin_arg, want)
            return S.biproduct([S.CReal(n) for n in op.in_dims])
        if isinstance(t, S.LinTuple):
            if len(t.components) == 1:
                raise ChadTypeError("ltuple", "unary linear tuples are not allowed")
            factors = None
            if expected is not None:
                e = normalize(expected)
                if isinstance(e, (S.Biproduct, S.LUnit)) and len(S.biproduct_factors(e)) == len(t.components):
                    factors = S.biproduct_factors(e)
                else:
                    raise ChadTypeError("ltuple", f"linear tuple checked against {expected}")
            if factors is None:
                return S.biproduct([self._sub(t, c, self.lin, ctx, lin, c) for c in t.components])
            for c, f in zip(t.components, factors):
                self._sub(t, c, self.lin, ctx, lin, c, f)
            return expected
        if isinstance(t, S.LinProj):
            inner = normalize(self._sub(t, t.term, self.lin, ctx, lin, t.term))
            if not isinstance(inner, S.Biproduct) or not 1 <= t.index <= len(inner.factors):
                raise ChadTypeError("lprj", f"projection {t.index} out of {inner}")
            return inner.factors[t.index - 1]
        if isinstance(t, S.LinApp):
            fun = normalize(self._sub(t, t.fun, self.infer, ctx, t.fun))
            if not isinstance(fun, S.LinFun):
                raise ChadTypeError("lapp", f"applying a non-linear-function of type {fun}")
            self._sub(t, t.arg, self.lin, ctx, lin, t.arg, fun.dom)
            return fun.cod
        if isinstance(t, S.Zero):
            if expected is None:
                raise ChadTypeError("zero", "cannot infer the type of 0")
            return expected
        if isinstance(t, S.Plus):
            if expected is None:
                left = self._sub(t, t.left, self.lin, ctx, lin, t.left)
            else:
                left = self._sub(t, t.left, self.lin, ctx, lin, t.left, expected)
            self._sub(t, t.right, self.lin, ctx, lin, t.right, left)
            return left
        if isinstance(t, S.Fold):
            return self.fold(ctx, lin, t, expected)
        if isinstance(t, S.Let):
            return self.let(ctx, lin, t, expected, linear=True)
        if isinstance(t, S.SumMatch):
            return self.sum_match(ctx, lin, t, expected, linear=True)
        if isinstance(t, S.ProdMatch):
            return self.prod_match(ctx, lin, t, expected, linear=True)
        if isinstance(t, S.PairMatch):
            return self.pair_match(ctx, lin, t, expected, linear=True)
        raise ChadTypeError("lin", f"{type(t).__name__} is not a linear term")

    def fold(self, ctx: Context, lin, t: S.Fold, expected):
        if expected is None:
            raise ChadTypeError("fold", "fold is only checked against a known result type")
        x = t.loop_var
        state = ctx.get(x)
        if state is None:
            raise ChadTypeError("fold", f"loop variable {x} is not in scope")
        body = normalize(self._sub(t, t.loop_body, self.infer, ctx, t.loop_body))
        if not isinstance(body, S.Sum) or len(body.summands) != 2:
            raise ChadTypeError("fold", f"loop body has type {body}, expected a binary sum")
        self.expect_equal(body.summands[1], state, "fold", "continuation")
        seed = self._sub(t, t.seed, self.lin, ctx, lin, t.seed)
        y = fresh("y", all_names(seed) | all_names(t.loop_body) | set(ctx.names()) | all_names(expected))
        loop = S.Iterate(x, t.loop_body)
        exit_ty = abstract(seed, loop, y)
        if any(isinstance(n, S.Iterate) and n.var == x for n in subterms(exit_ty)):
            # the seed type may mention the loop in reduced form
            exit_ty = abstract(full_normalize(exit_ty), normalize(loop), y)
        alg_lin = S.TypeCase(t.loop_body, ((y, exit_ty), (x, expected)))
        self._sub(t, t.algebra, self.lin, ctx.extend(x, state), alg_lin, t.algebra, expected)
        return expected


def _proj_of(scrut, i, n, names):
    return S.ProdMatch(scrut, tuple(f"_m{k}" for k in range(n)), S.Var(f"_m{i}"))


def typecheck_target(ctx, lin=None, term=None, expected=None, linear=None):
    """Type of a target term.

    ``lin`` is the type of the linear identifier, or ``None`` when it is not
    in scope. ``linear`` selects the judgment and defaults to whether ``lin``
    is given. With ``expected`` the term is checked against that type.
    """
    checker = TargetChecker()
    ctx = ctx if isinstance(ctx, Context) else Context(ctx)
    if linear is None:
        linear = lin is not None
    if linear:
        return checker.lin(ctx, lin, term, expected)
    if expected is not None:
        return checker.check(ctx, term, expected)
    return checker.infer(ctx, term)
