"""Iteration with context, and binder uniquification."""

from __future__ import annotations

from .. import syntax as S
from ..terms import all_names, fresh, free_vars
from .typing import Context, typecheck_source


def desugar_iterate_with_context(ctx, var: str, body, avoid=()):
    """Rewrite ``iterate var. body`` whose body reads the context ``ctx``.

    The loop state becomes the tuple of the context and the original state,
    so the resulting ``Iterate`` only mentions its own loop variable:

        let w = (z1, ..., zn, var) in
        iterate w {
          match w with (z1, ..., zn, var) ->
          case body of { in1 u -> in1 u | in2 u2 -> in2 (z1, ..., zn, u2) }
        }

    ``ctx`` must contain ``var``. Entries of ``ctx`` shadowed by ``var`` are
    dropped. With an empty remaining context the plain loop is returned.
    """
    ctx = ctx if isinstance(ctx, Context) else Context(ctx)
    state_ty = ctx[var]
    result_ty = typecheck_source(ctx, S.Iterate(var, body))
    gamma = [(n, t) for n, t in ctx.items() if n != var]
    if not gamma:
        return S.Iterate(var, body)
    used = set(all_names(body)) | set(ctx.names()) | set(avoid) | {var}
    w = fresh("w", used)
    used.add(w)
    u = fresh("u", used)
    used.add(u)
    u2 = fresh("u", used)
    names = [n for n, _ in gamma] + [var]
    state = S.Product([t for _, t in gamma] + [state_ty])
    out_sum = S.Sum((result_ty, state))
    step = S.SumMatch(
        body,
        (
            (u, S.Inj(1, S.Var(u), out_sum)),
            (u2, S.Inj(2, S.Tuple([S.Var(n) for n, _ in gamma] + [S.Var(u2)]), out_sum)),
        ),
    )
    loop = S.Iterate(w, S.ProdMatch(S.Var(w), names, step))
    return S.Let(w, S.Tuple([S.Var(n) for n in names]), loop)


def needs_context(it: S.Iterate) -> bool:
    return bool(free_vars(it.body) - {it.var})


def uniquify(term, ctx_names=()):
    """Rename every binder so that no name is bound twice or shadows ``ctx_names``.

    Loop variables are free and bound at once; they keep the name of the
    state they start from.
    """
    used = set(ctx_names) | free_vars(term) | all_names(term)
    seen = set(ctx_names) | free_vars(term)
    return _uniq(term, {n: n for n in free_vars(term)}, used, seen)


def _pick(name, used, seen):
    if name not in seen:
        seen.add(name)
        used.add(name)
        return name
    n2 = fresh(name, used)
    used.add(n2)
    seen.add(n2)
    return n2


def _uniq(t, env, used, seen):
    if isinstance(t, S.Var):
        return S.Var(env.get(t.name, t.name))
    if isinstance(t, S.Op):
        return S.Op(t.name, [_uniq(a, env, used, seen) for a in t.args], t.params)
    if isinstance(t, S.Let):
        bound = _uniq(t.bound, env, used, seen)
        n = _pick(t.name, used, seen)
        return S.Let(n, bound, _uniq(t.body, {**env, t.name: n}, used, seen))
    if isinstance(t, S.Inj):
        return S.Inj(t.index, _uniq(t.payload, env, used, seen), t.annotation)
    if isinstance(t, S.SumMatch):
        scrut = _uniq(t.scrutinee, env, used, seen)
        branches = []
        for b, body in t.branches:
            n = _pick(b, used, seen)
            branches.append((n, _uniq(body, {**env, b: n}, used, seen)))
        return S.SumMatch(scrut, branches, t.annotation)
    if isinstance(t, S.Tuple):
        return S.Tuple([_uniq(c, env, used, seen) for c in t.components])
    if isinstance(t, S.ProdMatch):
        scrut = _uniq(t.scrutinee, env, used, seen)
        names = [_pick(n, used, seen) for n in t.names]
        return S.ProdMatch(scrut, names, _uniq(t.body, {**env, **dict(zip(t.names, names))}, used, seen))
    if isinstance(t, S.Iterate):
        x = env.get(t.var, t.var)
        return S.Iterate(x, _uniq(t.body, {**env, t.var: x}, used, seen))
    raise TypeError(f"not a source term: {t!r}")
