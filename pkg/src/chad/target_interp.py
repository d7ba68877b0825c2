"""Evaluator for target programs.

The cartesian fragment extends the source evaluator with dependent pairs
and linear closures. Linear terms evaluate to cotangents: ``float64``
vectors, tuples for biproducts (``()`` is the unit cotangent) and the lazy
:data:`ZERO`, which stands for the zero of whatever type it is used at and
is only given a shape when it meets :func:`reify`.

``fold`` re-runs its loop to record the visited states ``a0 .. ak`` and then
pulls the seed back through the algebra from the last state to the first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import primitives
from . import syntax as S
from .outcome import Bottom, Defined, Fuel, FuelExhausted, UndefinedError
from .source_interp import (
    Evaluator,
    InjV,
    InternalTypeError,
    Trace,
    _fuel,
    coerce_value,
)


class _Zero:
    __slots__ = ()

    def __repr__(self):
        return "ZERO"


ZERO = _Zero()


@dataclass(frozen=True)
class PairV:
    first: object
    second: object


@dataclass(frozen=True)
class LinClosure:
    env: dict
    body: object

    def __hash__(self):
        return id(self)


def plus(a, b):
    """Monoid sum of cotangents, with ``ZERO`` as the unit."""
    if a is ZERO:
        return b
    if b is ZERO:
        return a
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        if a.shape != b.shape:
            raise InternalTypeError(f"adding cotangents of shapes {a.shape} and {b.shape}")
        return a + b
    if isinstance(a, tuple) and isinstance(b, tuple):
        if len(a) != len(b):
            raise InternalTypeError("adding biproduct cotangents of different arity")
        return tuple(plus(x, y) for x, y in zip(a, b))
    raise InternalTypeError(f"cannot add cotangents {a!r} and {b!r}")


class TargetEvaluator(Evaluator):
    """Cartesian and linear evaluation of target terms."""

    def plus(self, a, b):
        return plus(a, b)

    # --- cartesian -------------------------------------------------------

    def eval_other(self, env, t):
        raise InternalTypeError(f"{type(t).__name__} is not a cartesian term")

    # --- linear ----------------------------------------------------------

    def apply(self, f, c):
        if not isinstance(f, LinClosure):
            raise InternalTypeError(f"applying non-closure {f!r}")
        return self.lin(f.env, c, f.body)

    def lin(self, env: dict, v, t):
        if isinstance(t, S.LinVar):
            return v
        if isinstance(t, S.LinLet):
            return self.lin(env, self.lin(env, v, t.bound), t.body)
        if isinstance(t, S.LOp):
            args = tuple(self.eval(env, a) for a in t.args)
            w = self.lin(env, v, t.lin_arg)
            return self.lop(t, args, w)
        if isinstance(t, S.LinTuple):
            return tuple(self.lin(env, v, c) for c in t.components)
        if isinstance(t, S.LinProj):
            r = self.lin(env, v, t.term)
            if r is ZERO:
                return ZERO
            if not isinstance(r, tuple) or not 1 <= t.index <= len(r):
                raise InternalTypeError(f"projection {t.index} of {r!r}")
            return r[t.index - 1]
        if isinstance(t, S.LinApp):
            f = self.eval(env, t.fun)
            return self.apply(f, self.lin(env, v, t.arg))
        if isinstance(t, S.Zero):
            return ZERO
        if isinstance(t, S.Plus):
            left = self.lin(env, v, t.left)
            return self.plus(left, self.lin(env, v, t.right))
        if isinstance(t, S.Fold):
            seed = self.lin(env, v, t.seed)
            return self.fold(env, t.loop_var, t.loop_body, seed, t.algebra)
        if isinstance(t, S.Let):
            b = self.eval(env, t.bound)
            return self.lin({**env, t.name: b}, v, t.body)
        if isinstance(t, S.SumMatch):
            s = self.eval(env, t.scrutinee)
            if not isinstance(s, InjV) or not 1 <= s.index <= len(t.branches):
                raise InternalTypeError(f"case on non-injection {s!r}")
            name, body = t.branches[s.index - 1]
            return self.lin({**env, name: s.payload}, v, body)
        if isinstance(t, S.ProdMatch):
            s = self.eval(env, t.scrutinee)
            if not isinstance(s, tuple) or len(s) != len(t.names):
                raise InternalTypeError(f"match on non-tuple {s!r}")
            return self.lin({**env, **dict(zip(t.names, s))}, v, t.body)
        if isinstance(t, S.PairMatch):
            s = self.eval(env, t.scrutinee)
            if not isinstance(s, PairV):
                raise InternalTypeError(f"split on non-pair {s!r}")
            return self.lin({**env, t.first_name: s.first, t.second_name: s.second}, v, t.body)
        raise InternalTypeError(f"{type(t).__name__} is not a linear term")

    def lop(self, t: S.LOp, args, w):
        op = primitives.resolve(t.name, t.params, [a.shape[0] for a in args])
        res = op.primal(args)
        if not isinstance(res, tuple):
            raise UndefinedError()
        branch, _ = res
        if w is ZERO:
            grads = tuple(np.zeros(n) for n in op.in_dims)
        else:
            grads = tuple(op.transpose(args, branch, np.asarray(w, dtype=np.float64)))
        if len(grads) == 1:
            return grads[0]
        return grads

    def fold(self, env, x, loop_body, seed, algebra, trace: Trace | None = None):
        trace = trace if trace is not None else Trace()
        self.iterate(env, x, loop_body, env[x], trace)
        states = trace.states
        r = seed
        for a in reversed(states):
            r = self.lin({**env, x: a}, r, algebra)
        return r


def _eval_pair(ev, env, t):
    first = ev.eval(env, t.first)
    return PairV(first, ev.eval(env, t.second))


def _eval_pair_match(ev, env, t):
    v = ev.eval(env, t.scrutinee)
    if not isinstance(v, PairV):
        raise InternalTypeError(f"split on non-pair {v!r}")
    return ev.eval({**env, t.first_name: v.first, t.second_name: v.second}, t.body)


def _eval_lin_abs(ev, env, t):
    return LinClosure(env, t.body)


TargetEvaluator.dispatch = {
    **Evaluator.dispatch,
    S.Pair: _eval_pair,
    S.PairMatch: _eval_pair_match,
    S.LinAbs: _eval_lin_abs,
}


# ---------------------------------------------------------------------------
# cotangent utilities


def zero_of(ltype, env: dict, evaluator: TargetEvaluator | None = None):
    """Concrete zero of a linear type, resolving type-level cases in ``env``."""
    ev = evaluator
    if isinstance(ltype, S.CReal):
        return np.zeros(ltype.n)
    if isinstance(ltype, S.LUnit):
        return ()
    if isinstance(ltype, S.Biproduct):
        return tuple(zero_of(f, env, ev) for f in ltype.factors)
    if isinstance(ltype, S.TypeCase):
        return zero_of(*_resolve_case(ltype, env, ev))
    raise InternalTypeError(f"not a linear type: {ltype!r}")


def _resolve_case(ltype: S.TypeCase, env, ev):
    ev = ev or TargetEvaluator(Fuel(_fuel(None).limit))
    s = ev.eval(env, ltype.scrutinee)
    if not isinstance(s, InjV):
        raise InternalTypeError(f"type-level case on non-injection {s!r}")
    name, body = ltype.branches[s.index - 1]
    return body, {**env, name: s.payload}, ev


def reify(c, ltype, env: dict, evaluator: TargetEvaluator | None = None):
    """Replace every lazy ``ZERO`` inside ``c`` by a concrete zero of ``ltype``."""
    if c is ZERO:
        return zero_of(ltype, env, evaluator)
    if isinstance(ltype, S.TypeCase):
        body, env2, ev = _resolve_case(ltype, env, evaluator)
        return reify(c, body, env2, ev)
    if isinstance(ltype, S.Biproduct):
        if not isinstance(c, tuple) or len(c) != len(ltype.factors):
            raise InternalTypeError(f"cotangent {c!r} does not match {ltype}")
        return tuple(reify(x, f, env, evaluator) for x, f in zip(c, ltype.factors))
    return c


def cotangent_of_value(value, flat=None):
    """Cotangent shaped like ``value`` along its branch, filled from ``flat`` (or zeros)."""
    pos = [0]

    def go(v):
        if isinstance(v, np.ndarray):
            n = v.shape[0]
            if flat is None:
                return np.zeros(n)
            out = np.asarray(flat[pos[0]:pos[0] + n], dtype=np.float64).copy()
            pos[0] += n
            return out
        if isinstance(v, tuple):
            return tuple(go(c) for c in v)
        if isinstance(v, InjV):
            return go(v.payload)
        raise InternalTypeError(f"not a value: {v!r}")

    return go(value)


def cotangent_from_py(obj, value):
    """Cotangent for ``value`` read from nested lists (injections may be tagged or bare)."""
    if isinstance(value, InjV):
        if isinstance(obj, dict):
            if obj.get("in") != value.index:
                raise ValueError(f"cotangent is for branch {obj.get('in')}, value is in branch {value.index}")
            obj = obj.get("val")
        return cotangent_from_py(obj, value.payload)
    if isinstance(value, tuple):
        if not isinstance(obj, list) or len(obj) != len(value):
            raise ValueError(f"expected a list of {len(value)} cotangent components, got {obj!r}")
        return tuple(cotangent_from_py(c, v) for c, v in zip(obj, value))
    arr = np.asarray([obj] if isinstance(obj, (int, float)) else obj, dtype=np.float64).reshape(-1)
    if arr.shape != value.shape:
        raise ValueError(f"expected {value.shape[0]} cotangent entries, got {arr.shape[0]}")
    return arr


def flatten_cotangent(c) -> np.ndarray:
    parts = []

    def go(x):
        if isinstance(x, np.ndarray):
            parts.append(x)
        elif isinstance(x, tuple):
            for y in x:
                go(y)
        elif x is ZERO:
            raise InternalTypeError("flatten a reified cotangent")
        else:
            raise InternalTypeError(f"not a cotangent: {x!r}")

    go(c)
    return np.concatenate(parts) if parts else np.zeros(0)


def cotangent_to_py(c):
    if isinstance(c, np.ndarray):
        return [float(x) for x in c]
    if isinstance(c, tuple):
        return [cotangent_to_py(x) for x in c]
    if c is ZERO:
        return "zero"
    raise InternalTypeError(f"not a cotangent: {c!r}")


def cotangents_close(a, b, rtol: float = 1e-12) -> bool:
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        if a.shape != b.shape:
            return False
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        return bool(np.all(np.abs(a - b) <= rtol * scale))
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(cotangents_close(x, y, rtol) for x, y in zip(a, b))
    return a is ZERO and b is ZERO


# ---------------------------------------------------------------------------
# entry points


def _run(fn):
    try:
        return Defined(fn())
    except Bottom as e:
        return e.outcome()


def teval_cart(env: dict, term, fuel=None, evaluator_cls=TargetEvaluator):
    ev = evaluator_cls(_fuel(fuel))
    return _run(lambda: ev.eval(env, term))


def teval_lin(env: dict, lin_value, term, fuel=None, evaluator_cls=TargetEvaluator):
    ev = evaluator_cls(_fuel(fuel))
    return _run(lambda: ev.lin(env, lin_value, term))


def teval_fold(env: dict, loop_var: str, loop_body, seed, algebra, fuel=None, evaluator_cls=TargetEvaluator):
    """Backward accumulation of ``seed`` along the loop's trace; returns ``(outcome, trace)``."""
    ev = evaluator_cls(_fuel(fuel))
    trace = Trace()
    out = _run(lambda: ev.fold(env, loop_var, loop_body, seed, algebra, trace))
    if isinstance(out, FuelExhausted):
        trace.exhausted = True
    return out, trace


@dataclass(frozen=True)
class TargetResult:
    primal: object  # outcome of the first component
    gradient: object = None  # outcome of the cotangent map, when requested


def linearize(target: S.Program, args, fuel=None, evaluator_cls=TargetEvaluator):
    """Primal outcome of a transformed program and its pullback.

    The pullback maps an output cotangent to the outcome of the parameter
    cotangent, reified against the parameters' cotangent type. It is ``None``
    when the primal is not defined. Primal and pullback share one fuel budget.
    """
    from .chad_transform import chad_context

    env = {n: coerce_value(v, ty) for (n, ty), v in zip(target.params, args)}
    ev = evaluator_cls(_fuel(fuel))
    try:
        pair = ev.eval(env, target.body)
    except Bottom as e:
        return e.outcome(), None
    if not isinstance(pair, PairV):
        raise InternalTypeError("a transformed program must evaluate to a pair")
    _, lin_ctx = chad_context(target.params)

    def pullback(c):
        try:
            return Defined(reify(ev.apply(pair.second, c), lin_ctx, env, ev))
        except Bottom as e:
            return e.outcome()

    return Defined(pair.first), pullback


def run_transformed(target: S.Program, args, cotangent=None, fuel=None, evaluator_cls=TargetEvaluator):
    """Evaluate a transformed program; optionally pull ``cotangent`` back to the inputs.

    ``cotangent`` may be a nested-list value, a callable receiving the primal
    value, or ``None`` for the primal only.
    """
    primal, pullback = linearize(target, args, fuel, evaluator_cls)
    if pullback is None or cotangent is None:
        return TargetResult(primal)
    c = cotangent(primal.value) if callable(cotangent) else cotangent
    return TargetResult(primal, pullback(c))


def gradient_by_param(target: S.Program, gradient) -> list:
    """Split a context cotangent into one cotangent per parameter."""
    n = len(target.params)
    if n == 1:
        return [gradient]
    return list(gradient)
