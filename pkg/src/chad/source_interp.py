"""Call-by-value evaluator for source terms.

Values are 1-D ``float64`` arrays (real arrays), Python tuples (tuples,
with ``()`` for unit) and :class:`InjV` (tagged injections). Iteration is
bounded by a shared fuel budget counting loop-body evaluations.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import primitives
from . import syntax as S
from .errors import BranchCrossed, ConfigError
from .outcome import (
    UNDEFINED,
    Bottom,
    Defined,
    Fuel,
    FuelExhausted,
    Undefined,
    UndefinedError,
)

DEFAULT_FUEL = 1_000_000


def default_fuel() -> int:
    raw = os.environ.get("CHAD_FUEL")
    if raw is None:
        return DEFAULT_FUEL
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"CHAD_FUEL must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"CHAD_FUEL must be a positive integer, got {raw!r}")
    return value


@dataclass(frozen=True)
class InjV:
    index: int
    payload: object


@dataclass
class Trace:
    states: list = field(default_factory=list)
    exit: object = None
    exhausted: bool = False


class InternalTypeError(Exception):
    """The evaluator met a value of the wrong shape: the input was ill-typed."""


class Evaluator:
    """Evaluates cartesian terms; ``path`` collects the branch decisions taken."""

    dispatch: dict  # node type -> handler(evaluator, env, term), set below the handlers

    def __init__(self, fuel: Fuel, record_path: bool = False):
        self.fuel = fuel
        self.path = [] if record_path else None

    def op(self, t: S.Op, args):
        op = primitives.resolve(t.name, t.params, [a.shape[0] for a in args])
        res = op.primal(args)
        if isinstance(res, Undefined):
            raise UndefinedError()
        branch, out = res
        if op.branches == 1:
            return out
        if self.path is not None:
            self.path.append(("op", branch))
        return InjV(branch, out)

    def eval(self, env: dict, t):
        handler = self.dispatch.get(type(t))
        if handler is None:
            return self.eval_other(env, t)
        return handler(self, env, t)

    def eval_other(self, env, t):
        raise InternalTypeError(f"{type(t).__name__} is not a source term")

    def iterate(self, env, var, body, start, trace: Trace | None = None):
        state = start
        while True:
            if trace is not None:
                trace.states.append(state)
            self.fuel.tick()
            r = self.eval({**env, var: state}, body)
            if not isinstance(r, InjV) or r.index not in (1, 2):
                raise InternalTypeError(f"loop body returned {r!r}")
            if self.path is not None:
                self.path.append(("step", r.index))
            if r.index == 1:
                if trace is not None:
                    trace.exit = r.payload
                return r.payload
            state = r.payload


def _eval_var(ev, env, t):
    try:
        return env[t.name]
    except KeyError:
        raise InternalTypeError(f"unbound variable {t.name}") from None


def _eval_op(ev, env, t):
    return ev.op(t, tuple(ev.eval(env, a) for a in t.args))


def _eval_let(ev, env, t):
    v = ev.eval(env, t.bound)
    return ev.eval({**env, t.name: v}, t.body)


def _eval_inj(ev, env, t):
    return InjV(t.index, ev.eval(env, t.payload))


def _eval_sum_match(ev, env, t):
    v = ev.eval(env, t.scrutinee)
    if not isinstance(v, InjV) or not 1 <= v.index <= len(t.branches):
        raise InternalTypeError(f"case on non-injection {v!r}")
    if ev.path is not None:
        ev.path.append(("case", v.index))
    name, body = t.branches[v.index - 1]
    return ev.eval({**env, name: v.payload}, body)


def _eval_tuple(ev, env, t):
    return tuple(ev.eval(env, c) for c in t.components)


def _eval_prod_match(ev, env, t):
    v = ev.eval(env, t.scrutinee)
    if not isinstance(v, tuple) or len(v) != len(t.names):
        raise InternalTypeError(f"match on non-tuple {v!r}")
    return ev.eval({**env, **dict(zip(t.names, v))}, t.body)


def _eval_iterate(ev, env, t):
    return ev.iterate(env, t.var, t.body, ev.eval(env, S.Var(t.var)))


# exact node type -> handler; anything else goes to ``eval_other``
_EVAL = {
    S.Var: _eval_var,
    S.Op: _eval_op,
    S.Let: _eval_let,
    S.Inj: _eval_inj,
    S.SumMatch: _eval_sum_match,
    S.Tuple: _eval_tuple,
    S.ProdMatch: _eval_prod_match,
    S.Iterate: _eval_iterate,
}
Evaluator.dispatch = _EVAL


def _run(fn):
    try:
        return Defined(fn())
    except Bottom as e:
        return e.outcome()


def _fuel(fuel) -> Fuel:
    if isinstance(fuel, Fuel):
        return fuel
    return Fuel(default_fuel() if fuel is None else int(fuel))


def eval_term(env: dict, term, fuel=None):
    """Outcome of evaluating ``term`` under ``env``."""
    f = _fuel(fuel)
    ev = Evaluator(f)
    return _run(lambda: ev.eval(env, term))


def eval_traced(env: dict, term, fuel=None):
    """Outcome and the list of branch decisions taken."""
    f = _fuel(fuel)
    ev = Evaluator(f, record_path=True)
    out = _run(lambda: ev.eval(env, term))
    return out, tuple(ev.path)


def eval_iterate(env: dict, var: str, body, start, fuel=None):
    """Run a loop from ``start`` and return ``(outcome, trace)``."""
    f = _fuel(fuel)
    ev = Evaluator(f)
    trace = Trace()
    out = _run(lambda: ev.iterate(env, var, body, start, trace))
    if isinstance(out, FuelExhausted):
        trace.exhausted = True
    return out, trace


def eval_program(program: S.Program, args, fuel=None):
    env = bind_args(program, args)
    return eval_term(env, program.body, fuel)


def bind_args(program: S.Program, args) -> dict:
    if len(args) != len(program.params):
        raise ValueError(f"{program.name} takes {len(program.params)} arguments, got {len(args)}")
    return {n: coerce_value(v, ty) for (n, ty), v in zip(program.params, args)}


# ---------------------------------------------------------------------------
# value utilities


def coerce_value(v, ty):
    """Convert nested lists / tuples / InjV into the runtime value of type ``ty``."""
    if isinstance(ty, S.Real):
        arr = np.asarray(v, dtype=np.float64).reshape(-1)
        if arr.shape[0] != ty.n:
            raise ValueError(f"expected {ty.n} reals, got {arr.shape[0]}")
        return arr
    if isinstance(ty, (S.Unit, S.Product)):
        factors = S.product_factors(ty)
        if len(v) != len(factors):
            raise ValueError(f"expected a {len(factors)}-tuple, got {v!r}")
        return tuple(coerce_value(c, t) for c, t in zip(v, factors))
    if isinstance(ty, (S.Sum, S.Void)):
        summands = S.sum_summands(ty)
        if not isinstance(v, InjV) or not 1 <= v.index <= len(summands):
            raise ValueError(f"expected an injection into {ty}, got {v!r}")
        return InjV(v.index, coerce_value(v.payload, summands[v.index - 1]))
    raise ValueError(f"cannot build a value of type {ty}")


def value_shape(v):
    """Structure of a value with the reals erased; equal shapes mean equal branches."""
    if isinstance(v, np.ndarray):
        return ("r", v.shape[0])
    if isinstance(v, tuple):
        return ("t",) + tuple(value_shape(c) for c in v)
    if isinstance(v, InjV):
        return ("in", v.index, value_shape(v.payload))
    raise InternalTypeError(f"not a value: {v!r}")


def flatten_value(v) -> np.ndarray:
    parts = []

    def go(x):
        if isinstance(x, np.ndarray):
            parts.append(x)
        elif isinstance(x, tuple):
            for c in x:
                go(c)
        elif isinstance(x, InjV):
            go(x.payload)
        else:
            raise InternalTypeError(f"not a value: {x!r}")

    go(v)
    return np.concatenate(parts) if parts else np.zeros(0)


def values_equal(a, b) -> bool:
    """Structural equality with bitwise-equal reals."""
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        return a.shape == b.shape and bool(np.array_equal(a, b))
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, InjV) and isinstance(b, InjV):
        return a.index == b.index and values_equal(a.payload, b.payload)
    return False


def values_close(a, b, rtol: float = 1e-12) -> bool:
    """Structural equality with per-scalar relative tolerance."""
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        if a.shape != b.shape:
            return False
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        return bool(np.all(np.abs(a - b) <= rtol * scale))
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(values_close(x, y, rtol) for x, y in zip(a, b))
    if isinstance(a, InjV) and isinstance(b, InjV):
        return a.index == b.index and values_close(a.payload, b.payload, rtol)
    return False


def outcomes_equal(a, b, rtol: float | None = None) -> bool:
    """Same outcome variant and equal values (bitwise unless ``rtol`` is given)."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Defined):
        return values_equal(a.value, b.value) if rtol is None else values_close(a.value, b.value, rtol)
    return True


def value_to_py(v):
    """Plain Python representation: lists of floats, lists, ``{"in": i, "val": ...}``."""
    if isinstance(v, np.ndarray):
        return [float(x) for x in v]
    if isinstance(v, tuple):
        return [value_to_py(c) for c in v]
    if isinstance(v, InjV):
        return {"in": v.index, "val": value_to_py(v.payload)}
    raise InternalTypeError(f"not a value: {v!r}")


def value_from_py(obj, ty):
    """Inverse of :func:`value_to_py` at type ``ty``."""
    if isinstance(ty, (S.Sum, S.Void)):
        if not isinstance(obj, dict) or set(obj) != {"in", "val"}:
            raise ValueError(f"expected {{\"in\": i, \"val\": ...}} for {ty}, got {obj!r}")
        i = obj["in"]
        summands = S.sum_summands(ty)
        if not isinstance(i, int) or not 1 <= i <= len(summands):
            raise ValueError(f"injection index {i!r} out of range for {ty}")
        return InjV(i, value_from_py(obj["val"], summands[i - 1]))
    if isinstance(ty, (S.Unit, S.Product)):
        factors = S.product_factors(ty)
        if not isinstance(obj, list) or len(obj) != len(factors):
            raise ValueError(f"expected a list of {len(factors)} components for {ty}, got {obj!r}")
        return tuple(value_from_py(c, t) for c, t in zip(obj, factors))
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        obj = [obj]
    return coerce_value(obj, ty)


# ---------------------------------------------------------------------------
# finite-difference Jacobian


def euclidean_dims(program: S.Program):
    dims = []
    for name, ty in program.params:
        if not isinstance(ty, S.Real):
            raise ConfigError(f"parameter {name} has non-Euclidean type {ty}")
        dims.append(ty.n)
    return dims


def split_point(program: S.Program, point) -> list:
    dims = euclidean_dims(program)
    point = np.asarray(point, dtype=np.float64).reshape(-1)
    if point.shape[0] != sum(dims):
        raise ValueError(f"{program.name} expects {sum(dims)} input coordinates, got {point.shape[0]}")
    out, k = [], 0
    for d in dims:
        out.append(point[k:k + d].copy())
        k += d
    return out


def program_function(program: S.Program, fuel=None):
    """``point -> (outcome, path)`` for a program with Euclidean inputs."""
    limit = _fuel(fuel).limit

    def f(point):
        env = dict(zip((n for n, _ in program.params), split_point(program, point)))
        return eval_traced(env, program.body, limit)

    return f


def fd_steps(point, h: float) -> np.ndarray:
    return h * np.maximum(1.0, np.abs(np.asarray(point, dtype=np.float64)))


def jacobian_fd(program, point, h: float = 1e-5, fuel=None):
    """Central-difference Jacobian of the flattened output, or ``UNDEFINED``.

    Raises :class:`BranchCrossed` when a probe takes a different control
    path than the centre point, so the output lies in another branch or the
    loop ran a different number of steps.
    """
    f = program if callable(program) else program_function(program, fuel)
    p = np.asarray(point, dtype=np.float64).reshape(-1)
    centre, path0 = f(p)
    if not isinstance(centre, Defined):
        return UNDEFINED
    shape0 = value_shape(centre.value)
    m = flatten_value(centre.value).shape[0]
    steps = fd_steps(p, h)
    jac = np.zeros((m, p.shape[0]))
    for j in range(p.shape[0]):
        hj = steps[j]
        probes, coords = [], []
        for sgn in (1.0, -1.0):
            q = p.copy()
            q[j] += sgn * hj
            coords.append(q[j])
            out, path = f(q)
            if not isinstance(out, Defined):
                return UNDEFINED
            if path != path0 or value_shape(out.value) != shape0:
                raise BranchCrossed(j)
            probes.append(flatten_value(out.value))
        jac[:, j] = (probes[0] - probes[1]) / (coords[0] - coords[1])
    return jac
