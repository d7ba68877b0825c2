"""Registry of primitive operations.

Each entry is an :class:`OpFamily`, possibly indexed by literal parameters
(``cnst[1.5]``, ``decider[0.3]``, ``matvec[2, 3, 1]``) and by the argument
dimensions. Instantiating a family gives a concrete :class:`PrimOp` with fixed
input and output dimensions. A primal returns ``(branch, vector)`` with a
1-based branch index, or :data:`~chad.outcome.UNDEFINED` outside the op's open
domain. Transposed derivatives are closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, OutsideDomain, UnknownOp
from .outcome import UNDEFINED, Undefined


@dataclass(frozen=True)
class PrimOp:
    name: str
    params: tuple
    in_dims: tuple
    out_dims: tuple
    total: bool
    primal: Callable
    transpose: Callable

    @property
    def branches(self) -> int:
        return len(self.out_dims)


@dataclass(frozen=True)
class OpFamily:
    name: str
    in_spec: tuple  # symbolic dims for listing, e.g. ("n", "n")
    out_spec: tuple
    total: bool
    signature: Callable  # (params, arg_dims) -> out_dims, raises DimensionMismatch
    primal: Callable  # (params, args) -> (branch, vec) | UNDEFINED
    transpose: Callable  # (params, args, branch, w) -> tuple of vecs
    param_kind: str = "none"  # none | floats | float | ints3
    doc: str = ""

    def instantiate(self, params=(), arg_dims=None) -> PrimOp:
        params = _check_params(self, tuple(params))
        if arg_dims is None:
            raise DimensionMismatch(f"{self.name}: argument dimensions required")
        arg_dims = tuple(int(d) for d in arg_dims)
        out_dims = tuple(self.signature(params, arg_dims))
        return PrimOp(
            self.name,
            params,
            arg_dims,
            out_dims,
            self.total,
            lambda args, _p=params: self.primal(_p, args),
            lambda args, b, w, _p=params: self.transpose(_p, args, b, w),
        )


def _check_params(fam: OpFamily, params: tuple) -> tuple:
    kind = fam.param_kind
    if kind == "none":
        if params:
            raise DimensionMismatch(f"{fam.name} takes no parameters")
        return ()
    if kind == "floats":
        if not params:
            raise DimensionMismatch(f"{fam.name} needs at least one literal")
        return tuple(float(p) for p in params)
    if kind == "float":
        if len(params) != 1:
            raise DimensionMismatch(f"{fam.name} needs exactly one literal")
        return (float(params[0]),)
    if kind == "ints3":
        if len(params) != 3 or any(int(p) != p or int(p) < 1 for p in params):
            raise DimensionMismatch(f"{fam.name} needs three positive integer dimensions")
        return tuple(int(p) for p in params)
    raise AssertionError(kind)


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).reshape(-1)


def _expect(name, arg_dims, expected):
    if tuple(arg_dims) != tuple(expected):
        raise DimensionMismatch(f"{name}: expected argument dims {tuple(expected)}, got {tuple(arg_dims)}")


def _nonempty_unary(name, arg_dims):
    if len(arg_dims) != 1:
        raise DimensionMismatch(f"{name}: expected one argument, got {len(arg_dims)}")
    return arg_dims[0]


def _same_binary(name, arg_dims):
    if len(arg_dims) != 2 or arg_dims[0] != arg_dims[1]:
        raise DimensionMismatch(f"{name}: expected two arguments of equal dimension, got {tuple(arg_dims)}")
    return arg_dims[0]


def _finite(*xs) -> bool:
    return all(np.all(np.isfinite(x)) for x in xs)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


# --- families -------------------------------------------------------------

def _cnst_sig(p, dims):
    _expect("cnst", dims, ())
    return (len(p),)


def _matvec_sig(p, dims):
    n, m, r = p
    _expect("matvec", dims, (n * m, m * r))
    return (n * r,)


def _matvec_primal(p, args):
    n, m, r = p
    a = args[0].reshape(n, m)
    b = args[1].reshape(m, r)
    return 1, (a @ b).reshape(-1)


def _matvec_T(p, args, branch, w):
    n, m, r = p
    a = args[0].reshape(n, m)
    b = args[1].reshape(m, r)
    wm = w.reshape(n, r)
    return (wm @ b.T).reshape(-1), (a.T @ wm).reshape(-1)


def _norm_primal(p, args):
    (x,) = args
    if not _finite(x) or not np.any(x != 0.0):
        return UNDEFINED
    return 1, np.array([np.linalg.norm(x)])


def _norm_T(p, args, branch, w):
    (x,) = args
    return (w[0] * x / np.linalg.norm(x),)


def _recpr_primal(p, args):
    (x,) = args
    if not _finite(x) or np.any(x == 0.0):
        return UNDEFINED
    return 1, 1.0 / x


def _normalize_primal(p, args):
    (x,) = args
    if not _finite(x) or not np.any(x != 0.0):
        return UNDEFINED
    return 1, x / np.linalg.norm(x)


def _normalize_T(p, args, branch, w):
    (x,) = args
    r = np.linalg.norm(x)
    y = x / r
    return ((w - y * np.dot(y, w)) / r,)


def _threshold_primal(a):
    def primal(p, args):
        (x,) = args
        v = x[0]
        if not np.isfinite(v):
            return UNDEFINED
        if v > a(p):
            return 1, x.copy()
        if v < a(p):
            return 2, x.copy()
        return UNDEFINED

    return primal


def _sign_sig(p, dims):
    _expect("sign", dims, (1,))
    return (1, 1)


def _decider_sig(p, dims):
    _expect("decider", dims, (1,))
    return (1, 1)


def _unary_same(name):
    def sig(p, dims):
        return (_nonempty_unary(name, dims),)

    return sig


def _unary_scalar(name):
    def sig(p, dims):
        _expect(name, dims, (1,))
        return (1,)

    return sig


def _reduce_sig(name):
    def sig(p, dims):
        _nonempty_unary(name, dims)
        return (1,)

    return sig


def _binary_sig(name):
    def sig(p, dims):
        return (_same_binary(name, dims),)

    return sig


_FAMILIES = [
    OpFamily("cnst", (), ("len(c)",), True, _cnst_sig,
             lambda p, args: (1, np.array(p, dtype=np.float64)),
             lambda p, args, b, w: (),
             param_kind="floats", doc="constant vector"),
    OpFamily("add", ("n", "n"), ("n",), True, _binary_sig("add"),
             lambda p, args: (1, args[0] + args[1]),
             lambda p, args, b, w: (w.copy(), w.copy()),
             doc="elementwise sum"),
    OpFamily("mul", ("n", "n"), ("n",), True, _binary_sig("mul"),
             lambda p, args: (1, args[0] * args[1]),
             lambda p, args, b, w: (w * args[1], w * args[0]),
             doc="elementwise product"),
    OpFamily("matvec", ("n*m", "m*r"), ("n*r",), True, _matvec_sig, _matvec_primal, _matvec_T,
             param_kind="ints3", doc="row-major matrix product"),
    OpFamily("sum", ("n",), ("1",), True, _reduce_sig("sum"),
             lambda p, args: (1, np.array([np.sum(args[0])])),
             lambda p, args, b, w: (np.full(args[0].shape, w[0]),),
             doc="sum of entries"),
    OpFamily("sigmoid", ("n",), ("n",), True, _unary_same("sigmoid"),
             lambda p, args: (1, _sigmoid(args[0])),
             lambda p, args, b, w: (w * _sigmoid(args[0]) * (1.0 - _sigmoid(args[0])),),
             doc="elementwise logistic function"),
    OpFamily("norm", ("n",), ("1",), False, _reduce_sig("norm"), _norm_primal, _norm_T,
             doc="Euclidean norm, undefined at 0"),
    OpFamily("recpr", ("1",), ("1",), False, _unary_scalar("recpr"), _recpr_primal,
             lambda p, args, b, w: (-w / (args[0] * args[0]),),
             doc="reciprocal, undefined at 0"),
    OpFamily("normalize", ("n",), ("n",), False, _unary_same("normalize"), _normalize_primal, _normalize_T,
             doc="x / |x|, undefined at 0"),
    OpFamily("sign", ("1",), ("1", "1"), False, _sign_sig, _threshold_primal(lambda p: 0.0),
             lambda p, args, b, w: (w.copy(),),
             doc="branch 1 if x > 0, branch 2 if x < 0, payload x"),
    OpFamily("decider", ("1",), ("1", "1"), False, _decider_sig, _threshold_primal(lambda p: p[0]),
             lambda p, args, b, w: (w.copy(),),
             param_kind="float", doc="branch 1 if x > a, branch 2 if x < a, payload x"),
]

REGISTRY = {f.name: f for f in _FAMILIES}


def lookup(name: str) -> OpFamily:
    try:
        return REGISTRY[name]
    except KeyError:
        raise UnknownOp(f"unknown primitive operation {name!r}") from None


def resolve(name: str, params=(), arg_dims=()) -> PrimOp:
    return _resolve(name, tuple(params), tuple(int(d) for d in arg_dims))


@lru_cache(maxsize=4096)
def _resolve(name, params, arg_dims):
    # evaluators resolve the same op on every loop step
    return lookup(name).instantiate(params, arg_dims)


def _check_args(op: PrimOp, args) -> tuple:
    args = tuple(_vec(a) for a in args)
    dims = tuple(a.shape[0] for a in args)
    if dims != op.in_dims:
        raise DimensionMismatch(f"{op.name}: expected argument dims {op.in_dims}, got {dims}")
    return args


def primal_apply(op: PrimOp, args):
    """``(branch, vector)`` or ``UNDEFINED``."""
    args = _check_args(op, args)
    return op.primal(args)


def transposed_derivative(op: PrimOp, point, branch: int, w) -> tuple:
    """``J^T w`` for the Jacobian of the branch-restricted primal at ``point``."""
    args = _check_args(op, point)
    res = op.primal(args)
    if isinstance(res, Undefined):
        raise OutsideDomain(f"{op.name} is undefined at {[a.tolist() for a in args]}")
    if res[0] != branch:
        raise OutsideDomain(f"{op.name}: point lies in branch {res[0]}, not {branch}")
    w = _vec(w)
    if w.shape[0] != op.out_dims[branch - 1]:
        raise DimensionMismatch(f"{op.name}: cotangent has dim {w.shape[0]}, expected {op.out_dims[branch - 1]}")
    return tuple(op.transpose(args, branch, w))


def describe() -> list:
    """One row per registered family for ``chad ops list``."""
    return [
        {
            "name": f.name,
            "in_dims": list(f.in_spec),
            "out_dims": list(f.out_spec),
            "total": f.total,
            "doc": f.doc,
        }
        for f in _FAMILIES
    ]
