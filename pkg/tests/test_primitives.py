import numpy as np
import pytest

from chad import primitives
from chad.errors import DimensionMismatch, OutsideDomain, UnknownOp
from chad.outcome import Undefined


def fd_jacobian(op, args, branch, h=1e-6):
    """Central differences of the branch-restricted primal, per flattened input."""
    flat = np.concatenate(args) if args else np.zeros(0)
    sizes = [a.shape[0] for a in args]

    def f(q):
        parts, k = [], 0
        for d in sizes:
            parts.append(q[k:k + d])
            k += d
        b, out = primitives.primal_apply(op, parts)
        assert b == branch
        return out

    m = op.out_dims[branch - 1]
    jac = np.zeros((m, flat.shape[0]))
    for j in range(flat.shape[0]):
        e = np.zeros_like(flat)
        e[j] = h
        jac[:, j] = (f(flat + e) - f(flat - e)) / (2 * h)
    return jac


CASES = [
    ("add", (), [np.array([1.0, -2.0]), np.array([0.5, 3.0])]),
    ("mul", (), [np.array([1.0, -2.0, 0.3]), np.array([0.5, 3.0, -1.0])]),
    ("matvec", (2, 3, 1), [np.arange(6.0) - 2.0, np.array([0.5, -1.0, 2.0])]),
    ("matvec", (2, 2, 2), [np.array([1.0, 2.0, -1.0, 0.5]), np.array([0.3, -0.2, 1.0, 4.0])]),
    ("sum", (), [np.array([1.0, -2.0, 4.0])]),
    ("sigmoid", (), [np.array([-3.0, 0.0, 0.7])]),
    ("norm", (), [np.array([3.0, -4.0])]),
    ("recpr", (), [np.array([-0.8])]),
    ("normalize", (), [np.array([1.0, 2.0, -2.0])]),
    ("sign", (), [np.array([-0.3])]),
    ("sign", (), [np.array([2.5])]),
    ("decider", (0.5,), [np.array([0.1])]),
    ("decider", (0.5,), [np.array([1.7])]),
]


@pytest.mark.parametrize("name,params,args", CASES)
def test_transpose_matches_finite_differences(name, params, args):
    op = primitives.resolve(name, params, [a.shape[0] for a in args])
    branch, _ = primitives.primal_apply(op, args)
    jac = fd_jacobian(op, args, branch)
    for i in range(jac.shape[0]):
        w = np.zeros(jac.shape[0])
        w[i] = 1.0
        got = np.concatenate(primitives.transposed_derivative(op, args, branch, w))
        np.testing.assert_allclose(got, jac[i], rtol=1e-6, atol=1e-8)


def test_values():
    sig = primitives.resolve("sigmoid", (), [3])
    _, y = primitives.primal_apply(sig, [np.array([0.0, 50.0, -50.0])])
    np.testing.assert_allclose(y, [0.5, 1.0, 0.0], atol=1e-15)
    mv = primitives.resolve("matvec", (2, 3, 1), [6, 3])
    _, y = primitives.primal_apply(mv, [np.arange(6.0), np.array([1.0, 0.0, -1.0])])
    # rows [0, 1, 2] and [3, 4, 5]
    np.testing.assert_array_equal(y, [-2.0, -2.0])
    c = primitives.resolve("cnst", (1.5, -2.0), [])
    assert primitives.primal_apply(c, [])[1].tolist() == [1.5, -2.0]


@pytest.mark.parametrize("name,params,x", [
    ("recpr", (), [0.0]),
    ("norm", (), [0.0, 0.0]),
    ("normalize", (), [0.0, 0.0, 0.0]),
    ("sign", (), [0.0]),
    ("decider", (0.5,), [0.5]),
    ("recpr", (), [np.nan]),
    ("norm", (), [np.inf, 1.0]),
])
def test_partiality(name, params, x):
    op = primitives.resolve(name, params, [len(x)])
    assert isinstance(primitives.primal_apply(op, [np.array(x)]), Undefined)
    with pytest.raises(OutsideDomain):
        primitives.transposed_derivative(op, [np.array(x)], 1, np.ones(op.out_dims[0]))


def test_branches():
    sign = primitives.resolve("sign", (), [1])
    assert primitives.primal_apply(sign, [np.array([3.0])])[0] == 1
    assert primitives.primal_apply(sign, [np.array([-2.0])])[0] == 2
    dec = primitives.resolve("decider", (1.0,), [1])
    assert primitives.primal_apply(dec, [np.array([3.0])])[0] == 1
    assert primitives.primal_apply(dec, [np.array([0.2])])[0] == 2
    with pytest.raises(OutsideDomain):
        primitives.transposed_derivative(sign, [np.array([-2.0])], 1, np.ones(1))


def test_errors():
    with pytest.raises(UnknownOp):
        primitives.resolve("tanh", (), [1])
    with pytest.raises(DimensionMismatch):
        primitives.resolve("add", (), [2, 3])
    with pytest.raises(DimensionMismatch):
        primitives.resolve("matvec", (2, 3, 1), [5, 3])
    with pytest.raises(DimensionMismatch):
        primitives.resolve("recpr", (), [2])
    with pytest.raises(DimensionMismatch):
        primitives.resolve("decider", (), [1])


def test_describe_lists_every_op():
    rows = primitives.describe()
    names = [r["name"] for r in rows]
    assert names == ["cnst", "add", "mul", "matvec", "sum", "sigmoid", "norm", "recpr", "normalize", "sign", "decider"]
    partial = {r["name"] for r in rows if not r["total"]}
    assert partial == {"norm", "recpr", "normalize", "sign", "decider"}
