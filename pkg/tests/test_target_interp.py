import numpy as np
import pytest

from chad import syntax as S
from chad.chad_transform import transform_program
from chad.library import entry, well_typed
from chad.outcome import Defined, FuelExhausted, Undefined
from chad.source_interp import InjV, euclidean_dims, jacobian_fd, program_function, split_point
from chad.source_lang import parse_program
from chad.target_interp import (
    ZERO,
    LinClosure,
    PairV,
    cotangent_from_py,
    cotangent_of_value,
    cotangents_close,
    flatten_cotangent,
    linearize,
    plus,
    reify,
    run_transformed,
    teval_cart,
    teval_fold,
    teval_lin,
    zero_of,
)
from chad.target_lang import parse_target_term

C1, C2 = S.CReal(1), S.CReal(2)
HALVING = entry("halving").program()


def test_pair_of_closure():
    out = teval_cart({"x": np.array([2.0])}, parse_target_term("pair(x, fn @v => @v)"))
    assert isinstance(out.value, PairV) and isinstance(out.value.second, LinClosure)


def test_transformed_halving_primal():
    primal, _ = linearize(transform_program(HALVING), [np.array([8.3])])
    assert primal == Defined(np.array([0.51875]))


def test_linear_zero_and_plus():
    w = np.array([1.0, -2.0])
    assert teval_lin({}, w, parse_target_term("0")).value is ZERO
    assert teval_lin({}, w, parse_target_term("@v + 0")).value is w
    assert plus(w, ZERO) is w and plus(ZERO, w) is w
    assert plus((w, ()), (w, ()))[0].tolist() == [2.0, -4.0]


def test_square_sums_both_contributions():
    sq = transform_program(parse_program("def sq (x: real 1) : real 1 = op mul(x, x)"))
    res = run_transformed(sq, [np.array([3.0])], [1.0])
    assert res.gradient.value.tolist() == [6.0]


def test_lop_out_of_domain_is_undefined():
    env = {"x": np.array([0.0])}
    assert isinstance(teval_lin(env, np.ones(1), parse_target_term("lop recpr(x; @v)")), Undefined)


def test_linear_case_resolves_branch():
    t = parse_target_term("case d of { in1 y -> lop sigmoid(y; @v) | in2 z -> @v + @v }")
    out = teval_lin({"d": InjV(2, np.array([1.0]))}, np.array([3.0]), t)
    assert out.value.tolist() == [6.0]
    out = teval_lin({"d": InjV(1, np.array([0.0]))}, np.array([1.0]), t)
    assert out.value.tolist() == [0.25]


# --- fold -----------------------------------------------------------------------------


def _halving_fold():
    pair = transform_program(HALVING).body
    return pair.second.body


def test_fold_halving():
    f = _halving_fold()
    out, trace = teval_fold({"y": np.array([8.3])}, f.loop_var, f.loop_body, np.array([1.0]), f.algebra)
    assert out.value.tolist() == [0.0625]
    assert len(trace.states) == 5
    fd = jacobian_fd(program_function(HALVING), [8.3])
    assert out.value[0] == pytest.approx(fd[0, 0], rel=1e-8)


def test_fold_zero_iterations():
    f = _halving_fold()
    out, trace = teval_fold({"y": np.array([0.3])}, f.loop_var, f.loop_body, np.array([2.5]), f.algebra)
    # one algebra application at the start state, through the exit branch
    assert out.value.tolist() == [2.5] and len(trace.states) == 1


def test_fold_propagates_undefined_and_fuel():
    f = _halving_fold()
    args = (f.loop_var, f.loop_body, np.array([1.0]), f.algebra)
    assert isinstance(teval_fold({"y": np.array([8.0])}, *args)[0], Undefined)
    out, trace = teval_fold({"y": np.array([8.3])}, *args, fuel=3)
    assert isinstance(out, FuelExhausted) and trace.exhausted


# --- cotangent utilities --------------------------------------------------------------


def test_zero_and_reify():
    lt = S.Biproduct((C2, S.TypeCase(S.Var("d"), (("a", C1), ("b", S.LUnit())))))
    env = {"d": InjV(2, ())}
    z = zero_of(lt, env)
    assert z[0].tolist() == [0.0, 0.0] and z[1] == ()
    r = reify((ZERO, ZERO), lt, {"d": InjV(1, np.zeros(1))})
    assert r[0].shape == (2,) and r[1].tolist() == [0.0]


def test_cotangent_json():
    value = (np.zeros(2), InjV(1, np.zeros(1)))
    c = cotangent_from_py([[1, 2], {"in": 1, "val": [3]}], value)
    assert flatten_cotangent(c).tolist() == [1.0, 2.0, 3.0]
    assert cotangents_close(c, cotangent_from_py([[1, 2], [3]], value))
    with pytest.raises(ValueError):
        cotangent_from_py([[1, 2], {"in": 2, "val": [3]}], value)
    with pytest.raises(ValueError):
        cotangent_from_py([[1], [3]], value)
    assert flatten_cotangent(cotangent_of_value(value, [4, 5, 6])).tolist() == [4.0, 5.0, 6.0]


# --- pullbacks are linear ---------------------------------------------------------------


def _euclidean(e):
    try:
        euclidean_dims(e.program())
        return not e.has("diverge")
    except Exception:
        return False


@pytest.mark.parametrize("e", [e for e in well_typed() if _euclidean(e)], ids=lambda e: e.name)
def test_pullback_is_linear(e):
    program = e.program()
    target = transform_program(program)
    rng = np.random.default_rng(4)
    dim = sum(euclidean_dims(program))
    for _ in range(10):
        args = split_point(program, rng.uniform(0.25, 3.0, dim))
        primal, pullback = linearize(target, args)
        if not isinstance(primal, Defined):
            continue
        width = sum(x.shape[0] for x in _leaves(primal.value))
        a, b = rng.normal(size=width), rng.normal(size=width)
        ca, cb = cotangent_of_value(primal.value, a), cotangent_of_value(primal.value, b)
        cab = cotangent_of_value(primal.value, a + b)
        ga, gb, gab = (flatten_cotangent(pullback(c).value) for c in (ca, cb, cab))
        np.testing.assert_allclose(gab, ga + gb, rtol=1e-10, atol=1e-12)
        zero = flatten_cotangent(pullback(cotangent_of_value(primal.value)).value)
        assert not zero.any()


def _leaves(v):
    if isinstance(v, np.ndarray):
        yield v
    elif isinstance(v, tuple):
        for c in v:
            yield from _leaves(c)
    elif isinstance(v, InjV):
        yield from _leaves(v.payload)
