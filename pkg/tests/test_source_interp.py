import numpy as np
import pytest

from chad import syntax as S
from chad.errors import BranchCrossed, ConfigError
from chad.library import entry
from chad.outcome import UNDEFINED, Defined, FuelExhausted, Undefined
from chad.source_interp import (
    InjV,
    eval_iterate,
    eval_program,
    eval_term,
    eval_traced,
    flatten_value,
    jacobian_fd,
    outcomes_equal,
    program_function,
    value_from_py,
    value_to_py,
    values_close,
)
from chad.source_lang import parse_term


def run(name, *args, fuel=None):
    return eval_program(entry(name).program(), [np.asarray(a, dtype=float) for a in args], fuel)


def halving_oracle(y):
    """Brute-force unrolling of the halving loop."""
    while y > 1.0:
        y = y * 0.5
    return y


@pytest.mark.parametrize("y", [8.3, 1.7, 0.2, -4.0, 37.1])
def test_halving(y):
    assert run("halving", [y]).value[0] == halving_oracle(y)


def test_halving_from_spec_point():
    out = run("halving", [8.3])
    assert out.value[0] == pytest.approx(0.51875, abs=0)
    # 8 halves onto the excluded point 1 exactly
    assert isinstance(run("halving", [8.0]), Undefined)


def test_newton():
    # the loop stops once (x^2 - 2)^2 drops below 1e-20
    x = run("newton_sqrt2", [1.0]).value[0]
    assert abs(x * x - 2.0) < 1e-10
    assert run("newton_sqrt2", [-3.0]).value[0] == pytest.approx(-np.sqrt(2.0), rel=1e-10)
    assert isinstance(run("newton_sqrt2", [0.0]), Undefined)


def test_accumulate_matches_unrolled():
    def oracle(x, c):
        y, acc = x, 0.0
        step = 1.0 / (1.0 + np.exp(-c))
        while not y > 4.0:
            y, acc = y + step, acc + y * c
        return acc

    for x, c in [(0.0, 1.0), (-2.0, 0.3), (3.9, -1.0)]:
        assert run("accumulate", [x], [c]).value[0] == pytest.approx(oracle(x, c), rel=1e-12)


@pytest.mark.parametrize("name", ["diverge_inr", "diverge_sign"])
@pytest.mark.parametrize("fuel", [1, 10, 1000])
def test_divergence(name, fuel):
    assert run(name, [0.7], fuel=fuel) == FuelExhausted(fuel)


def test_fuel_counts_loop_steps():
    # 8.3 takes four halvings and one exit step
    assert isinstance(run("halving", [8.3], fuel=5), Defined)
    assert isinstance(run("halving", [8.3], fuel=4), FuelExhausted)
    # loop-free programs need no fuel beyond the minimum
    assert isinstance(run("sigmoid", [0.0, 1.0, 2.0], fuel=1), Defined)


def test_env_fuel(monkeypatch):
    monkeypatch.setenv("CHAD_FUEL", "3")
    assert run("diverge_inr", [0.7]) == FuelExhausted(3)
    monkeypatch.setenv("CHAD_FUEL", "zero")
    with pytest.raises(ConfigError):
        run("diverge_inr", [0.7])


def test_undefined_propagates():
    t = parse_term("(op recpr(x), x)")
    assert isinstance(eval_term({"x": np.array([0.0])}, t), Undefined)


def test_trace():
    prog = entry("halving").program()
    out, trace = eval_iterate({}, "y", prog.body.body, np.array([8.3]))
    assert [s[0] for s in trace.states] == [8.3, 4.15, 2.075, 1.0375, 0.51875]
    assert trace.exit[0] == 0.51875 and not trace.exhausted
    _, path = eval_traced({"y": np.array([1.7])}, prog.body)
    assert path == (("op", 1), ("case", 1), ("step", 2), ("op", 2), ("case", 2), ("step", 1))


def test_value_json():
    ty = S.Product((S.Real(2), S.Sum((S.Real(1), S.Unit()))))
    v = value_from_py([[1, 2], {"in": 2, "val": []}], ty)
    assert v[1] == InjV(2, ())
    assert value_to_py(v) == [[1.0, 2.0], {"in": 2, "val": []}]
    assert flatten_value(v).tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        value_from_py([[1, 2, 3], {"in": 1, "val": [0]}], ty)


def test_outcome_comparison():
    a, b = Defined(np.array([1.0])), Defined(np.array([1.0 + 1e-14]))
    assert not outcomes_equal(a, b)
    assert outcomes_equal(a, b, rtol=1e-12)
    assert outcomes_equal(FuelExhausted(3), FuelExhausted(7))
    assert not outcomes_equal(UNDEFINED, FuelExhausted(3))
    assert values_close((np.ones(2), InjV(1, np.zeros(1))), (np.ones(2), InjV(1, np.zeros(1))))


def test_jacobian_fd():
    f = program_function(entry("mul").program())
    p = np.array([1.0, 2.0, 3.0, -1.0, 0.5, 2.0])
    jac = jacobian_fd(f, p)
    want = np.hstack([np.diag(p[3:]), np.diag(p[:3])])
    np.testing.assert_allclose(jac, want, rtol=1e-9, atol=1e-9)


def test_jacobian_fd_branches():
    sign = entry("sign").program()
    assert jacobian_fd(sign, [0.0]) is UNDEFINED
    with pytest.raises(BranchCrossed):
        jacobian_fd(sign, [1e-7])
    halving = entry("halving").program()
    with pytest.raises(BranchCrossed):
        jacobian_fd(halving, [2.0 + 1e-6])
    assert jacobian_fd(halving, [8.3])[0, 0] == pytest.approx(0.0625, rel=1e-9)
