"""Hypothesis properties over reals and cotangents."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from chad import primitives
from chad.chad_transform import transform_program
from chad.library import entry
from chad.outcome import Defined
from chad.source_interp import eval_program
from chad.target_interp import ZERO, linearize, plus

reals = st.floats(-50, 50, allow_nan=False)
vec3 = st.lists(reals, min_size=3, max_size=3).map(np.array)

SIGMOID_MUL = transform_program(entry("sigmoid_mul").program())
HALVING = entry("halving").program()
HALVING_T = transform_program(HALVING)


@given(vec3, vec3, vec3)
def test_plus_monoid(a, b, c):
    assert np.array_equal(plus(a, b), plus(b, a))
    assert plus(a, ZERO) is a
    np.testing.assert_allclose(plus(plus(a, b), c), plus(a, plus(b, c)), rtol=1e-12, atol=1e-12)


@given(st.floats(-100, 100, allow_nan=False))
def test_halving_fidelity(y):
    args = [np.array([y])]
    src = eval_program(HALVING, args)
    tgt, _ = linearize(HALVING_T, args)
    assert type(src) is type(tgt)
    if isinstance(src, Defined):
        assert np.array_equal(src.value, tgt.value)


@settings(max_examples=50)
@given(st.floats(1.01, 100, allow_nan=False).filter(lambda y: np.log2(y) % 1 > 1e-9))
def test_halving_gradient_is_power_of_half(y):
    # the derivative is 0.5 per halving step
    steps = 0
    z = y
    while z > 1.0:
        z *= 0.5
        steps += 1
    _, pullback = linearize(HALVING_T, [np.array([y])])
    assert pullback(np.array([1.0])).value[0] == 0.5 ** steps


@given(vec3, vec3, reals, reals)
def test_mul_transpose_is_linear(x, y, s, t):
    op = primitives.resolve("mul", (), [3, 3])
    w1, w2 = np.ones(3), np.arange(3.0)
    lhs = primitives.transposed_derivative(op, [x, y], 1, s * w1 + t * w2)
    r1 = primitives.transposed_derivative(op, [x, y], 1, w1)
    r2 = primitives.transposed_derivative(op, [x, y], 1, w2)
    for got, a, b in zip(lhs, r1, r2):
        np.testing.assert_allclose(got, s * a + t * b, rtol=1e-9, atol=1e-9)


@settings(max_examples=50)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4))
def test_sigmoid_mul_pullback_zero(p):
    p = np.array(p)
    primal, pullback = linearize(SIGMOID_MUL, [p[:2], p[2:]])
    g = pullback(np.zeros_like(primal.value)).value
    assert all(not np.any(c) for c in g)
