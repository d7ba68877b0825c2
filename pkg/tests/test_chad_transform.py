import os
from pathlib import Path

import numpy as np
import pytest

from chad import syntax as S
from chad.chad_transform import (
    Transformer,
    chad_context,
    chad_term,
    chad_type_cotangent,
    chad_type_primal,
    structure_preservation_probe,
    transform_program,
)
from chad.errors import ChadTypeError
from chad.library import entry, well_typed
from chad.source_interp import InjV, jacobian_fd, program_function
from chad.source_lang import Context, parse_program, parse_term
from chad.target_interp import flatten_cotangent, run_transformed
from chad.target_lang import EQUAL, TargetChecker, pretty_program, type_equal
from chad.terms import subterms

R1, R2, C1, C2 = S.Real(1), S.Real(2), S.CReal(1), S.CReal(2)
GOLDEN = Path(__file__).parent / "golden"


# --- types and contexts ---------------------------------------------------------------


@pytest.mark.parametrize("ty", [S.Real(3), S.Product((R1, R2)), S.Sum((R1, R1))])
def test_primal_types_are_unchanged(ty):
    assert chad_type_primal(ty) == ty


def test_cotangent_types():
    assert chad_type_cotangent(R2) == C2
    prod = chad_type_cotangent(S.Product((R1, R1)))
    assert isinstance(prod, S.Biproduct)
    assert type_equal(prod, S.Biproduct((C1, C1))) is EQUAL
    assert chad_type_cotangent(S.Sum((R1, R2))) == S.TypeCase(S.Var("p"), (("p", C1), ("p", C2)))
    assert chad_type_cotangent(S.Unit()) == S.LUnit()


def test_contexts():
    assert chad_context([])[1] == S.LUnit()
    assert chad_context([("x", R1)])[1] == C1
    assert chad_context([("x", R1), ("y", R2)])[1] == S.Biproduct((C1, C2))


# --- term clauses ---------------------------------------------------------------------


def test_variable_clause():
    out = chad_term([("x", R1)], S.Var("x"))
    assert out.term.first == S.Var("x")
    assert out.term.second == S.LinAbs(S.LinVar())


def test_variable_coprojection():
    out = chad_term([("x", R1), ("y", R2)], S.Var("y"))
    assert out.term.second == S.LinAbs(S.LinTuple((S.Zero(), S.LinVar())))


def test_add_sums_both_coprojections():
    target = transform_program(entry("add").program())
    res = run_transformed(target, [np.array([1.0, 2.0]), np.array([3.0, 4.0])], [0.5, -1.0])
    np.testing.assert_array_equal(res.primal.value, [4.0, 6.0])
    gx, gy = res.gradient.value
    np.testing.assert_array_equal(gx, [0.5, -1.0])
    np.testing.assert_array_equal(gy, [0.5, -1.0])


def test_iteration_clause_shape():
    target = transform_program(entry("halving").program())
    pair = target.body
    assert isinstance(pair, S.Pair) and isinstance(pair.first, S.Iterate)
    fold = pair.second.body
    assert isinstance(fold, S.Fold) and fold.seed == S.LinVar()
    assert fold.loop_body == pair.first.body
    assert isinstance(fold.algebra, S.PairMatch) and isinstance(fold.algebra.body, S.LinApp)


def test_context_iteration_is_desugared():
    # the loop body reads c, so the loop state is widened with it
    target = transform_program(entry("accumulate").program())
    folds = [t for t in subterms(target.body) if isinstance(t, S.Fold)]
    assert folds
    for f in folds:
        assert isinstance(f.loop_body, S.Term)


def test_halving_gradient():
    target = transform_program(entry("halving").program())
    res = run_transformed(target, [np.array([8.3])], [1.0])
    assert res.primal.value[0] == 0.51875
    assert res.gradient.value[0] == 0.0625


def test_sum_input_gradient():
    target = transform_program(entry("choose").program())
    res = run_transformed(target, [InjV(1, np.array([3.0]))], [1.0])
    assert res.primal.value[0] == 9.0
    np.testing.assert_allclose(flatten_cotangent(res.gradient.value), [6.0])
    b = np.array([0.5, -1.0])
    res = run_transformed(target, [InjV(2, b)], [1.0])
    s = 1 / (1 + np.exp(-b))
    np.testing.assert_allclose(flatten_cotangent(res.gradient.value), s * (1 - s), rtol=1e-12)


def test_rejects_ill_typed_source():
    with pytest.raises(ChadTypeError):
        transform_program(entry("illtyped").program())


def test_fresh_names_avoid_the_source():
    out = chad_term([("_g0", R1)], parse_term("op mul(_g0, _g0)"))
    TargetChecker().check(Context([("_g0", R1)]), out.term, out.type)


def test_deterministic():
    p = entry("nested_loop").program()
    assert transform_program(p) == transform_program(p)
    assert Transformer().fresh() == Transformer().fresh() == "_g0"


@pytest.mark.parametrize("e", well_typed(), ids=lambda e: e.name)
def test_output_typechecks(e):
    target = transform_program(e.program())
    checker = TargetChecker()
    checker.check(Context(target.params), target.body, target.result)
    assert checker.stats.unknown == 0


# --- goldens ------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["identity", "add", "mul", "let_chain", "tuple_match", "choose", "halving"])
def test_golden(name):
    text = pretty_program(transform_program(entry(name).program()))
    path = GOLDEN / f"{name}.target"
    if os.environ.get("UPDATE_GOLDEN"):
        path.write_text(text)
    assert text == path.read_text()


# --- composition ----------------------------------------------------------------------


IDENTITY = parse_program("def id (x: real 1) : real 1 = x")
SQUARE = parse_program("def sq (x: real 1) : real 1 = op mul(x, x)")
SIGMOID = parse_program("def sg (x: real 1) : real 1 = op sigmoid(x)")
DOUBLE = parse_program("def dbl (x: real 1) : real 1 = op add(x, x)")


@pytest.mark.parametrize("t1,t2", [
    (IDENTITY, IDENTITY),
    (SQUARE, SIGMOID),
    (entry("halving").program(), DOUBLE),
])
def test_structure_preservation(t1, t2):
    points = np.random.default_rng(0).uniform(-3, 3, (50, 1))
    ok, report = structure_preservation_probe(t1, t2, points)
    assert ok, report


def test_chain_rule_against_finite_differences():
    from chad.deriv_check import compose_programs

    both = compose_programs(SQUARE, SIGMOID)
    target = transform_program(both)
    f = program_function(both)
    for x in np.random.default_rng(1).uniform(-2, 2, 20):
        g = run_transformed(target, [np.array([x])], [1.0]).gradient.value
        assert g[0] == pytest.approx(jacobian_fd(f, [x])[0, 0], rel=1e-6, abs=1e-9)
