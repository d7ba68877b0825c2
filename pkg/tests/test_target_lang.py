import pytest

from chad import syntax as S
from chad.chad_transform import transform_program
from chad.errors import ChadTypeError
from chad.library import entry, well_typed
from chad.source_lang import Context
from chad.target_lang import (
    EQUAL,
    NOT_EQUAL,
    UNKNOWN,
    TargetChecker,
    normalize,
    parse_ltype,
    parse_target_program,
    parse_target_term,
    pretty_program,
    type_equal,
    typecheck_target,
)
from chad.terms import alpha_eq

R1, C1, C2 = S.Real(1), S.CReal(1), S.CReal(2)
SUM11 = S.Sum((R1, R1))
CTX = Context([("x", R1), ("d", SUM11), ("f", S.LinFun(C1, C2))])


def lin_type(lin, text, expected=None):
    return typecheck_target(CTX, lin, parse_target_term(text), expected)


def test_plus_zero():
    assert lin_type(C2, "@v + 0") == C2
    assert lin_type(C2, "0 + @v", C2) == C2


def test_case_of_types():
    lt = parse_ltype("case d of { in1 y -> creal 1 | in2 z -> creal 1 }")
    t = parse_target_term("case d of { in1 y -> lop sigmoid(y; @v) | in2 z -> @v }")
    assert typecheck_target(CTX, lt, t) == C1


@pytest.mark.parametrize("lin,text,want", [
    (C1, "lapp(f, @v)", C2),
    (C1, "lop mul(x, x; @v)", S.Biproduct((C1, C1))),
    (C1, "<@v, lop sigmoid(x; @v)>", S.Biproduct((C1, C1))),
    (S.Biproduct((C1, C2)), "lprj[2](@v)", C2),
    (C1, "let @v = <@v, @v> in lprj[1](@v) + lprj[2](@v)", C1),
])
def test_linear_rules(lin, text, want):
    assert lin_type(lin, text) == want


@pytest.mark.parametrize("lin,text,rule", [
    (C1, "<@v>", "ltuple"),
    (C1, "lprj[1](@v)", "lprj"),
    (C1, "@v + x", "lin"),
    (C2, "lop sigmoid(x; @v)", "linvar"),
])
def test_linear_errors(lin, text, rule):
    with pytest.raises(ChadTypeError) as info:
        lin_type(lin, text)
    assert info.value.rule == rule


def test_linear_variable_needs_a_zone():
    with pytest.raises(ChadTypeError) as info:
        typecheck_target(CTX, None, parse_target_term("@v"), linear=True)
    assert info.value.rule == "linvar"


def test_sigma_pair():
    t = parse_target_term("pair[sigma(p : real 1 . lin(creal 1 -o creal 1))](x, fn @v => @v)")
    ty = typecheck_target(CTX, None, t)
    assert ty == S.Sigma("p", R1, S.LinFun(C1, C1))


def test_unannotated_abstraction_is_not_inferred():
    with pytest.raises(ChadTypeError) as info:
        typecheck_target(CTX, None, parse_target_term("fn @v => @v"))
    assert info.value.rule == "lam"
    assert typecheck_target(CTX, None, parse_target_term("fn @v => lapp(f, @v)"), S.LinFun(C1, C2))


# --- type equality ------------------------------------------------------------------


def case_of(scrut, a, b):
    return S.TypeCase(scrut, (("y", a), ("z", b)))


def test_case_beta():
    assert type_equal(case_of(S.Inj(1, S.Var("t"), SUM11), C1, C2), C1) is EQUAL
    assert type_equal(case_of(S.Inj(2, S.Var("t"), SUM11), C1, C2), C2) is EQUAL
    assert normalize(case_of(S.Inj(2, S.Var("t"), SUM11), C1, C2)) == C2


def test_case_eta():
    assert type_equal(case_of(S.Var("t"), C1, C1), C1) is EQUAL


def test_alpha():
    a = S.TypeCase(S.Var("t"), (("y", C1), ("z", C2)))
    b = S.TypeCase(S.Var("t"), (("u", C1), ("w", C2)))
    assert type_equal(a, b) is EQUAL
    assert type_equal(S.CReal(3), S.CReal(3)) is EQUAL
    assert type_equal(S.CReal(3), C2) is NOT_EQUAL


def test_opaque_scrutinee_is_unknown():
    stuck = case_of(S.Op("sign", (S.Var("t"),)), C1, C2)
    assert type_equal(stuck, C1) is UNKNOWN


# --- macro output -------------------------------------------------------------------


def test_halving_transform_typechecks():
    target = transform_program(entry("halving").program())
    checker = TargetChecker()
    checker.check(Context(target.params), target.body, target.result)
    assert checker.stats.unknown == 0
    assert any(isinstance(n, S.Fold) for n in _walk(target.body))


def _walk(t):
    from chad.terms import subterms

    return subterms(t)


@pytest.mark.parametrize("e", well_typed(), ids=lambda e: e.name)
def test_target_roundtrip(e):
    target = transform_program(e.program())
    back = parse_target_program(pretty_program(target))
    assert back.params == target.params
    assert alpha_eq(back.body, target.body)
    assert type_equal(back.result, target.result) is EQUAL
