import numpy as np
import pytest

from chad import syntax as S
from chad.errors import ChadTypeError, ParseError
from chad.generators import R1, R2, SOURCE_TYPES, STANDARD_CONTEXT, Gen, sample_env
from chad.library import entries, well_typed
from chad.source_interp import eval_term, outcomes_equal
from chad.source_lang import (
    Context,
    desugar_iterate_with_context,
    parse_program,
    parse_term,
    parse_type,
    pretty_program,
    pretty_term,
    typecheck_program,
    typecheck_source,
    uniquify,
)
from chad.terms import alpha_eq, free_vars, subst

X = S.Var("x")


# --- parsing -------------------------------------------------------------------


def test_parse_identity():
    p = parse_program("def f (x: real 1) : real 1 = x")
    assert p.params == (("x", R1),)
    assert p.body == X


def test_parse_op():
    p = parse_program("def g (x: real 1) : real 1 = op mul (x, x)")
    assert p.body == S.Op("mul", [X, X])


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_program("def h (x: real 1) : real 1 = iterate y from x { case }")
    err = info.value
    assert (err.line, err.column) == (1, 54)
    assert "case" in err.expected and "identifier" in err.expected


@pytest.mark.parametrize("text,expected", [
    ("real 3", S.Real(3)),
    ("unit", S.Unit()),
    ("real 1 * real 2", S.Product((R1, R2))),
    ("real 1 + real 2 + unit", S.Sum((R1, R2, S.Unit()))),
    ("(real 1 + real 2) * real 1", S.Product((S.Sum((R1, R2)), R1))),
])
def test_parse_type(text, expected):
    assert parse_type(text) == expected


def test_sugar():
    assert parse_term("iterate y from x { in1[real 1 + real 1](y) }") == S.Let(
        "y", X, S.Iterate("y", S.Inj(1, S.Var("y"), S.Sum((R1, R1))))
    )
    prj = parse_term("prj[2/2]((x, y))")
    assert isinstance(prj, S.ProdMatch) and prj.body == S.Var(prj.names[1])
    assert parse_term("inl[real 1 + real 2](x)") == parse_term("in1[real 1 + real 2](x)")
    assert parse_term("case x of { inl a -> a | inr b -> b }") == parse_term("case x of { in1 a -> a | in2 b -> b }")


def test_comments_are_kept():
    p = parse_program("-- hello\n-- tags: x\ndef f (x: real 1) : real 1 =\n  x\n")
    assert p.comments == ("hello", "tags: x")
    assert pretty_program(p).startswith("-- hello\n-- tags: x\ndef f")


@pytest.mark.parametrize("e", entries(), ids=lambda e: e.name)
def test_corpus_roundtrip(e):
    p = e.program()
    text = pretty_program(p)
    assert parse_program(text) == p
    assert pretty_program(parse_program(text)) == text


def test_printer_golden():
    t = parse_term("let z = op add(x, op cnst[1.0]()) in match (z, x) with (a, b) -> op mul(a, b)")
    assert pretty_term(t) == "let z = op add(x, op cnst[1.0]()) in match (z, x) with (a, b) -> op mul(a, b)"
    long = parse_term(
        "case op sign(x) of { in1 a -> op mul(op sigmoid(a), op sigmoid(op add(a, a))) "
        "| in2 b -> op mul(op cnst[2.0](), op sigmoid(op add(b, op cnst[1.0]()))) }"
    )
    assert pretty_term(long) == (
        "case op sign(x) of {\n"
        "  | in1 a ->\n"
        "    op mul(op sigmoid(a), op sigmoid(op add(a, a)))\n"
        "  | in2 b ->\n"
        "    op mul(op cnst[2.0](), op sigmoid(op add(b, op cnst[1.0]())))\n"
        "}"
    )


@pytest.mark.parametrize("seed", range(5))
def test_generated_roundtrip(seed):
    g = Gen(np.random.default_rng(seed), partial=True)
    for _ in range(40):
        t = g.term(STANDARD_CONTEXT, g.choice(SOURCE_TYPES), 3)
        assert parse_term(pretty_term(t)) == t


# --- typing ---------------------------------------------------------------------


def test_typing_examples():
    assert typecheck_source(Context([("x", R2)]), X) == R2
    assert typecheck_source(Context([("x", R1)]), S.Op("sign", [X])) == S.Sum((R1, R1))
    body = S.SumMatch(
        S.Op("decider", [S.Var("y")], (1.0,)),
        [("a", S.Inj(1, S.Var("a"), S.Sum((R1, R1)))), ("b", S.Inj(2, S.Var("b"), S.Sum((R1, R1))))],
    )
    assert typecheck_source(Context([("x", R1), ("y", R1)]), S.Iterate("y", body)) == R1


@pytest.mark.parametrize("text,rule", [
    ("z", "var"),
    ("op add(x, y)", "op"),
    ("match x with (a, b) -> a", "match"),
    ("case x of { in1 a -> a | in2 b -> b }", "case"),
    ("case d of { in1 a -> a | in2 b -> b }", "case"),
    ("iterate x { x }", "iterate"),
])
def test_type_errors(text, rule):
    ctx = Context([("x", R1), ("y", R2), ("d", S.Sum((R1, R2)))])
    with pytest.raises(ChadTypeError) as info:
        typecheck_source(ctx, parse_term(text))
    assert info.value.rule == rule


def test_type_error_path():
    ctx = Context([("x", R1)])
    with pytest.raises(ChadTypeError) as info:
        typecheck_source(ctx, parse_term("(x, let y = x in op add(y, op cnst[1.0, 2.0]()))"))
    assert info.value.path == (1, 1)


def test_corpus_types():
    for e in well_typed():
        typecheck_program(e.program())
    bad = [e for e in entries() if e.has("illtyped")]
    assert bad
    for e in bad:
        with pytest.raises(ChadTypeError):
            typecheck_program(e.program())


# --- substitution and desugaring -----------------------------------------------------


def test_subst():
    assert subst(X, {"x": S.Tuple(())}) == S.Tuple(())
    shadow = S.Let("x", S.Var("s"), X)
    assert subst(shadow, {"x": S.Var("v")}) == shadow
    capture = S.Let("y", X, S.Tuple([X, S.Var("y")]))
    out = subst(capture, {"x": S.Var("y")})
    assert out.bound == S.Var("y")
    assert out.name != "y" and free_vars(out) == {"y"}


def test_desugar_empty_context():
    body = parse_term("in1[real 1 + real 1](x)")
    assert desugar_iterate_with_context(Context([("x", R1)]), "x", body) == S.Iterate("x", body)


def test_desugar_threads_context():
    ctx = Context([("a", R1), ("x", R1)])
    body = parse_term(
        "case op decider[2.0](x) of { in1 s -> in1[real 1 + real 1](op mul(s, a)) "
        "| in2 s -> in2[real 1 + real 1](op add(s, op cnst[1.0]())) }"
    )
    out = desugar_iterate_with_context(ctx, "x", body)
    assert typecheck_source(ctx, out) == R1
    it = out.body
    assert free_vars(it.body) == {it.var}
    for a in (0.5, -1.0, 3.0):
        for x in (-2.0, 0.3, 2.5):
            env = {"a": np.array([a]), "x": np.array([x])}
            assert outcomes_equal(eval_term(env, out), eval_term(env, S.Iterate("x", body)))


def test_desugar_avoids_capture():
    # the context uses the names the expansion would pick
    ctx = Context([("w", R1), ("u", R1), ("x", R1)])
    body = parse_term(
        "case op decider[1.0](x) of { in1 s -> in1[real 1 + real 1](op add(op mul(w, u), s)) "
        "| in2 s -> in2[real 1 + real 1](op add(s, op cnst[1.0]())) }"
    )
    out = desugar_iterate_with_context(ctx, "x", body)
    assert typecheck_source(ctx, out) == R1
    env = {"w": np.array([2.0]), "u": np.array([3.0]), "x": np.array([-0.5])}
    assert outcomes_equal(eval_term(env, out), eval_term(env, S.Iterate("x", body)))


def test_uniquify_is_alpha_equivalent():
    t = parse_term("let x = x in let x = op add(x, x) in match (x, x) with (x, y) -> x")
    u = uniquify(t, ["x"])
    assert alpha_eq(t, u)
    env = {"x": np.array([1.5])}
    assert outcomes_equal(eval_term(env, t), eval_term(env, u))


@pytest.mark.parametrize("seed", range(3))
def test_desugar_random(seed):
    rng = np.random.default_rng(seed)
    g = Gen(rng)
    for _ in range(30):
        ty = g.choice(SOURCE_TYPES)
        looped = g.loop(STANDARD_CONTEXT, ty, 2, g.term(STANDARD_CONTEXT, ty, 1))
        inner = STANDARD_CONTEXT.extend(looped.name, typecheck_source(STANDARD_CONTEXT, looped.bound))
        out = desugar_iterate_with_context(inner, looped.body.var, looped.body.body)
        env = sample_env(rng, STANDARD_CONTEXT)
        rewritten = S.Let(looped.name, looped.bound, out)
        assert outcomes_equal(eval_term(env, looped), eval_term(env, rewritten))
