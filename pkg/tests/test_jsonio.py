import json

import numpy as np
import pytest

from chad import syntax as S
from chad.chad_transform import transform_program
from chad.generators import SOURCE_TYPES, STANDARD_CONTEXT, Gen
from chad.jsonio import SCHEMA, dump_program, from_json, load_program, to_json
from chad.library import entries, well_typed


def test_encoding():
    t = S.Op("cnst", (), (1.5,))
    assert to_json(t) == {"node": "Op", "name": "cnst", "args": [], "params": [1.5]}
    assert from_json(to_json(t)) == t


@pytest.mark.parametrize("e", entries(), ids=lambda e: e.name)
def test_source_roundtrip(e):
    p = e.program()
    back = load_program(dump_program(p))
    assert (back.name, back.params, back.result, back.body) == (p.name, p.params, p.result, p.body)


@pytest.mark.parametrize("e", well_typed(), ids=lambda e: e.name)
def test_target_roundtrip(e):
    p = transform_program(e.program())
    back = load_program(dump_program(p))
    assert back.body == p.body and back.result == p.result


def test_generated_terms():
    g = Gen(np.random.default_rng(0), partial=True)
    for _ in range(100):
        t = g.term(STANDARD_CONTEXT, g.choice(SOURCE_TYPES), 3)
        assert from_json(json.loads(json.dumps(to_json(t)))) == t


def test_schema_checked():
    doc = json.loads(dump_program(entries()[0].program()))
    assert doc["schema"] == SCHEMA
    doc["schema"] = 99
    with pytest.raises(ValueError):
        load_program(json.dumps(doc))
    with pytest.raises(ValueError):
        from_json({"node": "Lambda"})
