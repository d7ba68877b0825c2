"""JSON encoding of programs, terms and types.

Every AST node becomes an object ``{"node": <class name>, <field>: ...}``
whose fields are those of the dataclass in :mod:`chad.syntax`. Tuples
become arrays, so case branches are ``[name, term]`` pairs and op
parameters are arrays of numbers. A whole program is wrapped as

    {"schema": 1, "program": {"node": "Program", "name": ..., "params": [[name, type], ...],
                              "result": type, "body": term}}

The format is documented for downstream tools in ``docs/json-ast.md``.
"""

from __future__ import annotations

import json
from dataclasses import fields, is_dataclass

from . import syntax as S

SCHEMA = 1

_NODES = {
    cls.__name__: cls
    for cls in vars(S).values()
    if isinstance(cls, type) and is_dataclass(cls) and cls.__module__ == S.__name__
}


def to_json(node):
    """Plain JSON-compatible structure for a node, or a tuple of them."""
    if is_dataclass(node) and not isinstance(node, type):
        out = {"node": type(node).__name__}
        for f in fields(node):
            if f.name == "comments":
                continue
            out[f.name] = to_json(getattr(node, f.name))
        return out
    if isinstance(node, (tuple, list)):
        return [to_json(x) for x in node]
    if node is None or isinstance(node, (str, int, float)):
        return node
    raise TypeError(f"cannot encode {node!r}")


def from_json(obj):
    """Inverse of :func:`to_json`."""
    if isinstance(obj, dict):
        kind = obj.get("node")
        cls = _NODES.get(kind)
        if cls is None:
            raise ValueError(f"unknown node kind {kind!r}")
        kwargs = {k: from_json(v) for k, v in obj.items() if k != "node"}
        return cls(**kwargs)
    if isinstance(obj, list):
        return tuple(from_json(x) for x in obj)
    return obj


def dump_program(program: S.Program, indent=None) -> str:
    return json.dumps({"schema": SCHEMA, "program": to_json(program)}, indent=indent)


def load_program(text: str) -> S.Program:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    return from_json(doc["program"])
