"""``chad`` command line.

Subcommands: ``parse``, ``typecheck``, ``transform``, ``eval``,
``eval-target``, ``check`` and ``ops list``. Exit status is 0 on success,
1 for a failed check or a parse or type error, 2 for usage and
configuration errors. Errors go to standard error, as one line of JSON
when ``--json`` is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, jsonio, primitives
from . import syntax as S
from .chad_transform import transform_program
from .errors import ChadError, ChadTypeError, ConfigError, ParseError
from .library import resolve_path
from .outcome import Defined, FuelExhausted
from .source_interp import default_fuel, eval_program, value_from_py, value_to_py
from .source_lang import Context, parse_program, pretty_program, pretty_type, typecheck_program
from .target_interp import cotangent_from_py, cotangent_to_py, gradient_by_param, linearize
from .target_lang import parse_target_program
from .target_lang.typing import TargetChecker

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class Config:
    fuel: int = 1_000_000
    seed: int = 0
    samples: int = 100
    h: float = 1e-5
    tol: float = 1e-4
    low: float = -3.0
    high: float = 3.0
    boxes: dict = field(default_factory=dict)  # coordinate -> [low, high]
    emit: str = "target"

    def validate(self) -> "Config":
        for name in ("fuel", "samples", "h", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        for j, (lo, hi) in [(None, (self.low, self.high))] + list(self.boxes.items()):
            if not lo < hi:
                where = "sampler box" if j is None else f"box for coordinate {j}"
                raise ConfigError(f"{where} is empty: [{lo}, {hi}]")
        if self.emit not in ("target", "json-ast"):
            raise ConfigError(f"unknown emit format {self.emit!r}")
        return self

    def to_json(self) -> dict:
        out = asdict(self)
        out["boxes"] = {str(k): list(v) for k, v in self.boxes.items()}
        return {"schema": 1, **out}

    @classmethod
    def from_json(cls, obj: dict) -> "Config":
        obj = {k: v for k, v in obj.items() if k != "schema"}
        obj["boxes"] = {int(k): tuple(v) for k, v in obj.get("boxes", {}).items()}
        return cls(**obj).validate()


# ---------------------------------------------------------------------------
# helpers


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    p = resolve_path(path)
    try:
        return p.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _load_source(path: str) -> S.Program:
    program = parse_program(_read(path))
    typecheck_program(program)
    return program


def _is_source(program: S.Program) -> bool:
    from .terms import subterms

    return all(isinstance(n, S.SOURCE_TERMS) for n in subterms(program.body) if isinstance(n, S.Term))


def _load_any(path: str) -> tuple:
    """``(source or None, transformed program)`` for a source or target file."""
    program = parse_target_program(_read(path))
    if _is_source(program):
        typecheck_program(program)
        return program, transform_program(program)
    if not isinstance(program.result, S.Sigma):
        raise UsageError(f"{program.name} is neither a source program nor a transformed one")
    TargetChecker().check(Context(program.params), program.body, program.result)
    return None, program


def _fuel(args) -> int:
    fuel = args.fuel if getattr(args, "fuel", None) is not None else default_fuel()
    if fuel < 1:
        raise ConfigError(f"fuel must be positive, got {fuel}")
    return fuel


def _json_arg(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} is not valid JSON: {e.msg}") from None


def _inputs(program: S.Program, text: str) -> list:
    """Arguments from a JSON array; a lone argument may also be given unwrapped."""
    obj = _json_arg(text, "--input")
    params = program.params
    attempts = [obj] if isinstance(obj, list) else []
    if len(params) == 1:
        attempts.append([obj])
    err = f"{program.name} takes {len(params)} arguments; pass a JSON array of them"
    for cand in attempts:
        if len(cand) != len(params):
            continue
        try:
            return [value_from_py(v, ty) for v, (_, ty) in zip(cand, params)]
        except ValueError as e:
            err = f"bad input: {e}"
    raise UsageError(err)


def outcome_to_py(outcome):
    if isinstance(outcome, Defined):
        return value_to_py(outcome.value)
    if isinstance(outcome, FuelExhausted):
        return {"fuel_exhausted": outcome.steps}
    return {"undefined": True}


def _print_json(obj):
    print(json.dumps(obj))


# ---------------------------------------------------------------------------
# subcommands


def cmd_parse(args) -> int:
    text = _read(args.file)
    program = parse_target_program(text) if args.target else parse_program(text)
    if args.json:
        print(jsonio.dump_program(program))
    else:
        sys.stdout.write(pretty_program(program))
    return EXIT_OK


def cmd_typecheck(args) -> int:
    program = _load_source(args.file)
    result = {"program": program.name, "type": pretty_type(program.result)}
    if args.target:
        target = transform_program(program)
        checker = TargetChecker()
        checker.check(Context(target.params), target.body, target.result)
        result["target_type"] = pretty_type(target.result)
        result["unknown"] = checker.stats.unknown
    if args.json:
        _print_json({"schema": 1, **result})
    else:
        print(f"{program.name} : {result['type']}")
        if args.target:
            print(f"D[{program.name}] : {result['target_type']}")
    return EXIT_OK


def cmd_transform(args) -> int:
    target = transform_program(_load_source(args.file))
    if args.emit == "json-ast":
        print(jsonio.dump_program(target))
    else:
        sys.stdout.write(pretty_program(target))
    return EXIT_OK


def cmd_eval(args) -> int:
    program = _load_source(args.file)
    out = eval_program(program, _inputs(program, args.input), _fuel(args))
    _print_json(outcome_to_py(out))
    return EXIT_OK


def cmd_eval_target(args) -> int:
    _, target = _load_any(args.file)
    values = _inputs(target, args.input)
    primal, pullback = linearize(target, values, _fuel(args))
    result = {"primal": outcome_to_py(primal), "gradient": None}
    if pullback is not None and args.cotangent is not None:
        obj = _json_arg(args.cotangent, "--cotangent")
        try:
            c = cotangent_from_py(obj, primal.value)
        except ValueError as e:
            raise UsageError(f"bad cotangent: {e}") from None
        g = pullback(c)
        if isinstance(g, Defined):
            parts = gradient_by_param(target, g.value)
            result["gradient"] = [cotangent_to_py(x) for x in parts]
        else:
            result["gradient"] = outcome_to_py(g)
    _print_json(result)
    return EXIT_OK


def _parse_box(text: str):
    try:
        j, lo, hi = text.split(":")
        return int(j), (float(lo), float(hi))
    except ValueError:
        raise UsageError(f"--box expects J:LOW:HIGH, got {text!r}") from None


def cmd_check(args) -> int:
    from .deriv_check import SamplerConfig, check_program

    cfg = Config(
        fuel=_fuel(args), seed=args.seed, samples=args.samples, h=args.h, tol=args.tol,
        low=args.low, high=args.high, boxes=dict(_parse_box(b) for b in args.box),
    ).validate()
    program = _load_source(args.file)
    sampler = SamplerConfig(low=cfg.low, high=cfg.high, boxes=cfg.boxes)
    report = check_program(program, cfg.samples, sampler, cfg.h, cfg.tol, cfg.fuel, cfg.seed)
    if args.json:
        doc = json.dumps(report.to_json(), indent=2, default=float)
        if args.json == "-":
            print(doc)
        else:
            Path(args.json).write_text(doc + "\n", encoding="utf-8")
    if args.json != "-":
        print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_ops(args) -> int:
    rows = primitives.describe()
    if args.json:
        _print_json({"schema": 1, "ops": rows})
        return EXIT_OK
    for r in rows:
        ins = ", ".join(r["in_dims"]) or "-"
        outs = " | ".join(r["out_dims"])
        total = "total" if r["total"] else "partial"
        print(f"{r['name']:<10} in: {ins:<12} out: {outs:<14} {total}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chad", description="Reverse-mode differentiation with iteration.")
    ap.add_argument("--version", action="version", version=f"chad {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(fn=fn)
        return p

    def json_flag(p):
        p.add_argument("--json", action="store_true", help="machine-readable output and errors")

    def fuel_flag(p):
        p.add_argument("--fuel", type=int, help="loop steps before giving up (default: $CHAD_FUEL or 1000000)")

    p = add("parse", cmd_parse, "parse a program and print it in canonical form")
    p.add_argument("file")
    p.add_argument("--target", action="store_true", help="accept target-language syntax")
    json_flag(p)

    p = add("typecheck", cmd_typecheck, "typecheck a source program")
    p.add_argument("file")
    p.add_argument("--target", action="store_true", help="also typecheck the transformed program")
    json_flag(p)

    p = add("transform", cmd_transform, "print the transformed program")
    p.add_argument("file")
    p.add_argument("--emit", choices=("target", "json-ast"), default="target")
    json_flag(p)

    p = add("eval", cmd_eval, "evaluate a source program")
    p.add_argument("file")
    p.add_argument("--input", required=True, help="JSON array of arguments")
    fuel_flag(p)
    json_flag(p)

    p = add("eval-target", cmd_eval_target, "evaluate a transformed program and pull back a cotangent")
    p.add_argument("file", help="source program (transformed first) or transformed program")
    p.add_argument("--input", required=True, help="JSON array of arguments")
    p.add_argument("--cotangent", help="JSON cotangent for the output value")
    fuel_flag(p)
    json_flag(p)

    p = add("check", cmd_check, "compare derivatives with finite differences at sampled points")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--low", type=float, default=-3.0, help="lower end of the default sampling box")
    p.add_argument("--high", type=float, default=3.0, help="upper end of the default sampling box")
    p.add_argument("--box", action="append", default=[], metavar="J:LOW:HIGH",
                   help="sampling box for input coordinate J")
    p.add_argument("--json", metavar="OUT", help="write the JSON report to OUT ('-' for stdout)")
    fuel_flag(p)

    p = add("ops", cmd_ops, "primitive operations")
    p.add_argument("action", choices=("list",))
    json_flag(p)
    return ap


def _report_error(args, kind: str, message: str, **extra):
    if getattr(args, "json", None):
        sys.stderr.write(json.dumps({"schema": 1, "error": kind, "message": message, **extra}) + "\n")
    else:
        sys.stderr.write(f"chad: {kind}: {message}\n")


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        _report_error(args, "ParseError", str(e), line=e.line, column=e.column)
        return EXIT_FAIL
    except ChadTypeError as e:
        _report_error(args, "TypeError", str(e), rule=e.rule, path=list(e.path))
        return EXIT_FAIL
    except (ConfigError, UsageError) as e:
        _report_error(args, "ConfigError" if isinstance(e, ConfigError) else "UsageError", str(e))
        return EXIT_USAGE
    except ChadError as e:
        _report_error(args, type(e).__name__, str(e))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
