"""Recursive-descent reader for the text format of both languages.

The target language is a superset of the source language, so one parser
serves both; with ``target=False`` the target-only forms are rejected as
unexpected tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .. import syntax as S
from ..errors import ParseError

KEYWORDS = {
    "def", "let", "in", "case", "of", "match", "with", "iterate", "from", "op", "prj",
    "real", "unit", "void", "inl", "inr",
}
TARGET_KEYWORDS = {
    "lop", "fn", "lapp", "lprj", "pair", "split", "fold", "creal", "lunit", "lin", "sigma",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<num>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<linvar>@v\b)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|-o|=>|[()\[\]{},:=+*|/;<>&.])
    """,
    re.VERBOSE,
)
_INJ = re.compile(r"in([1-9]\d*)$")


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | kw | inj | linvar | sym | eof
    text: str
    line: int
    col: int


def tokenize(text: str, target: bool = False):
    """Tokens plus the list of ``--`` comments (line, text)."""
    tokens, comments = [], []
    line, line_start, pos = 1, 0, 0
    keywords = KEYWORDS | (TARGET_KEYWORDS if target else set())
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            comments.append((line, s[2:].strip()))
        elif kind != "ws":
            if kind == "ident":
                if s in keywords:
                    kind = "kw"
                elif _INJ.match(s):
                    kind = "inj"
            elif kind == "linvar" and not target:
                raise ParseError("the linear identifier is only available in target programs", line, col)
            tokens.append(Token(kind, s, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, comments


def _number(text: str):
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    return float(text)


class Parser:
    def __init__(self, text: str, target: bool = False):
        self.target = target
        self.tokens, self.comments = tokenize(text, target)
        self.i = 0

    # --- token helpers ---------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, expected, message=None):
        t = self.tok
        shown = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(message or f"unexpected {shown}", t.line, t.col, expected)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error([text])
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error(["identifier"])
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            self.error(["integer"])
        self.i += 1
        return int(t.text)

    def number(self):
        t = self.tok
        if t.kind != "num":
            self.error(["number"])
        self.i += 1
        return _number(t.text)

    def linvar(self):
        if self.tok.kind != "linvar":
            self.error(["@v"])
        self.i += 1

    def end(self):
        if self.tok.kind != "eof":
            self.error(["end of input"])

    # --- declarations ----------------------------------------------------

    def program(self) -> S.Program:
        self.expect("def")
        name = self.ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                pname = self.ident()
                self.expect(":")
                params.append((pname, self.ctype()))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect(":")
        result = self.ctype()
        self.expect("=")
        body = self.term()
        self.end()
        names = [n for n, _ in params]
        if len(set(names)) != len(names):
            raise ParseError(f"duplicate parameter names in {name}", 1, 1)
        return S.Program(name, params, result, body, tuple(c for _, c in self.comments))

    # --- types -----------------------------------------------------------

    def ctype(self):
        summands = [self.prod_type()]
        while self.accept("+"):
            summands.append(self.prod_type())
        return summands[0] if len(summands) == 1 else S.Sum(summands)

    def prod_type(self):
        factors = [self.atom_type()]
        while self.accept("*"):
            factors.append(self.atom_type())
        return factors[0] if len(factors) == 1 else S.Product(factors)

    def atom_type(self):
        expected = ["real", "unit", "void", "("]
        if self.target:
            expected += ["lin", "sigma"]
        if self.accept("real"):
            return S.Real(self.positive())
        if self.accept("unit"):
            return S.Unit()
        if self.accept("void"):
            return S.Void()
        if self.target and self.accept("lin"):
            self.expect("(")
            dom = self.ltype()
            self.expect("-o")
            cod = self.ltype()
            self.expect(")")
            return S.LinFun(dom, cod)
        if self.target and self.accept("sigma"):
            self.expect("(")
            binder = self.ident()
            self.expect(":")
            first = self.ctype()
            self.expect(".")
            second = self.ctype()
            self.expect(")")
            return S.Sigma(binder, first, second)
        if self.accept("("):
            t = self.ctype()
            self.expect(")")
            return t
        self.error(expected)

    def positive(self) -> int:
        t = self.tok
        n = self.integer()
        if n < 1:
            raise ParseError("dimension must be positive", t.line, t.col)
        return n

    def ltype(self):
        factors = [self.atom_ltype()]
        while self.accept("&"):
            factors.append(self.atom_ltype())
        return factors[0] if len(factors) == 1 else S.Biproduct(factors)

    def atom_ltype(self):
        if self.accept("creal"):
            return S.CReal(self.positive())
        if self.accept("lunit"):
            return S.LUnit()
        if self.accept("case"):
            scrut = self.term()
            self.expect("of")
            branches = self.branches(self.ltype)
            return S.TypeCase(scrut, branches)
        if self.accept("("):
            t = self.ltype()
            self.expect(")")
            return t
        self.error(["creal", "lunit", "case", "("])

    # --- terms -----------------------------------------------------------

    def term(self):
        t = self.tok
        if t.kind == "kw":
            if t.text == "let":
                return self.let()
            if t.text == "case":
                return self.case()
            if t.text == "match":
                return self.match()
            if t.text == "iterate":
                return self.iterate()
            if self.target:
                if t.text == "fn":
                    return self.linabs()
                if t.text == "split":
                    return self.split()
        left = self.app_term()
        if not self.target:
            return left
        while self.accept("+"):
            right = self.prefix_or_app()
            left = S.Plus(left, right)
        return left

    def prefix_or_app(self):
        if self.tok.kind == "kw" and self.tok.text in ("let", "case", "match", "iterate", "fn", "split"):
            return self.term()
        return self.app_term()

    def let(self):
        self.expect("let")
        if self.target and self.tok.kind == "linvar":
            self.linvar()
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return S.LinLet(bound, self.term())
        name = self.ident()
        self.expect("=")
        bound = self.term()
        self.expect("in")
        return S.Let(name, bound, self.term())

    def branches(self, item):
        self.expect("{")
        out = []
        self.accept("|")
        k = 0
        while not self.at("}"):
            if k:
                self.expect("|")
            k += 1
            t = self.tok
            idx = self.inj_index()
            if idx != k:
                raise ParseError(f"branch {k} must be labelled in{k}", t.line, t.col, [f"in{k}"])
            name = self.ident()
            self.expect("->")
            out.append((name, item()))
        self.expect("}")
        return out

    def inj_index(self) -> int:
        t = self.tok
        if t.kind == "inj":
            self.i += 1
            return int(_INJ.match(t.text).group(1))
        if self.accept("inl"):
            return 1
        if self.accept("inr"):
            return 2
        self.error(["in1", "in2", "inl", "inr"])

    def case(self):
        self.expect("case")
        ann = None
        if self.accept("["):
            ann = self.ctype()
            self.expect("]")
        scrut = self.term()
        self.expect("of")
        return S.SumMatch(scrut, self.branches(self.term), ann)

    def names(self):
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                out.append(self.ident())
                if not self.accept(","):
                    break
        self.expect(")")
        return out

    def match(self):
        self.expect("match")
        scrut = self.term()
        self.expect("with")
        t = self.tok
        names = self.names()
        if len(names) == 1:
            raise ParseError("a product pattern binds zero or at least two names", t.line, t.col)
        self.expect("->")
        return S.ProdMatch(scrut, names, self.term())

    def iterate(self):
        self.expect("iterate")
        var = self.ident()
        init = None
        if self.accept("from"):
            init = self.term()
        self.expect("{")
        body = self.term()
        self.expect("}")
        loop = S.Iterate(var, body)
        return loop if init is None else S.Let(var, init, loop)

    def linabs(self):
        self.expect("fn")
        self.linvar()
        dom = None
        if self.accept("["):
            dom = self.ltype()
            self.expect("]")
        self.expect("=>")
        return S.LinAbs(self.term(), dom)

    def split(self):
        self.expect("split")
        scrut = self.term()
        self.expect("with")
        self.expect("(")
        a = self.ident()
        self.expect(",")
        b = self.ident()
        self.expect(")")
        self.expect("->")
        return S.PairMatch(scrut, a, b, self.term())

    def params(self):
        if not self.accept("["):
            return ()
        out = []
        if not self.at("]"):
            while True:
                out.append(self.number())
                if not self.accept(","):
                    break
        self.expect("]")
        return tuple(out)

    def args(self, close=")"):
        out = []
        if not self.at(close):
            while True:
                out.append(self.term())
                if not self.accept(","):
                    break
        return out

    def app_term(self):
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return S.Var(t.text)
        if t.kind == "linvar":
            self.i += 1
            return S.LinVar()
        if t.kind == "num" and self.target and t.text == "0":
            self.i += 1
            return S.Zero()
        if t.kind == "inj" or self.at("inl") or self.at("inr"):
            idx = self.inj_index()
            self.expect("[")
            ann = self.ctype()
            self.expect("]")
            if not isinstance(ann, S.Sum):
                raise ParseError("injection annotation must be a sum type", t.line, t.col)
            self.expect("(")
            payload = self.term()
            self.expect(")")
            if idx > len(ann.summands):
                raise ParseError(f"injection index {idx} out of range", t.line, t.col)
            return S.Inj(idx, payload, ann)
        if self.accept("op"):
            name = self.ident()
            params = self.params()
            self.expect("(")
            args = self.args()
            self.expect(")")
            return S.Op(name, args, params)
        if self.accept("prj"):
            self.expect("[")
            i = self.positive()
            self.expect("/")
            n = self.integer()
            self.expect("]")
            if n < 2 or i > n:
                raise ParseError("projection needs 1 <= i <= n and n >= 2", t.line, t.col)
            self.expect("(")
            scrut = self.term()
            self.expect(")")
            return S.proj(i, n, scrut)
        if self.accept("("):
            if self.accept(")"):
                return S.Tuple(())
            first = self.term()
            if self.accept(")"):
                return first
            comps = [first]
            while self.accept(","):
                comps.append(self.term())
            self.expect(")")
            return S.Tuple(comps)
        if self.target:
            return self.target_atom(t)
        self.error(["identifier", "op", "prj", "in1", "(", "let", "case", "match", "iterate"])

    def target_atom(self, t: Token):
        if self.accept("lop"):
            name = self.ident()
            params = self.params()
            self.expect("(")
            args = self.args(";")
            self.expect(";")
            lin = self.term()
            self.expect(")")
            return S.LOp(name, args, lin, params)
        if self.accept("<"):
            comps = self.args(">")
            self.expect(">")
            return S.LinTuple(comps)
        if self.accept("lprj"):
            self.expect("[")
            i = self.positive()
            self.expect("]")
            self.expect("(")
            inner = self.term()
            self.expect(")")
            return S.LinProj(i, inner)
        if self.accept("lapp"):
            self.expect("(")
            f = self.term()
            self.expect(",")
            a = self.term()
            self.expect(")")
            return S.LinApp(f, a)
        if self.accept("pair"):
            ann = None
            if self.accept("["):
                ann = self.ctype()
                self.expect("]")
                if not isinstance(ann, S.Sigma):
                    raise ParseError("pair annotation must be a sigma type", t.line, t.col)
            self.expect("(")
            a = self.term()
            self.expect(",")
            b = self.term()
            self.expect(")")
            return S.Pair(a, b, ann)
        if self.accept("fold"):
            var = self.ident()
            self.expect("{")
            loop = self.term()
            self.expect("}")
            self.expect("(")
            seed = self.term()
            self.expect(")")
            self.expect("with")
            self.linvar()
            self.expect("{")
            alg = self.term()
            self.expect("}")
            return S.Fold(var, loop, seed, alg)
        self.error([
            "identifier", "op", "prj", "in1", "(", "let", "case", "match", "iterate",
            "@v", "0", "lop", "<", "lprj", "lapp", "pair", "fold", "fn", "split",
        ])


def parse_program(text: str, target: bool = False) -> S.Program:
    return Parser(text, target).program()


def parse_term(text: str, target: bool = False):
    p = Parser(text, target)
    t = p.term()
    p.end()
    return t


def parse_type(text: str, target: bool = False):
    p = Parser(text, target)
    t = p.ctype()
    p.end()
    return t


def parse_ltype(text: str):
    p = Parser(text, True)
    t = p.ltype()
    p.end()
    return t


def parse_source(text: str) -> S.Program:
    """Parse one source declaration ``def f (x1: T1, ...) : S = t``."""
    return parse_program(text, target=False)
