"""Abstract syntax shared by the source and target languages.

Types and terms are immutable dataclasses. The source language uses the
first block of term constructors; the target language adds the linear
fragment, dependent pairs and the fold eliminator. Keeping both in one
module lets the generic traversals in :mod:`chad.terms` see every node.

The target language has a single linear identifier. It is represented by
:class:`LinVar` and, inside the binding machinery, by the reserved name
:data:`LIN`, which can never collide with a user identifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

LIN = "@v"


# ---------------------------------------------------------------------------
# Cartesian types (the source types plus linear functions and Sigma types)


@dataclass(frozen=True)
class Real:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"real array dimension must be >= 1, got {self.n}")


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 2:
            raise ValueError("Product needs at least two factors; use Unit for zero")


@dataclass(frozen=True)
class Void:
    pass


@dataclass(frozen=True)
class Sum:
    summands: tuple

    def __post_init__(self):
        object.__setattr__(self, "summands", tuple(self.summands))
        if len(self.summands) < 2:
            raise ValueError("Sum needs at least two summands; use Void for zero")


@dataclass(frozen=True)
class LinFun:
    dom: "LinType"
    cod: "LinType"


@dataclass(frozen=True)
class Sigma:
    binder: str
    first: "CartType"
    second: "CartType"


# ---------------------------------------------------------------------------
# Linear types


@dataclass(frozen=True)
class CReal:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"creal dimension must be >= 1, got {self.n}")


@dataclass(frozen=True)
class LUnit:
    pass


@dataclass(frozen=True)
class Biproduct:
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 2:
            raise ValueError("Biproduct needs at least two factors")


@dataclass(frozen=True)
class TypeCase:
    """Type-level case distinction ``case t of in1 x1 -> L1 | ...``."""

    scrutinee: "Term"
    branches: tuple  # of (binder, LinType)

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple((b, t) for b, t in self.branches))


SrcType = Union[Real, Unit, Product, Void, Sum]
CartType = Union[Real, Unit, Product, Void, Sum, LinFun, Sigma]
LinType = Union[CReal, LUnit, Biproduct, TypeCase]

SOURCE_TYPES = (Real, Unit, Product, Void, Sum)
CART_TYPES = SOURCE_TYPES + (LinFun, Sigma)
LIN_TYPES = (CReal, LUnit, Biproduct, TypeCase)


def product(factors) -> CartType:
    """n-ary product with the nullary case mapped to Unit and unary collapsed."""
    factors = tuple(factors)
    if not factors:
        return Unit()
    if len(factors) == 1:
        return factors[0]
    return Product(factors)


def biproduct(factors) -> LinType:
    factors = tuple(factors)
    if not factors:
        return LUnit()
    if len(factors) == 1:
        return factors[0]
    return Biproduct(factors)


def product_factors(t) -> tuple:
    if isinstance(t, Unit):
        return ()
    if isinstance(t, Product):
        return t.factors
    raise TypeError(f"not a product type: {t}")


def sum_summands(t) -> tuple:
    if isinstance(t, Void):
        return ()
    if isinstance(t, Sum):
        return t.summands
    raise TypeError(f"not a sum type: {t}")


def biproduct_factors(t) -> tuple:
    if isinstance(t, LUnit):
        return ()
    if isinstance(t, Biproduct):
        return t.factors
    raise TypeError(f"not a biproduct type: {t}")


# ---------------------------------------------------------------------------
# Terms: source fragment


class Term:
    """Marker base class for all term nodes."""


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Op(Term):
    name: str
    args: tuple
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class Let(Term):
    name: str
    bound: Term
    body: Term


@dataclass(frozen=True)
class Inj(Term):
    index: int  # 1-based
    payload: Term
    annotation: Sum

    def __post_init__(self):
        if not 1 <= self.index <= len(sum_summands(self.annotation)):
            raise ValueError(f"injection index {self.index} out of range for {self.annotation}")


@dataclass(frozen=True)
class SumMatch(Term):
    scrutinee: Term
    branches: tuple  # of (name, Term)
    annotation: Optional[CartType] = None  # result type, only needed for empty cases

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple((n, t) for n, t in self.branches))


@dataclass(frozen=True)
class Tuple(Term):
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) == 1:
            raise ValueError("unary tuples are not part of the language")


@dataclass(frozen=True)
class ProdMatch(Term):
    scrutinee: Term
    names: tuple
    body: Term

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))


@dataclass(frozen=True)
class Iterate(Term):
    """``iterate x. body``: ``x`` is the initial state and the loop variable."""

    var: str
    body: Term


# ---------------------------------------------------------------------------
# Terms: target-only fragment


@dataclass(frozen=True)
class LinVar(Term):
    pass


@dataclass(frozen=True)
class LinLet(Term):
    bound: Term
    body: Term


@dataclass(frozen=True)
class LOp(Term):
    """Transposed derivative of a primitive: ``lop name(args; lin_arg)``."""

    name: str
    args: tuple
    lin_arg: Term
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class LinTuple(Term):
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))


@dataclass(frozen=True)
class LinProj(Term):
    index: int  # 1-based
    term: Term


@dataclass(frozen=True)
class LinAbs(Term):
    body: Term
    domain: Optional[LinType] = None


@dataclass(frozen=True)
class LinApp(Term):
    fun: Term
    arg: Term


@dataclass(frozen=True)
class Zero(Term):
    pass


@dataclass(frozen=True)
class Plus(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Fold(Term):
    """``fold[x. loop_body] seed with v -> algebra``.

    ``loop_var`` is free (the initial state) and is rebound to each visited
    state inside ``loop_body`` and ``algebra``.
    """

    loop_var: str
    loop_body: Term
    seed: Term
    algebra: Term


@dataclass(frozen=True)
class Pair(Term):
    first: Term
    second: Term
    annotation: Optional[Sigma] = None


@dataclass(frozen=True)
class PairMatch(Term):
    scrutinee: Term
    first_name: str
    second_name: str
    body: Term


SOURCE_TERMS = (Var, Op, Let, Inj, SumMatch, Tuple, ProdMatch, Iterate)


def plus_all(terms) -> Term:
    """Left-nested sum, ``Zero`` for an empty list."""
    terms = list(terms)
    if not terms:
        return Zero()
    acc = terms[0]
    for t in terms[1:]:
        acc = Plus(acc, t)
    return acc


def proj(i: int, n: int, term: Term, name: str = "_q") -> Term:
    """Source-level ``prj_i`` sugar expanded to a product match."""
    names = tuple(f"{name}{k}" for k in range(1, n + 1))
    return ProdMatch(term, names, Var(names[i - 1]))


@dataclass(frozen=True)
class Program:
    """A top-level declaration ``def name (params) : result = body``."""

    name: str
    params: tuple  # of (name, SrcType)
    result: SrcType
    body: Term
    comments: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple((n, t) for n, t in self.params))
        names = [n for n, _ in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {self.name}")
