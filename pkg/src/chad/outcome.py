"""Evaluation outcomes shared by both interpreters and the primitive registry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class Defined:
    value: Any


@dataclass(frozen=True)
class Undefined:
    """Semantic bottom caused by leaving the domain of a partial operation."""


@dataclass(frozen=True)
class FuelExhausted:
    """Semantic bottom observed as running out of loop-body evaluations."""

    steps: int


UNDEFINED = Undefined()


class Bottom(Exception):
    """Raised inside evaluators to propagate a bottom strictly."""

    def outcome(self):
        raise NotImplementedError


class UndefinedError(Bottom):
    def outcome(self):
        return UNDEFINED


class FuelExhaustedError(Bottom):
    def __init__(self, steps: int):
        super().__init__(f"fuel exhausted after {steps} loop steps")
        self.steps = steps

    def outcome(self):
        return FuelExhausted(self.steps)


def is_bottom(outcome) -> bool:
    return isinstance(outcome, (Undefined, FuelExhausted))


class Fuel:
    """Mutable budget of loop-body evaluations for one top-level evaluation."""

    def __init__(self, limit: int):
        if limit < 1:
            raise ValueError("fuel must be positive")
        self.limit = limit
        self.used = 0

    def tick(self):
        if self.used >= self.limit:
            raise FuelExhaustedError(self.used)
        self.used += 1
