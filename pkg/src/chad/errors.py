"""Exception hierarchy for the whole pipeline."""

from __future__ import annotations


class ChadError(Exception):
    """Base class for every user-facing error."""


class ParseError(ChadError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{line}:{column}: {message}{detail}")


class ChadTypeError(ChadError):
    """A failed typing rule, with the path of child indices to the subterm."""

    def __init__(self, rule: str, message: str, path=()):
        self.rule = rule
        self.message = message
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"[{rule}] at {where}: {message}")

    def at(self, step) -> "ChadTypeError":
        err = type(self)(self.rule, self.message, (step,) + self.path)
        return err


class TypeEqUnknown(ChadTypeError):
    """Type equality fell outside the decidable fragment."""


class UnknownOp(ChadError):
    pass


class DimensionMismatch(ChadError):
    pass


class OutsideDomain(ChadError):
    pass


class BranchCrossed(ChadError):
    def __init__(self, axis: int):
        self.axis = axis
        super().__init__(f"probes along axis {axis} land in different branches")


class ConfigError(ChadError):
    pass
