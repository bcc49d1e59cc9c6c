"""Results shared by the oracle and both decision engines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

# A witness path is a sequence of child steps: L/R for arrow children,
# B/D for quantifier bound/body.
Path = tuple[str, ...]
STEPS = ("L", "R", "B", "D")


def format_path(path: Path) -> str:
    return "".join(path) if path else "ε"


def parse_path(text: str) -> Path:
    if text in ("", "ε"):
        return ()
    if any(c not in STEPS for c in text):
        raise ValueError(f"bad path {text!r}")
    return tuple(text)


@dataclass(frozen=True)
class Yes:
    assertions: int = 0
    promotions: int = 0

    kind = "yes"


@dataclass(frozen=True)
class YesToDepth:
    """The oracle found no clash above the truncation depth."""

    depth: int

    kind = "yes"


@dataclass(frozen=True)
class No:
    path: Path
    clash: str
    assertions: int = 0
    promotions: int = 0

    kind = "no"


@dataclass(frozen=True)
class BudgetExceeded:
    assertions: int

    kind = "budget"


Verdict = Union[Yes, No, BudgetExceeded]
OracleResult = Union[YesToDepth, No]


def verdict_to_json(v: Verdict | OracleResult) -> dict:
    out: dict = {"verdict": v.kind}
    match v:
        case No(path, clash, assertions, promotions):
            out.update(witnessPath=format_path(path), clash=clash,
                       assertions=assertions, promotions=promotions)
        case Yes(assertions, promotions):
            out.update(witnessPath=None, assertions=assertions, promotions=promotions)
        case YesToDepth(depth):
            out.update(witnessPath=None, depth=depth)
        case BudgetExceeded(assertions):
            out.update(witnessPath=None, assertions=assertions)
    return out
