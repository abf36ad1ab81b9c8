"""Blockwise verdict reports.

A :class:`BoundReport` is self-contained: every row stores both sides and the
relation, so :meth:`BlockRow.rederive` recomputes the verdict from the stored
numbers alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

from bcq.enclosure import REFINEMENT_WIDTHS, RationalEnclosure

HOLDS = "holds"
VIOLATED = "violated"
INAPPLICABLE = "inapplicable"
INCONCLUSIVE = "inconclusive"

Value = Union[Fraction, RationalEnclosure, None]


def judge(lhs: Value, rhs: Value, relation: str) -> tuple[str, Value]:
    """Compare two sides; returns (verdict, margin).

    ``>=``/``<=`` margins are oriented so that margin >= 0 means the
    inequality holds. For ``==`` the margin is lhs - rhs; with enclosures
    the identity holds when the margin enclosure contains 0.
    """
    if lhs is None or rhs is None:
        return INAPPLICABLE, None
    if relation == ">=":
        margin = lhs - rhs
    elif relation == "<=":
        margin = rhs - lhs
    elif relation == "==":
        margin = lhs - rhs
    else:
        raise ValueError(f"unknown relation {relation!r}")
    if isinstance(margin, RationalEnclosure) and margin.is_exact:
        margin = margin.lower
    if isinstance(margin, Fraction):
        if relation == "==":
            return (HOLDS if margin == 0 else VIOLATED), margin
        return (HOLDS if margin >= 0 else VIOLATED), margin
    if relation == "==":
        return (HOLDS if margin.contains(0) else VIOLATED), margin
    if margin.lower >= 0:
        return HOLDS, margin
    if margin.upper < 0:
        return VIOLATED, margin
    return INCONCLUSIVE, margin


@dataclass(frozen=True)
class BlockRow:
    block: int
    lhs: Value
    rhs: Value
    relation: str
    verdict: str
    margin: Value = None
    label: str = ""
    note: str = ""

    def rederive(self) -> str:
        if self.verdict == INAPPLICABLE:
            return INAPPLICABLE
        return judge(self.lhs, self.rhs, self.relation)[0]


def row(block: int, lhs: Value, rhs: Value, relation: str, label: str = "", note: str = "") -> BlockRow:
    verdict, margin = judge(lhs, rhs, relation)
    return BlockRow(block, lhs, rhs, relation, verdict, margin, label, note)


def inapplicable(block: int, note: str, label: str = "", relation: str = ">=",
                 lhs: Value = None, rhs: Value = None) -> BlockRow:
    return BlockRow(block, lhs, rhs, relation, INAPPLICABLE, None, label, note)


def decide(block: int, lhs_at, rhs_at, relation: str, label: str = "", note: str = "") -> BlockRow:
    """Compare sides given as ``width -> value`` callables, refining the
    enclosure width until the verdict is decided or the finest width is hit."""
    result = None
    for width in REFINEMENT_WIDTHS:
        result = row(block, lhs_at(width), rhs_at(width), relation, label, note)
        if result.verdict != INCONCLUSIVE:
            return result
    return replace(result, note=(note + "; " if note else "") + "inconclusive-precision")


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    rows: tuple
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        verdicts = {r.verdict for r in self.rows}
        if VIOLATED in verdicts:
            return VIOLATED
        if HOLDS in verdicts:
            return HOLDS
        if INCONCLUSIVE in verdicts:
            return INCONCLUSIVE
        return INAPPLICABLE

    @property
    def exit_code(self) -> int:
        return {HOLDS: 0, VIOLATED: 1}.get(self.status, 3)

    def verdicts(self) -> dict:
        return {(r.block, r.label): r.verdict for r in self.rows}

    def restrict(self, blocks) -> "BoundReport":
        keep = set(blocks)
        return replace(self, rows=tuple(r for r in self.rows if r.block in keep))

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "status": self.status,
            "params": encode(self.params),
            "rows": [
                {"block": r.block, "label": r.label, "lhs": encode(r.lhs), "rhs": encode(r.rhs),
                 "relation": r.relation, "margin": encode(r.margin), "verdict": r.verdict,
                 "note": r.note}
                for r in self.rows
            ],
            "extras": encode(self.extras),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundReport":
        rows = tuple(
            BlockRow(r["block"], decode(r["lhs"]), decode(r["rhs"]), r["relation"], r["verdict"],
                     decode(r["margin"]), r["label"], r["note"])
            for r in data["rows"])
        return cls(data["theorem"], rows, decode(data["params"]), decode(data["extras"]))


def encode(x):
    """JSON-ready form; rationals become {"q": "p/q"} so they decode exactly."""
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, Fraction):
        return {"q": str(x)}
    if isinstance(x, RationalEnclosure):
        return {"lower": str(x.lower), "upper": str(x.upper)}
    if isinstance(x, float):
        return x
    if isinstance(x, dict):
        return {str(k): encode(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [encode(v) for v in x]
    raise TypeError(f"cannot encode {type(x).__name__}")


def decode(x):
    if isinstance(x, dict):
        if set(x) == {"q"}:
            return Fraction(x["q"])
        if set(x) == {"lower", "upper"}:
            return RationalEnclosure(Fraction(x["lower"]), Fraction(x["upper"]))
        return {k: decode(v) for k, v in x.items()}
    if isinstance(x, list):
        return [decode(v) for v in x]
    return x
