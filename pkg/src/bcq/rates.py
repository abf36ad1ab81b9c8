"""Per-block rate functions for the quantitative lemmas.

* divergence rate psi(N): least n with sum_{i<=n} P(A_i|F) >= N
* convergence rate phi(l): least n whose rigorous tail bound is <= 2**-l
* correlation rate phi(l, n): least j >= n with second-moment ratio <= 1 + 2**-l

Every table entry is a least witness found by exact rational comparison.
Blocks where a rate cannot exist are ``inapplicable``; blocks where the scan
ran out of budget are ``budget-exhausted``. The two are kept apart because a
finite scan never proves nonexistence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from bcq.enclosure import power_of_two
from bcq.errors import InvalidInput
from bcq.models import (
    BernoulliComponent,
    ExplicitModel,
    SequenceModel,
    block_count,
    divergence_class,
    iter_marginals,
    iter_moments,
    null_blocks,
    tail_bound,
)

OK = "ok"
INAPPLICABLE = "inapplicable"
BUDGET_EXHAUSTED = "budget-exhausted"
DEFAULT_BUDGET = 10**6


@dataclass(frozen=True)
class RateFunction:
    """Per-block table level -> index, for psi (``kind='psi'``) or phi."""

    kind: str
    tables: tuple
    status: tuple
    notes: tuple

    def value(self, block: int, level: int) -> int | None:
        if not 0 <= block < len(self.tables):
            return None
        return self.tables[block].get(level)

    def applicable(self, block: int) -> bool:
        return self.status[block] == OK

    @classmethod
    def from_function(cls, kind: str, blocks: int, fn: Callable[[int], int],
                      levels) -> "RateFunction":
        """A user-claimed rate, same on every block; nothing is verified here."""
        table = {int(lv): int(fn(lv)) for lv in levels}
        return cls(kind, tuple(dict(table) for _ in range(blocks)),
                   (OK,) * blocks, ("claimed",) * blocks)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "blocks": [
                {"block": b, "status": s, "note": n,
                 "table": {str(k): v for k, v in sorted(t.items())}}
                for b, (t, s, n) in enumerate(zip(self.tables, self.status, self.notes))
            ],
        }


@dataclass
class CorrelationRate:
    """Per-block map (l, n) -> phi(l, n) with the achieved ratio."""

    blocks: int
    j_budget: int = DEFAULT_BUDGET
    tables: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("tables", "ratios", "failures"):
            if not getattr(self, name):
                setattr(self, name, [dict() for _ in range(self.blocks)])

    def value(self, block: int, level: int, n: int) -> int | None:
        return self.tables[block].get((level, n))

    def failure(self, block: int, level: int, n: int) -> str | None:
        return self.failures[block].get((level, n))

    def known(self, block: int, level: int, n: int) -> bool:
        key = (level, n)
        return key in self.tables[block] or key in self.failures[block]

    def extend(self, model: SequenceModel, block: int, level: int, n: int) -> int | None:
        """Compute and store phi(level, n) on ``block`` if not yet known."""
        if not self.known(block, level, n):
            j, ratio, status = _correlation_witness(model, block, level, n, self.j_budget)
            if j is None:
                self.failures[block][(level, n)] = status
            else:
                self.tables[block][(level, n)] = j
                self.ratios[block][(level, n)] = ratio
        return self.value(block, level, n)

    def to_dict(self) -> dict:
        out = []
        for b in range(self.blocks):
            entries = [{"l": lv, "n": n, "phi": j, "ratio": str(self.ratios[b][(lv, n)])}
                       for (lv, n), j in sorted(self.tables[b].items())]
            fails = [{"l": lv, "n": n, "status": s} for (lv, n), s in sorted(self.failures[b].items())]
            out.append({"block": b, "entries": entries, "failures": fails})
        return {"kind": "correlation", "j_budget": self.j_budget, "blocks": out}


def divergence_rate(model: SequenceModel, N_max: int, n_budget: int = DEFAULT_BUDGET) -> RateFunction:
    if N_max < 1:
        raise InvalidInput("N_max must be >= 1")
    nulls = null_blocks(model)
    tables, status, notes = [], [], []
    for b in range(block_count(model)):
        if b in nulls:
            tables.append({}), status.append(INAPPLICABLE), notes.append("null block")
            continue
        cls = divergence_class(model, b)
        if cls is False:
            tables.append({}), status.append(INAPPLICABLE)
            notes.append("marginal series converges; no divergence rate exists")
            continue
        table: dict[int, int] = {}
        total = Fraction(0)
        level = 1
        n = 0
        for p in iter_marginals(model, b):
            n += 1
            if n > n_budget:
                break
            total += p
            while level <= N_max and total >= level:
                table[level] = n
                level += 1
            if level > N_max:
                break
        tables.append(table)
        if level > N_max:
            status.append(OK), notes.append("least index by exact partial sums")
        elif cls is None:
            status.append(INAPPLICABLE)
            notes.append(f"finite family of {n} events sums to {total} < {level}")
        else:
            status.append(BUDGET_EXHAUSTED)
            notes.append(f"scan cap {n_budget} reached before level {level}")
    return RateFunction("psi", tuple(tables), tuple(status), tuple(notes))


def _least_index(pred, start: int) -> int:
    """Least n >= start with pred(n), for pred monotone false->true."""
    if pred(start):
        return start
    lo, step = start, 1
    while not pred(lo + step):
        lo += step
        step *= 2
    hi = lo + step
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def convergence_rate(model: SequenceModel, l_max: int) -> RateFunction:
    if l_max < 0:
        raise InvalidInput("l_max must be >= 0")
    nulls = null_blocks(model)
    tables, status, notes = [], [], []
    for b in range(block_count(model)):
        if b in nulls:
            tables.append({}), status.append(INAPPLICABLE), notes.append("null block")
            continue
        if tail_bound(model, b, 1) is None:
            tables.append({}), status.append(INAPPLICABLE)
            why = ("explicit families carry no tail beyond their last event"
                   if isinstance(model, ExplicitModel) else "no finite tail bound (series diverges)")
            notes.append(why)
            continue
        table = {}
        start = 1
        for level in range(l_max + 1):
            bound = power_of_two(level)
            start = _least_index(lambda n: tail_bound(model, b, n) <= bound, start)
            table[level] = start
        tables.append(table)
        status.append(OK)
        comp = model.components[b]
        how = comp.p.describe() if isinstance(comp, BernoulliComponent) else "markov geometric tail"
        notes.append(f"tail bound from {how}")
    return RateFunction("phi", tuple(tables), tuple(status), tuple(notes))


def _certified_unreachable(model, block, j, s1, s2, target) -> bool:
    """For summable Bernoulli blocks: can no j' >= j have ratio <= target?

    ratio(j') - 1 = (s1 - q)/s1**2 with q = sum p_i**2; the numerator
    sum p_i (1 - p_i) only grows and s1 stays below s1 + tail, so the ratio
    at every later j' is at least 1 + (s1 - q)/(s1 + tail)**2.
    """
    comp = getattr(model, "components", None)
    if comp is None or not isinstance(comp[block], BernoulliComponent):
        return False
    tail = tail_bound(model, block, j + 1)
    if tail is None or s1 == 0:
        return False
    q = s1 * s1 + s1 - s2  # s2 = s1 + s1**2 - q for independent events
    floor_ratio = 1 + (s1 - q) / (s1 + tail) ** 2
    return floor_ratio > target


def _correlation_witness(model, block, level, n, j_budget):
    target = 1 + power_of_two(level)
    for j, s1, s2 in iter_moments(model, block):
        if j > j_budget:
            return None, None, BUDGET_EXHAUSTED
        if j < n or s1 == 0:
            continue
        ratio = s2 / (s1 * s1)
        if ratio <= target:
            return j, ratio, OK
        if (j & (j - 1)) == 0 and _certified_unreachable(model, block, j, s1, s2, target):
            return None, None, INAPPLICABLE
    return None, None, BUDGET_EXHAUSTED


def correlation_rate(model: SequenceModel, level: int, n: int,
                     j_budget: int = DEFAULT_BUDGET) -> CorrelationRate:
    if level < 0 or n < 1:
        raise InvalidInput("need l >= 0 and n >= 1")
    rate = CorrelationRate(block_count(model), j_budget)
    nulls = null_blocks(model)
    for b in range(block_count(model)):
        if b in nulls:
            rate.failures[b][(level, n)] = INAPPLICABLE
            continue
        rate.extend(model, b, level, n)
    return rate
