"""Finite probability spaces with exact rational weights.

A sub-sigma-algebra of a finite space is always generated by a partition of
the outcomes, so conditioning here means conditioning on a :class:`Partition`.
Conditional probabilities come back as :class:`BlockFunction` values, one
rational per block. Blocks of probability zero are listed in ``null_blocks``
and carry the value 0; "almost surely" checks skip them.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from bcq.errors import InvalidInput, ResourceLimit

DEFAULT_SPACE_CAP = 1 << 24
MAX_INDEPENDENCE_EVENTS = 12


def space_cap() -> int:
    """Outcome-count limit; ``BCQ_SPACE_CAP`` overrides the default 2**24."""
    raw = os.environ.get("BCQ_SPACE_CAP")
    if raw is None:
        return DEFAULT_SPACE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise InvalidInput(f"BCQ_SPACE_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise InvalidInput("BCQ_SPACE_CAP must be positive")
    return cap


def as_fraction(x) -> Fraction:
    """Exact conversion; floats are refused so no binary rounding sneaks in."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InvalidInput(f"not a rational: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise InvalidInput(f"malformed rational {x!r}") from None
    raise InvalidInput(f"expected an exact rational, got {type(x).__name__} {x!r}")


class FiniteProbabilitySpace:
    """Outcomes ``0..size-1`` with exact weights summing to one.

    Weights are stored as integer numerators over a single common
    denominator, which keeps event sums cheap on spaces with thousands of
    outcomes.
    """

    __slots__ = ("_numerators", "_denominator", "_labels")

    def __init__(self, weights: Iterable, labels: Sequence[str] | None = None):
        fracs = [as_fraction(w) for w in weights]
        if not fracs:
            raise InvalidInput("a probability space needs at least one outcome")
        den = 1
        for w in fracs:
            den = math.lcm(den, w.denominator)
        self._init(tuple(w.numerator * (den // w.denominator) for w in fracs), den, labels)

    @classmethod
    def from_integers(cls, numerators: Sequence[int], denominator: int,
                      labels: Sequence[str] | None = None) -> "FiniteProbabilitySpace":
        self = cls.__new__(cls)
        self._init(tuple(numerators), denominator, labels)
        return self

    def _init(self, nums, den, labels):
        if len(nums) > space_cap():
            raise ResourceLimit(f"{len(nums)} outcomes exceed the space cap {space_cap()}")
        if den <= 0:
            raise InvalidInput("denominator must be positive")
        for i, x in enumerate(nums):
            if x < 0:
                raise InvalidInput(f"negative weight at outcome {i}")
        total = sum(nums)
        if total != den:
            raise InvalidInput(f"weights sum {Fraction(total, den)} ≠ 1")
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != len(nums):
                raise InvalidInput("one label per outcome is required")
        self._numerators = nums
        self._denominator = den
        self._labels = labels

    @property
    def size(self) -> int:
        return len(self._numerators)

    def __len__(self) -> int:
        return len(self._numerators)

    @property
    def numerators(self) -> tuple[int, ...]:
        return self._numerators

    @property
    def denominator(self) -> int:
        return self._denominator

    @property
    def labels(self) -> tuple[str, ...] | None:
        return self._labels

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(x, self._denominator) for x in self._numerators)

    def weight(self, outcome: int) -> Fraction:
        return Fraction(self._numerators[outcome], self._denominator)

    def mass(self, members: Iterable[int]) -> int:
        """Numerator of the probability of ``members`` over ``denominator``."""
        nums = self._numerators
        return sum(nums[w] for w in members)

    def full_event(self) -> "Event":
        return Event(frozenset(range(self.size)))

    def __eq__(self, other):
        if not isinstance(other, FiniteProbabilitySpace):
            return NotImplemented
        return (self._numerators == other._numerators
                and self._denominator == other._denominator
                and self._labels == other._labels)

    def __hash__(self):
        return hash((self._numerators, self._denominator))

    def __repr__(self):
        return f"FiniteProbabilitySpace(size={self.size})"


@dataclass(frozen=True)
class Event:
    members: frozenset

    def __post_init__(self):
        if not isinstance(self.members, frozenset):
            object.__setattr__(self, "members", frozenset(self.members))

    @classmethod
    def of(cls, *outcomes: int) -> "Event":
        return cls(frozenset(outcomes))

    def __len__(self):
        return len(self.members)

    def __contains__(self, outcome):
        return outcome in self.members

    def __and__(self, other: "Event") -> "Event":
        return Event(self.members & other.members)

    def __or__(self, other: "Event") -> "Event":
        return Event(self.members | other.members)

    def __sub__(self, other: "Event") -> "Event":
        return Event(self.members - other.members)

    def __le__(self, other: "Event") -> bool:
        return self.members <= other.members


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks of outcome ids; generates a sub-sigma-algebra."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(frozenset(b) for b in self.blocks)
        if not blocks:
            raise InvalidInput("a partition needs at least one block")
        seen: set[int] = set()
        for i, b in enumerate(blocks):
            if not b:
                raise InvalidInput(f"block {i} is empty")
            clash = seen & b
            if clash:
                raise InvalidInput(f"blocks overlap at outcome {min(clash)}")
            seen |= b
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def trivial(cls, size: int) -> "Partition":
        return cls((frozenset(range(size)),))

    @classmethod
    def discrete(cls, size: int) -> "Partition":
        return cls(tuple(frozenset((i,)) for i in range(size)))

    def __len__(self):
        return len(self.blocks)

    @cached_property
    def block_of(self) -> dict[int, int]:
        return {w: i for i, b in enumerate(self.blocks) for w in b}

    def masses(self, space: FiniteProbabilitySpace) -> list[int]:
        return [space.mass(b) for b in self.blocks]


@dataclass(frozen=True)
class BlockFunction:
    """An F-measurable random variable: one exact value per partition block."""

    values: tuple
    null_blocks: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(Fraction(v) for v in self.values))
        object.__setattr__(self, "null_blocks", frozenset(self.null_blocks))
        for b in self.null_blocks:
            if not 0 <= b < len(self.values):
                raise InvalidInput(f"null block {b} out of range")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, block: int) -> Fraction:
        return self.values[block]

    def live_blocks(self) -> list[int]:
        return [b for b in range(len(self.values)) if b not in self.null_blocks]

    def map(self, fn) -> "BlockFunction":
        return BlockFunction(tuple(fn(v) for v in self.values), self.null_blocks)

    def combine(self, other: "BlockFunction", fn) -> "BlockFunction":
        if len(other) != len(self):
            raise InvalidInput("block functions over different partitions")
        nulls = self.null_blocks | other.null_blocks
        return BlockFunction(
            tuple(Fraction(0) if b in nulls else fn(x, y)
                  for b, (x, y) in enumerate(zip(self.values, other.values))),
            nulls)

    def is_probability(self) -> bool:
        return all(0 <= self.values[b] <= 1 for b in self.live_blocks())


def _check_event(space: FiniteProbabilitySpace, e: Event) -> None:
    if not isinstance(e, Event):
        raise InvalidInput(f"expected an Event, got {type(e).__name__}")
    for w in e.members:
        if not (isinstance(w, int) and 0 <= w < space.size):
            raise InvalidInput(f"event references outcome {w!r} outside 0..{space.size - 1}")


def _check_partition(space: FiniteProbabilitySpace, f: Partition) -> None:
    covered = sum(len(b) for b in f.blocks)
    if covered != space.size or any(not 0 <= w < space.size for w in f.block_of):
        raise InvalidInput("partition blocks must cover exactly the outcomes of the space")


def probability(space: FiniteProbabilitySpace, e: Event) -> Fraction:
    _check_event(space, e)
    return Fraction(space.mass(e.members), space.denominator)


def _block_masses(space, f, members) -> list[int]:
    block_of = f.block_of
    nums = space.numerators
    acc = [0] * len(f.blocks)
    for w in members:
        acc[block_of[w]] += nums[w]
    return acc


def conditional_probability(space: FiniteProbabilitySpace, f: Partition, e: Event) -> BlockFunction:
    _check_event(space, e)
    _check_partition(space, f)
    totals = f.masses(space)
    hits = _block_masses(space, f, e.members)
    nulls = frozenset(b for b, t in enumerate(totals) if t == 0)
    values = tuple(Fraction(0) if t == 0 else Fraction(h, t) for h, t in zip(hits, totals))
    return BlockFunction(values, nulls)


def tower_expectation(space: FiniteProbabilitySpace, f: Partition, e: Event) -> Fraction:
    """E[P(e|F)] computed blockwise; equals ``probability(space, e)``."""
    cond = conditional_probability(space, f, e)
    masses = f.masses(space)
    return sum((Fraction(m, space.denominator) * v for m, v in zip(masses, cond.values)),
               Fraction(0))


def complement(space: FiniteProbabilitySpace, e: Event) -> Event:
    _check_event(space, e)
    return Event(frozenset(range(space.size)) - e.members)


def union(*events: Event) -> Event:
    out: frozenset = frozenset()
    for e in events:
        out |= e.members
    return Event(out)


def intersection(space: FiniteProbabilitySpace, *events: Event) -> Event:
    """Empty intersection is the whole space."""
    out = frozenset(range(space.size))
    for e in events:
        out &= e.members
    return Event(out)


_OPERATORS = {"not", "and", "or", "diff"}


def event_algebra(space: FiniteProbabilitySpace, expr, events: Sequence[Event] | None = None) -> Event:
    """Evaluate a nested boolean expression over events.

    ``expr`` is an :class:`Event`, an ``int`` indexing into ``events``, or a
    tuple ``(op, *args)`` with ``op`` one of ``not``, ``and``, ``or``,
    ``diff``. For example ``("and", ("not", 0), 1)`` is A0^c ∩ A1.
    """
    if isinstance(expr, Event):
        _check_event(space, expr)
        return expr
    if isinstance(expr, int) and not isinstance(expr, bool):
        if events is None or not 0 <= expr < len(events):
            raise InvalidInput(f"expression references unknown event {expr}")
        _check_event(space, events[expr])
        return events[expr]
    if not isinstance(expr, tuple) or not expr or expr[0] not in _OPERATORS:
        raise InvalidInput(f"malformed event expression {expr!r}")
    op, args = expr[0], [event_algebra(space, a, events) for a in expr[1:]]
    if op == "not":
        if len(args) != 1:
            raise InvalidInput("'not' takes exactly one operand")
        return complement(space, args[0])
    if op == "and":
        return intersection(space, *args)
    if op == "or":
        return union(*args)
    if len(args) != 2:
        raise InvalidInput("'diff' takes exactly two operands")
    return args[0] - args[1]


def is_conditionally_independent(space: FiniteProbabilitySpace, f: Partition,
                                 events: Sequence[Event]) -> bool:
    """Mutual conditional independence given F, checked on every sub-family.

    For each subfamily S with |S| >= 2 and each non-null block B this tests
    P(∩S ∩ B) * P(B)^(|S|-1) == Π P(A ∩ B), the cross-multiplied product rule.
    """
    events = list(events)
    if len(events) < 2:
        raise InvalidInput("need at least two events")
    if len(events) > MAX_INDEPENDENCE_EVENTS:
        raise InvalidInput(f"at most {MAX_INDEPENDENCE_EVENTS} events are supported")
    for e in events:
        _check_event(space, e)
    _check_partition(space, f)
    totals = f.masses(space)
    live = [b for b, t in enumerate(totals) if t > 0]
    single = [_block_masses(space, f, e.members) for e in events]
    for size in range(2, len(events) + 1):
        for idx in itertools.combinations(range(len(events)), size):
            inter = events[idx[0]].members
            for i in idx[1:]:
                inter = inter & events[i].members
            joint = _block_masses(space, f, inter)
            for b in live:
                prod = 1
                for i in idx:
                    prod *= single[i][b]
                if joint[b] * totals[b] ** (size - 1) != prod:
                    return False
    return True
