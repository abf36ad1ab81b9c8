"""Event-sequence models with a conditioning structure.

Three variants are supported:

* :class:`ExplicitModel` - a finite list of events on an explicit space with
  an explicit partition.
* :class:`MixtureBernoulli` - a latent component index; given the component
  the events are independent with marginals from a :class:`ProbFormula`.
* :class:`MixtureMarkov` - given the component the indicators form a
  time-homogeneous two-state Markov chain.

For the mixtures the conditioning partition is the one generated by the
component index, so block ``j`` is component ``j``. Queries over contiguous
index ranges have closed forms; :func:`materialize` builds the finite
truncation for enumeration-based cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, Union

from bcq.errors import InvalidInput, ResourceLimit
from bcq.measure import (
    BlockFunction,
    Event,
    FiniteProbabilitySpace,
    Partition,
    as_fraction,
    conditional_probability,
    event_algebra,
    space_cap,
    _check_event,
    _check_partition,
)

ONE = Fraction(1)
ZERO = Fraction(0)


def _unit(x, name: str) -> Fraction:
    x = as_fraction(x)
    if not 0 <= x <= 1:
        raise InvalidInput(f"{name} = {x} is not in [0, 1]")
    return x


@dataclass(frozen=True)
class ProbFormula:
    """Marginal sequence p_n, n >= 1.

    constant: p_n = c; geometric: p_n = c * r**(n-1); power: p_n = c * n**-s
    with integer s >= 0.
    """

    family: str
    c: Fraction
    r: Fraction | None = None
    s: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "c", _unit(self.c, "c"))
        if self.family == "constant":
            if self.r is not None or self.s is not None:
                raise InvalidInput("constant family takes only c")
        elif self.family == "geometric":
            if self.r is None or self.s is not None:
                raise InvalidInput("geometric family takes c and r")
            object.__setattr__(self, "r", _unit(self.r, "r"))
        elif self.family == "power":
            if self.s is None or self.r is not None:
                raise InvalidInput("power family takes c and s")
            s = as_fraction(self.s)
            if s.denominator != 1 or s < 0:
                raise InvalidInput(f"power exponent must be a nonnegative integer, got {s}")
            object.__setattr__(self, "s", int(s))
        else:
            raise InvalidInput(f"unknown family {self.family!r}")

    @classmethod
    def constant(cls, c) -> "ProbFormula":
        return cls("constant", as_fraction(c))

    @classmethod
    def geometric(cls, c, r) -> "ProbFormula":
        return cls("geometric", as_fraction(c), r=as_fraction(r))

    @classmethod
    def power(cls, c, s) -> "ProbFormula":
        return cls("power", as_fraction(c), s=s)

    def __call__(self, n: int) -> Fraction:
        if n < 1:
            raise InvalidInput(f"index must be >= 1, got {n}")
        if self.family == "constant":
            return self.c
        if self.family == "geometric":
            return self.c * self.r ** (n - 1)
        return self.c / Fraction(n) ** self.s

    def tends_to_zero(self) -> bool:
        if self.c == 0:
            return True
        if self.family == "geometric":
            return self.r < 1
        if self.family == "power":
            return self.s >= 1
        return False

    def is_summable(self) -> bool:
        if self.c == 0:
            return True
        if self.family == "geometric":
            return self.r < 1
        if self.family == "power":
            return self.s >= 2
        return False

    def tail_bound(self, n: int) -> Fraction | None:
        """Rational upper bound on sum_{i>=n} p_i, or None when the series diverges.

        Exact for the geometric family; the power family uses
        n**-s + n**(1-s)/(s-1), the integral comparison bound.
        """
        if n < 1:
            raise InvalidInput("tail start must be >= 1")
        if self.c == 0:
            return ZERO
        if not self.is_summable():
            return None
        if self.family == "geometric":
            return self.c * self.r ** (n - 1) / (1 - self.r)
        s = self.s
        return self.c * (Fraction(1, n ** s) + Fraction(1, (s - 1) * n ** (s - 1)))

    def describe(self) -> str:
        if self.family == "constant":
            return f"constant(c={self.c})"
        if self.family == "geometric":
            return f"geometric(c={self.c}, r={self.r})"
        return f"power(c={self.c}, s={self.s})"


@dataclass(frozen=True)
class BernoulliComponent:
    weight: Fraction
    p: ProbFormula

    def marginal(self, n: int) -> Fraction:
        return self.p(n)

    def no_run(self, a: int, b: int) -> Fraction:
        """P(no event among indices a..b) for this component."""
        if b < a:
            return ONE
        if self.p.family == "constant" or (self.p.family == "geometric" and self.p.r == 1):
            return (1 - self.p.c) ** (b - a + 1)
        out = ONE
        for i in range(a, b + 1):
            out *= 1 - self.p(i)
            if out == 0:
                break
        return out

    def word(self, start: int, bits: Sequence[int]) -> Fraction:
        out = ONE
        for t, bit in enumerate(bits):
            p = self.p(start + t)
            out *= p if bit else 1 - p
        return out

    def joint(self, i: int, k: int) -> Fraction:
        if i == k:
            return self.p(i)
        return self.p(i) * self.p(k)


@dataclass(frozen=True)
class MarkovComponent:
    """Two-state chain: P(I_1=1)=pi1, P(1 | prev 0)=q0, P(1 | prev 1)=q1."""

    weight: Fraction
    pi1: Fraction
    q0: Fraction
    q1: Fraction

    @property
    def contraction(self) -> Fraction:
        return self.q1 - self.q0

    @property
    def stationary(self) -> Fraction | None:
        lam = self.contraction
        if lam == 1:
            return None
        return self.q0 / (1 - lam)

    def marginal(self, n: int) -> Fraction:
        if n < 1:
            raise InvalidInput(f"index must be >= 1, got {n}")
        lam = self.contraction
        if lam == 1:
            return self.pi1
        s = self.q0 / (1 - lam)
        return s + (self.pi1 - s) * lam ** (n - 1)

    def stay_one(self, t: int) -> Fraction:
        """P(I_{i+t} = 1 | I_i = 1)."""
        lam = self.contraction
        if lam == 1:
            return ONE
        s = self.q0 / (1 - lam)
        return s + (1 - s) * lam ** t

    def step(self, prev: int, nxt: int) -> Fraction:
        q = self.q1 if prev else self.q0
        return q if nxt else 1 - q

    def no_run(self, a: int, b: int) -> Fraction:
        if b < a:
            return ONE
        return (1 - self.marginal(a)) * (1 - self.q0) ** (b - a)

    def word(self, start: int, bits: Sequence[int]) -> Fraction:
        if not bits:
            return ONE
        pi = self.marginal(start)
        out = pi if bits[0] else 1 - pi
        for prev, nxt in zip(bits, bits[1:]):
            out *= self.step(prev, nxt)
        return out

    def joint(self, i: int, k: int) -> Fraction:
        if i == k:
            return self.marginal(i)
        i, k = min(i, k), max(i, k)
        return self.marginal(i) * self.stay_one(k - i)


def _check_mixture(components) -> tuple:
    components = tuple(components)
    if not components:
        raise InvalidInput("a mixture needs at least one component")
    total = ZERO
    for j, comp in enumerate(components):
        if comp.weight <= 0:
            raise InvalidInput(f"component {j} weight {comp.weight} must be positive")
        total += comp.weight
    if total != 1:
        raise InvalidInput(f"weights sum {total} ≠ 1")
    return components


@dataclass(frozen=True)
class MixtureBernoulli:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", _check_mixture(self.components))

    @classmethod
    def of(cls, *pairs) -> "MixtureBernoulli":
        """``MixtureBernoulli.of((weight, formula), ...)``."""
        return cls(tuple(BernoulliComponent(as_fraction(w), p) for w, p in pairs))


@dataclass(frozen=True)
class MixtureMarkov:
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", _check_mixture(self.components))

    @classmethod
    def of(cls, *rows) -> "MixtureMarkov":
        """``MixtureMarkov.of((weight, pi1, q0, q1), ...)``."""
        return cls(tuple(
            MarkovComponent(as_fraction(w), _unit(pi1, "pi1"), _unit(q0, "q0"), _unit(q1, "q1"))
            for w, pi1, q0, q1 in rows))


@dataclass(frozen=True)
class ExplicitModel:
    space: FiniteProbabilitySpace
    partition: Partition
    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        _check_partition(self.space, self.partition)
        for e in events:
            _check_event(self.space, e)
        object.__setattr__(self, "events", events)

    def check_index(self, n: int) -> None:
        if not 1 <= n <= len(self.events):
            raise InvalidInput(f"index {n} outside the explicit family 1..{len(self.events)}")

    def cond(self, expr) -> BlockFunction:
        return conditional_probability(self.space, self.partition,
                                       event_algebra(self.space, expr, self.events))


SequenceModel = Union[ExplicitModel, MixtureBernoulli, MixtureMarkov]


def is_mixture(model) -> bool:
    return isinstance(model, (MixtureBernoulli, MixtureMarkov))


def block_count(model: SequenceModel) -> int:
    if isinstance(model, ExplicitModel):
        return len(model.partition)
    return len(model.components)


def block_weights(model: SequenceModel) -> tuple[Fraction, ...]:
    if isinstance(model, ExplicitModel):
        den = model.space.denominator
        return tuple(Fraction(m, den) for m in model.partition.masses(model.space))
    return tuple(c.weight for c in model.components)


def null_blocks(model: SequenceModel) -> frozenset:
    return frozenset(b for b, w in enumerate(block_weights(model)) if w == 0)


def family_length(model: SequenceModel) -> int | None:
    """Number of events for an explicit family; None for infinite sequences."""
    if isinstance(model, ExplicitModel):
        return len(model.events)
    return None


def _mixture_bf(model, fn) -> BlockFunction:
    return BlockFunction(tuple(fn(c) for c in model.components))


def _idx(expr_n: int) -> int:
    return expr_n - 1


def _run_expr(a: int, b: int, last_present: bool):
    """Expression A_a^c ... A_{b-1}^c A_b (or all complemented) on 0-based event ids."""
    parts = [("not", _idx(i)) for i in range(a, b)]
    parts.append(_idx(b) if last_present else ("not", _idx(b)))
    return ("and", *parts)


def cond_marginal(model: SequenceModel, n: int) -> BlockFunction:
    """P(A_n | F) per block."""
    if n < 1:
        raise InvalidInput(f"index must be >= 1, got {n}")
    if isinstance(model, ExplicitModel):
        model.check_index(n)
        return model.cond(_idx(n))
    return _mixture_bf(model, lambda c: c.marginal(n))


def pattern_probability(model: SequenceModel, n: int, m: int) -> BlockFunction:
    """P(A_n^c A_{n+1}^c ... A_{n+m-1}^c A_{n+m} | F)."""
    if n < 1 or m < 0:
        raise InvalidInput(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    if isinstance(model, ExplicitModel):
        model.check_index(n + m)
        return model.cond(_run_expr(n, n + m, True))
    bits = [0] * m + [1]
    return _mixture_bf(model, lambda c: c.word(n, bits))


def run_absent(model: SequenceModel, a: int, b: int) -> BlockFunction:
    """P(A_a^c ∩ ... ∩ A_b^c | F); the empty range gives 1."""
    if a < 1:
        raise InvalidInput(f"index must be >= 1, got {a}")
    if isinstance(model, ExplicitModel):
        if b < a:
            return model.cond(("and",))
        model.check_index(b)
        return model.cond(("and", *[("not", _idx(i)) for i in range(a, b + 1)]))
    return _mixture_bf(model, lambda c: c.no_run(a, b))


def union_probability(model: SequenceModel, start: int, stop: int) -> BlockFunction:
    """P(A_start ∪ ... ∪ A_stop | F)."""
    if not 1 <= start <= stop:
        raise InvalidInput(f"need 1 <= from <= to, got {start}..{stop}")
    return run_absent(model, start, stop).map(lambda v: 1 - v)


def word_probability(model: SequenceModel, start: int, bits: Sequence[int]) -> BlockFunction:
    """P(I_start = bits[0], I_{start+1} = bits[1], ... | F)."""
    if start < 1:
        raise InvalidInput(f"index must be >= 1, got {start}")
    bits = [1 if b else 0 for b in bits]
    if isinstance(model, ExplicitModel):
        if not bits:
            return model.cond(("and",))
        model.check_index(start + len(bits) - 1)
        expr = ("and", *[_idx(start + t) if bit else ("not", _idx(start + t))
                         for t, bit in enumerate(bits)])
        return model.cond(expr)
    return _mixture_bf(model, lambda c: c.word(start, bits))


def pairwise_joint(model: SequenceModel, i: int, k: int) -> BlockFunction:
    """P(A_i A_k | F); the diagonal i = k is the marginal."""
    if i < 1 or k < 1:
        raise InvalidInput(f"indices must be >= 1, got {i}, {k}")
    if isinstance(model, ExplicitModel):
        model.check_index(max(i, k))
        if i == k:
            return model.cond(_idx(i))
        return model.cond(("and", _idx(i), _idx(k)))
    return _mixture_bf(model, lambda c: c.joint(i, k))


def iter_marginals(model: SequenceModel, block: int) -> Iterator[Fraction]:
    """p_1, p_2, ... on one block (finite for explicit families)."""
    if isinstance(model, ExplicitModel):
        for n in range(1, len(model.events) + 1):
            yield cond_marginal(model, n)[block]
        return
    comp = model.components[block]
    if isinstance(comp, BernoulliComponent):
        n = 1
        while True:
            yield comp.marginal(n)
            n += 1
    pi = comp.pi1
    while True:
        yield pi
        pi = pi * comp.q1 + (1 - pi) * comp.q0


def iter_moments(model: SequenceModel, block: int) -> Iterator[tuple[int, Fraction, Fraction]]:
    """Yield (j, sum_{k<=j} P(A_k|F), sum_{i,k<=j} P(A_i A_k|F)) on one block.

    Incremental: O(1) per step for the mixtures. The Markov off-diagonal sum
    sum_{i<j} P(A_i A_j) is carried as a two-state mass vector pushed through
    the transition matrix.
    """
    s1 = ZERO
    s2 = ZERO
    if isinstance(model, ExplicitModel):
        margs: list[Fraction] = []
        for j in range(1, len(model.events) + 1):
            p = cond_marginal(model, j)[block]
            cross = sum((pairwise_joint(model, i, j)[block] for i in range(1, j)), ZERO)
            margs.append(p)
            s1 += p
            s2 += p + 2 * cross
            yield j, s1, s2
        return
    comp = model.components[block]
    j = 0
    if isinstance(comp, BernoulliComponent):
        while True:
            j += 1
            p = comp.marginal(j)
            s2 += p + 2 * p * s1
            s1 += p
            yield j, s1, s2
    w0 = w1 = ZERO
    pi = comp.pi1
    while True:
        j += 1
        if j > 1:
            w1 += prev_pi
            w0, w1 = (w0 * (1 - comp.q0) + w1 * (1 - comp.q1),
                      w0 * comp.q0 + w1 * comp.q1)
        s1 += pi
        s2 += pi + 2 * w1
        yield j, s1, s2
        prev_pi = pi
        pi = pi * comp.q1 + (1 - pi) * comp.q0


def iter_union_prefix(model: SequenceModel, block: int) -> Iterator[tuple[int, Fraction]]:
    """Yield (n, P(A_1 ∪ ... ∪ A_n | F)) on one block."""
    if isinstance(model, ExplicitModel):
        for n in range(1, len(model.events) + 1):
            yield n, union_probability(model, 1, n)[block]
        return
    comp = model.components[block]
    n = 0
    if isinstance(comp, BernoulliComponent):
        absent = ONE
        while True:
            n += 1
            absent *= 1 - comp.marginal(n)
            yield n, 1 - absent
    while True:
        n += 1
        yield n, 1 - comp.no_run(1, n)


def divergence_class(model: SequenceModel, block: int) -> bool | None:
    """True if sum_n P(A_n|F) diverges on the block, False if it converges,
    None if the model gives no analytic answer (explicit families)."""
    if isinstance(model, ExplicitModel):
        return None
    comp = model.components[block]
    if isinstance(comp, BernoulliComponent):
        return not comp.p.is_summable()
    if comp.q0 > 0:
        return True
    return comp.q1 == 1 and comp.pi1 > 0


def marginals_vanish(model: SequenceModel, block: int) -> bool | None:
    """Whether P(A_n|F) -> 0 on the block, decided from the family parameters."""
    if isinstance(model, ExplicitModel):
        return None
    comp = model.components[block]
    if isinstance(comp, BernoulliComponent):
        return comp.p.tends_to_zero()
    return comp.q0 == 0 and (comp.q1 < 1 or comp.pi1 == 0)


def tail_bound(model: SequenceModel, block: int, n: int) -> Fraction | None:
    """Rational upper bound on sum_{i>=n} P(A_i|F), or None if unavailable."""
    if isinstance(model, ExplicitModel):
        return None
    comp = model.components[block]
    if isinstance(comp, BernoulliComponent):
        return comp.p.tail_bound(n)
    if comp.q0 > 0:
        return None
    pi = comp.marginal(n)
    if pi == 0:
        return ZERO
    if comp.q1 == 1:
        return None
    return pi / (1 - comp.q1)


def materialize(model: SequenceModel, horizon: int):
    """Finite truncation: (space, partition, [A_1..A_H]).

    Outcome ``j * 2**H + x`` is component ``j`` with path bits ``x`` written
    most-significant-first, so bit ``n`` of the path is ``(x >> (H - n)) & 1``.
    """
    if isinstance(model, ExplicitModel):
        return model.space, model.partition, list(model.events)
    if horizon < 1:
        raise InvalidInput(f"horizon must be >= 1, got {horizon}")
    k = len(model.components)
    size = k << horizon
    if size > space_cap():
        raise ResourceLimit(f"{k} components x 2^{horizon} paths exceed the space cap {space_cap()}")
    per_comp = [_path_numerators(c, horizon) for c in model.components]
    den = 1
    for comp, (_, d) in zip(model.components, per_comp):
        den = math.lcm(den, comp.weight.denominator * d)
    nums: list[int] = []
    for comp, (vals, d) in zip(model.components, per_comp):
        scale = comp.weight.numerator * (den // (comp.weight.denominator * d))
        nums.extend(v * scale for v in vals)
    space = FiniteProbabilitySpace.from_integers(nums, den)
    width = 1 << horizon
    partition = Partition(tuple(frozenset(range(j * width, (j + 1) * width)) for j in range(k)))
    events = []
    for n in range(1, horizon + 1):
        shift = horizon - n
        events.append(Event(frozenset(
            j * width + x for j in range(k) for x in range(width) if (x >> shift) & 1)))
    return space, partition, events


def _path_numerators(comp, horizon: int) -> tuple[list[int], int]:
    if isinstance(comp, BernoulliComponent):
        vals = [1]
        den = 1
        for n in range(1, horizon + 1):
            p = comp.marginal(n)
            a, b = p.numerator, p.denominator
            vals = [v * w for v in vals for w in (b - a, a)]
            den *= b
        return vals, den
    d = math.lcm(comp.pi1.denominator, comp.q0.denominator, comp.q1.denominator)
    p1, t0, t1 = int(comp.pi1 * d), int(comp.q0 * d), int(comp.q1 * d)
    vals = [d - p1, p1]
    for _ in range(horizon - 1):
        nxt = []
        for x, v in enumerate(vals):
            t = t1 if x & 1 else t0
            nxt.append(v * (d - t))
            nxt.append(v * t)
        vals = nxt
    return vals, d ** horizon


def explicit_from_materialized(model: SequenceModel, horizon: int) -> ExplicitModel:
    space, partition, events = materialize(model, horizon)
    return ExplicitModel(space, partition, tuple(events))
