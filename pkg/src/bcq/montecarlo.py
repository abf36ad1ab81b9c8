"""Seeded simulation of mixture models, stratified by component.

Every trial draws from its own Philox stream keyed by a hash of
(seed, component, trial), so results do not depend on the order in which
trials run or on how they are split between workers. Bernoulli draws compare
a uniform integer below the denominator with the numerator, so each bit has
exactly its rational probability.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from bcq.errors import InvalidInput
from bcq.measure import BlockFunction
from bcq.models import (
    BernoulliComponent,
    MixtureBernoulli,
    MixtureMarkov,
    SequenceModel,
    is_mixture,
    pairwise_joint,
    pattern_probability,
    union_probability,
)

_INT64_SAFE = 1 << 62


def hoeffding_halfwidth(trials: int, delta: float) -> float:
    """Two-sided Hoeffding radius sqrt(ln(2/delta) / (2T))."""
    if trials < 1 or not 0 < delta < 1:
        raise InvalidInput("need trials >= 1 and 0 < delta < 1")
    return math.sqrt(math.log(2 / delta) / (2 * trials))


def stream(seed: int, component: int, trial: int) -> np.random.Generator:
    digest = hashlib.blake2b(
        f"{seed}:{component}:{trial}".encode(), digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))


def _uniform_below(rng: np.random.Generator, bound: int) -> int:
    if bound < _INT64_SAFE:
        return int(rng.integers(bound))
    nbytes = (bound.bit_length() + 7) // 8
    excess = 8 * nbytes - bound.bit_length()
    while True:
        x = int.from_bytes(rng.bytes(nbytes), "little") >> excess
        if x < bound:
            return x


def _bernoulli(rng: np.random.Generator, p: Fraction) -> int:
    if p == 0:
        return 0
    if p == 1:
        return 1
    return int(_uniform_below(rng, p.denominator) < p.numerator)


def sample_path(model: SequenceModel, component: int, horizon: int,
                rng: np.random.Generator) -> list[int]:
    """Indicator path I_1..I_horizon for one component."""
    if not is_mixture(model):
        raise InvalidInput("simulation needs a mixture model; use enumeration for explicit ones")
    comp = model.components[component]
    if isinstance(comp, BernoulliComponent):
        return [_bernoulli(rng, comp.marginal(n)) for n in range(1, horizon + 1)]
    bit = _bernoulli(rng, comp.pi1)
    path = [bit]
    for _ in range(horizon - 1):
        bit = _bernoulli(rng, comp.q1 if bit else comp.q0)
        path.append(bit)
    return path


@dataclass(frozen=True)
class Query:
    """``union`` (a, b), ``pattern`` (n, m) or ``pairwise`` (i, k)."""

    kind: str
    a: int
    b: int

    def __post_init__(self):
        if self.kind not in ("union", "pattern", "pairwise"):
            raise InvalidInput(f"unknown query kind {self.kind!r}")
        if self.a < 1 or self.b < (self.a if self.kind == "union" else 0 if self.kind == "pattern" else 1):
            raise InvalidInput(f"bad query range {self.kind} {self.a} {self.b}")

    @property
    def last_index(self) -> int:
        if self.kind == "union":
            return self.b
        if self.kind == "pattern":
            return self.a + self.b
        return max(self.a, self.b)

    def hit(self, path: Sequence[int]) -> bool:
        if self.kind == "union":
            return any(path[self.a - 1:self.b])
        if self.kind == "pattern":
            n, m = self.a, self.b
            return not any(path[n - 1:n + m - 1]) and bool(path[n + m - 1])
        return bool(path[self.a - 1] and path[self.b - 1])

    def exact(self, model: SequenceModel) -> BlockFunction:
        if self.kind == "union":
            return union_probability(model, self.a, self.b)
        if self.kind == "pattern":
            return pattern_probability(model, self.a, self.b)
        return pairwise_joint(model, self.a, self.b)

    def describe(self) -> str:
        return f"{self.kind} {self.a} {self.b}"


@dataclass(frozen=True)
class SimulationPlan:
    model: SequenceModel
    horizon: int
    trials: int
    seed: int
    query: Query
    delta: float = 0.01

    def __post_init__(self):
        if not isinstance(self.model, (MixtureBernoulli, MixtureMarkov)):
            raise InvalidInput("simulation needs a mixture model; use enumeration for explicit ones")
        if self.trials < 1 or self.horizon < 1:
            raise InvalidInput("need trials >= 1 and horizon >= 1")
        if self.query.last_index > self.horizon:
            raise InvalidInput(f"query reaches index {self.query.last_index} beyond horizon {self.horizon}")
        if not 0 < self.delta < 1:
            raise InvalidInput("delta must be in (0, 1)")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidInput("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Estimate:
    counts: tuple
    trials: int
    delta: float
    epsilon: float
    label: str = ""

    @property
    def values(self) -> tuple:
        return tuple(Fraction(c, self.trials) for c in self.counts)

    def covers(self, exact: BlockFunction) -> list[bool]:
        """Per block: is the exact value within epsilon of the estimate?"""
        return [abs(float(v - x)) <= self.epsilon for v, x in zip(self.values, exact.values)]

    def to_dict(self) -> dict:
        return {"label": self.label, "trials": self.trials, "delta": self.delta,
                "epsilon": self.epsilon,
                "blocks": [{"block": b, "count": c, "estimate": str(Fraction(c, self.trials))}
                           for b, c in enumerate(self.counts)]}


def _simulate(plan: SimulationPlan, horizon: int, queries: Sequence[Query]) -> list[list[int]]:
    """counts[q][component] over all trials."""
    k = len(plan.model.components)
    counts = [[0] * k for _ in queries]
    for j in range(k):
        for t in range(plan.trials):
            path = sample_path(plan.model, j, horizon, stream(plan.seed, j, t))
            for qi, q in enumerate(queries):
                if q.hit(path):
                    counts[qi][j] += 1
    return counts


def estimate_query(plan: SimulationPlan) -> Estimate:
    counts = _simulate(plan, plan.query.last_index, [plan.query])[0]
    eps = hoeffding_halfwidth(plan.trials, plan.delta)
    return Estimate(tuple(counts), plan.trials, plan.delta, eps, plan.query.describe())


@dataclass(frozen=True)
class Sweep:
    horizons: tuple
    estimates: tuple
    trend: tuple   # per block: "to-one" or "plateau"


def horizon_sweep(plan: SimulationPlan, horizons: Sequence[int]) -> Sweep:
    """Estimates of P(A_n ∪ ... ∪ A_H | component) for each H, n = plan.query.a.

    All horizons reuse the same trial paths, so the sequence is monotone in H
    for every realisation.
    """
    horizons = tuple(horizons)
    if not horizons or list(horizons) != sorted(horizons):
        raise InvalidInput("horizons must be a nonempty ascending list")
    start = plan.query.a
    if horizons[0] < start:
        raise InvalidInput(f"horizons must be >= the union start {start}")
    queries = [Query("union", start, h) for h in horizons]
    counts = _simulate(plan, horizons[-1], queries)
    eps = hoeffding_halfwidth(plan.trials, plan.delta)
    estimates = tuple(Estimate(tuple(c), plan.trials, plan.delta, eps, q.describe())
                      for c, q in zip(counts, queries))
    last = estimates[-1].values
    trend = tuple("to-one" if float(v) >= 1 - eps else "plateau" for v in last)
    return Sweep(horizons, estimates, trend)
