import itertools
import random
from fractions import Fraction

import pytest

from bcq.measure import Event, FiniteProbabilitySpace, Partition
from bcq.models import ExplicitModel, MixtureBernoulli, MixtureMarkov, ProbFormula

F = Fraction


# -- brute-force oracles, written without touching bcq internals --------------

def path_weight_bernoulli(probs, bits):
    w = F(1)
    for p, b in zip(probs, bits):
        w *= p if b else 1 - p
    return w


def path_weight_markov(pi1, q0, q1, bits):
    w = pi1 if bits[0] else 1 - pi1
    for prev, nxt in zip(bits, bits[1:]):
        q = q1 if prev else q0
        w *= q if nxt else 1 - q
    return w


def enumerate_paths(weight_of, H, predicate):
    """P(predicate(bits)) summed over {0,1}^H; bits[0] is I_1."""
    total = F(0)
    for bits in itertools.product((0, 1), repeat=H):
        if predicate(bits):
            total += weight_of(bits)
    return total


def component_oracle(model, H, predicate):
    """Per-component probability of ``predicate`` by path enumeration."""
    out = []
    for c in model.components:
        if isinstance(model, MixtureBernoulli):
            probs = [c.p(n) for n in range(1, H + 1)]
            out.append(enumerate_paths(lambda b: path_weight_bernoulli(probs, b), H, predicate))
        else:
            out.append(enumerate_paths(lambda b: path_weight_markov(c.pi1, c.q0, c.q1, b), H, predicate))
    return out


def explicit_oracle(weights, blocks, predicate):
    """Per-block P(predicate(outcome) | block) on an explicit space."""
    out = []
    for block in blocks:
        mass = sum(weights[w] for w in block)
        hit = sum(weights[w] for w in block if predicate(w))
        out.append(None if mass == 0 else hit / mass)
    return out


# -- fixtures ----------------------------------------------------------------

@pytest.fixture
def s4():
    space = FiniteProbabilitySpace([F(1, 4)] * 4)
    a1 = Event.of(2, 3)
    a2 = Event.of(1, 3)
    return space, a1, a2


@pytest.fixture
def f2():
    return Partition(({0, 1}, {2, 3}))


@pytest.fixture
def half():
    return MixtureBernoulli.of((1, ProbFormula.constant(F(1, 2))))


@pytest.fixture
def geo():
    return MixtureBernoulli.of((1, ProbFormula.geometric(F(1, 2), F(1, 2))))


@pytest.fixture
def markov():
    return MixtureMarkov.of((1, F(1, 2), F(1, 4), F(3, 4)))


# -- random model generators (seeded) -----------------------------------------

def rand_prob(rng, den_max=8, allow_edges=True):
    den = rng.randint(1, den_max)
    lo = 0 if allow_edges else 1
    hi = den if allow_edges else den - 1
    if hi < lo:
        return F(1, 2)
    return F(rng.randint(lo, hi), den)


def rand_weights(rng, k):
    raw = [rng.randint(1, 6) for _ in range(k)]
    total = sum(raw)
    return [F(r, total) for r in raw]


def rand_formula(rng):
    family = rng.choice(["constant", "geometric", "power"])
    c = rand_prob(rng)
    if family == "constant":
        return ProbFormula.constant(c)
    if family == "geometric":
        return ProbFormula.geometric(c, rand_prob(rng))
    return ProbFormula.power(c, rng.randint(0, 3))


def rand_mixture(rng, max_components=3):
    k = rng.randint(1, max_components)
    ws = rand_weights(rng, k)
    if rng.random() < 0.5:
        return MixtureBernoulli.of(*[(w, rand_formula(rng)) for w in ws])
    return MixtureMarkov.of(*[(w, rand_prob(rng), rand_prob(rng), rand_prob(rng)) for w in ws])


def rand_explicit(rng, max_outcomes=16, max_events=8, zero_weight=True):
    size = rng.randint(1, max_outcomes)
    raw = [rng.randint(0 if zero_weight else 1, 5) for _ in range(size)]
    if sum(raw) == 0:
        raw[0] = 1
    total = sum(raw)
    space = FiniteProbabilitySpace([F(r, total) for r in raw])
    labels = [rng.randrange(rng.randint(1, size)) for _ in range(size)]
    blocks = {}
    for w, lab in enumerate(labels):
        blocks.setdefault(lab, set()).add(w)
    partition = Partition(tuple(blocks.values()))
    n_events = rng.randint(1, max_events)
    events = tuple(Event(frozenset(w for w in range(size) if rng.random() < 0.5))
                   for _ in range(n_events))
    return ExplicitModel(space, partition, events)


@pytest.fixture
def rng():
    return random.Random(20261015)


# -- acceptance summary ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
