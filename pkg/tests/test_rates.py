from fractions import Fraction as F

import pytest

from bcq.errors import InvalidInput
from bcq.measure import Event, FiniteProbabilitySpace, Partition
from bcq.models import ExplicitModel, MixtureBernoulli, MixtureMarkov, ProbFormula
from bcq.rates import (
    BUDGET_EXHAUSTED,
    INAPPLICABLE,
    OK,
    RateFunction,
    convergence_rate,
    correlation_rate,
    divergence_rate,
)


def brute_psi(probs, N):
    """Least n with p_1 + ... + p_n >= N, by plain summation."""
    total = F(0)
    for n, p in enumerate(probs, start=1):
        total += p
        if total >= N:
            return n
    return None


def test_psi_constant_half(half):
    rate = divergence_rate(half, 5)
    assert rate.status == (OK,)
    assert rate.tables[0] == {N: 2 * N for N in range(1, 6)}


def test_psi_matches_brute_scan_for_harmonic():
    model = MixtureBernoulli.of((1, ProbFormula.power(1, 1)))
    rate = divergence_rate(model, 3)
    probs = [F(1, k) for k in range(1, 200)]
    assert rate.tables[0] == {N: brute_psi(probs, N) for N in (1, 2, 3)}
    assert rate.tables[0][3] == 11


def test_psi_convergent_block_inapplicable(geo):
    rate = divergence_rate(geo, 3)
    assert rate.status == (INAPPLICABLE,)
    assert not rate.applicable(0)
    assert rate.value(0, 1) is None


def test_psi_budget_exhausted():
    model = MixtureBernoulli.of((1, ProbFormula.power(1, 1)))
    rate = divergence_rate(model, 10, n_budget=50)
    assert rate.status == (BUDGET_EXHAUSTED,)


def test_psi_markov_brute():
    model = MixtureMarkov.of((1, F(0), F(1, 5), F(1, 2)))
    comp = model.components[0]
    probs = [comp.marginal(n) for n in range(1, 100)]
    rate = divergence_rate(model, 4)
    assert rate.tables[0] == {N: brute_psi(probs, N) for N in range(1, 5)}


def test_psi_explicit_short_family(s4):
    space, a1, a2 = s4
    model = ExplicitModel(space, Partition.trivial(4), (a1, a2))
    rate = divergence_rate(model, 2)
    assert rate.status == (INAPPLICABLE,)
    assert rate.tables[0] == {1: 2}


def test_phi_geometric(geo):
    rate = convergence_rate(geo, 8)
    assert rate.tables[0] == {lv: lv + 1 for lv in range(9)}


def test_phi_is_least_index_for_power_family():
    model = MixtureBernoulli.of((1, ProbFormula.power(1, 2)))
    rate = convergence_rate(model, 4)
    comp = model.components[0]
    for lv, n in rate.tables[0].items():
        assert comp.p.tail_bound(n) <= F(1, 2**lv)
        assert n == 1 or comp.p.tail_bound(n - 1) > F(1, 2**lv)


def test_phi_divergent_inapplicable(half):
    rate = convergence_rate(half, 3)
    assert rate.status == (INAPPLICABLE,)


def test_phi_mixture_blocks_independent():
    model = MixtureBernoulli.of((F(1, 2), ProbFormula.constant(F(1, 2))),
                                (F(1, 2), ProbFormula.geometric(F(1, 2), F(1, 2))))
    rate = convergence_rate(model, 2)
    assert rate.status == (INAPPLICABLE, OK)
    assert rate.tables[1] == {0: 1, 1: 2, 2: 3}


def ratio_brute(p, j):
    """Independent events with constant p: sum_{i,k<=j} P(A_i A_k) / (j p)**2."""
    s2 = j * p + j * (j - 1) * p * p
    return s2 / (j * p) ** 2


@pytest.mark.parametrize("level, n", [(0, 1), (1, 1), (2, 3), (3, 1), (3, 12)])
def test_correlation_rate_closed_form(half, level, n):
    rate = correlation_rate(half, level, n)
    expected = max(n, 2**level)
    assert rate.value(0, level, n) == expected
    # least witness: the ratio fails just below (when that index is >= n)
    assert ratio_brute(F(1, 2), expected) <= 1 + F(1, 2**level)
    if expected - 1 >= n:
        assert ratio_brute(F(1, 2), expected - 1) > 1 + F(1, 2**level)


def test_correlation_rate_summable_block_certified(geo):
    rate = correlation_rate(geo, 2, 1)
    assert rate.value(0, 2, 1) is None
    assert rate.failure(0, 2, 1) == INAPPLICABLE


def test_correlation_rate_budget():
    model = MixtureBernoulli.of((1, ProbFormula.constant(F(1, 2))))
    rate = correlation_rate(model, 10, 1, j_budget=100)
    assert rate.failure(0, 10, 1) == BUDGET_EXHAUSTED


def test_from_function_and_to_dict():
    rate = RateFunction.from_function("psi", 2, lambda N: 2 * N, range(1, 4))
    assert rate.value(1, 3) == 6
    d = rate.to_dict()
    assert d["blocks"][0]["table"] == {"1": 2, "2": 4, "3": 6}


def test_argument_checks(half):
    with pytest.raises(InvalidInput):
        divergence_rate(half, 0)
    with pytest.raises(InvalidInput):
        convergence_rate(half, -1)
    with pytest.raises(InvalidInput):
        correlation_rate(half, 0, 0)


def test_null_block_inapplicable():
    space = FiniteProbabilitySpace([F(1), F(0)])
    model = ExplicitModel(space, Partition(({0}, {1})), (Event.of(0), Event.of(0, 1)))
    assert divergence_rate(model, 1).status[1] == INAPPLICABLE
    assert correlation_rate(model, 0, 1).failure(1, 0, 1) == INAPPLICABLE
