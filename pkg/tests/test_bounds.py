import json
import random
from fractions import Fraction as F

import mpmath
import pytest

from bcq.bounds import (
    chung_erdos,
    erdos_renyi_schedule,
    first_bc_quantitative,
    generalized_bc_series,
    kochen_stone_quantitative,
    markov_coefficient_report,
    markov_power_coefficient,
    power_coefficient,
    product_recursion_check,
    second_bc_quantitative,
    second_moment_ratio,
    switch_identity_check,
    weighted_divergence_series,
)
from bcq.errors import InvalidInput, UndefinedCoefficient
from bcq.measure import Event, FiniteProbabilitySpace, Partition
from bcq.models import ExplicitModel, MixtureBernoulli, MixtureMarkov, ProbFormula
from bcq.rates import RateFunction, convergence_rate, divergence_rate
from bcq.report import (
    HOLDS,
    INAPPLICABLE,
    INCONCLUSIVE,
    VIOLATED,
    BoundReport,
    judge,
)

from conftest import rand_explicit

mpmath.mp.dps = 40


@pytest.fixture
def s4_model(s4):
    space, a1, a2 = s4
    return ExplicitModel(space, Partition.trivial(4), (a1, a2))


@pytest.fixture
def two_regimes():
    return MixtureBernoulli.of((F(1, 2), ProbFormula.constant(F(1, 2))),
                               (F(1, 2), ProbFormula.geometric(F(1, 2), F(1, 2))))


def round_trip(report: BoundReport) -> BoundReport:
    return BoundReport.from_dict(json.loads(json.dumps(report.to_dict())))


def assert_consistent(report: BoundReport):
    for r in report.rows:
        assert r.rederive() == r.verdict
    back = round_trip(report)
    assert back.verdicts() == report.verdicts()
    assert [(r.lhs, r.rhs, r.margin) for r in back.rows] == [(r.lhs, r.rhs, r.margin) for r in report.rows]


# -- series and identities ----------------------------------------------------

def test_generalized_series_geometric(geo):
    bf, rep = generalized_bc_series(geo, 1, 2)
    # 1/2*1/4 + 3/4*1/8
    assert bf[0] == F(7, 32)
    assert rep.status == HOLDS
    assert_consistent(rep)


def test_generalized_series_divergent_inapplicable(half):
    _, rep = generalized_bc_series(half, 0, 4)
    assert rep.status == INAPPLICABLE


def test_generalized_series_markov_absorbing_zero():
    model = MixtureMarkov.of((1, F(1, 2), F(0), F(1, 2)))
    bf, rep = generalized_bc_series(model, 1, 6)
    assert bf[0] == 0 and rep.status == HOLDS


@pytest.mark.parametrize("N", [1, 4, 9])
def test_switch_identity(half, geo, markov, N):
    for model in (half, geo, markov):
        rep = switch_identity_check(model, N)
        assert rep.status == HOLDS
        assert_consistent(rep)


def test_switch_identity_geometric_numbers(geo):
    row = switch_identity_check(geo, 1).rows[0]
    assert row.lhs == F(1, 4) == row.rhs


# -- power coefficients -------------------------------------------------------

def test_bernoulli_alpha_is_one(geo):
    pc = power_coefficient(geo, 2, 5)
    r = pc.rows[0]
    assert r.alpha.is_exact and r.alpha.lower == 1
    assert r.unit_residual == 0 and r.relation_holds(1)
    assert pc.report().status == HOLDS


def test_markov_alpha_worked_example(markov):
    r = power_coefficient(markov, 1, 2).rows[0]
    truth = 2 - mpmath.log(3, 2)
    assert r.alpha.width <= F(1, 10**9)
    assert mpmath.mpf(r.alpha.lower.numerator) / r.alpha.lower.denominator <= truth
    assert truth <= mpmath.mpf(r.alpha.upper.numerator) / r.alpha.upper.denominator
    assert (r.joint, r.tail, r.complement) == (F(3, 8), F(1, 2), F(1, 2))
    assert not r.relation_holds(1)
    assert power_coefficient(markov, 1, 2).report().status == HOLDS


def test_markov_two_variants(markov):
    (r,) = markov_power_coefficient(markov, 1)
    assert r.displayed_form.contains(2)
    assert not r.complement_form.contains(2)
    assert r.disagree
    rep = markov_coefficient_report(markov, 1)
    assert rep.status == HOLDS
    assert rep.extras["variants"]["0"]["disagree"] is True


def test_independent_chain_both_variants_one():
    model = MixtureMarkov.of((1, F(1, 3), F(1, 3), F(1, 3)))
    (r,) = markov_power_coefficient(model, 2)
    assert r.complement_form.contains(1) and r.displayed_form.contains(1)
    assert not r.disagree


def test_absorbing_zero_displayed_form_undefined():
    model = MixtureMarkov.of((1, F(1, 2), F(0), F(1, 2)))
    (r,) = markov_power_coefficient(model, 1)
    assert r.displayed_form is None
    assert "= 0" in r.displayed_error


def test_undefined_coefficient_named():
    model = MixtureBernoulli.of((1, ProbFormula.constant(F(1))))
    with pytest.raises(UndefinedCoefficient, match=r"P\(A_1\^c\|F\) = 0"):
        power_coefficient(model, 1, 3)


def test_power_coefficient_argument_checks(half):
    with pytest.raises(InvalidInput):
        power_coefficient(half, 2, 2)
    with pytest.raises(InvalidInput):
        markov_power_coefficient(half, 1)


def test_recursion_bernoulli(half):
    rep = product_recursion_check(half, 1, 2, 4)
    verdicts = rep.verdicts()
    assert verdicts[(0, "identity")] == HOLDS
    assert verdicts[(0, "exp-bound")] == HOLDS
    bound = next(r for r in rep.rows if r.label == "exp-bound")
    assert bound.lhs == F(1, 16)
    assert_consistent(rep)


def test_recursion_markov(markov):
    rep = product_recursion_check(markov, 1, 1, 3)
    assert rep.status == HOLDS
    assert all(r.verdict == HOLDS for r in rep.rows)


def test_recursion_undefined_goes_inapplicable():
    model = MixtureBernoulli.of((1, ProbFormula.constant(F(1))))
    rep = product_recursion_check(model, 1, 1, 3)
    assert rep.status == INAPPLICABLE


def test_weighted_series_constant_half(half):
    ws = weighted_divergence_series(half, 11)
    assert ws.partials[0][-1].contains(5)
    assert ws.trend == ("diverging",)
    assert ws.report().status == HOLDS


def test_weighted_series_bounded(geo):
    assert weighted_divergence_series(geo, 6).trend == ("bounded",)


# -- second moment ------------------------------------------------------------

def test_chung_erdos_s4(s4_model):
    rep = chung_erdos(s4_model, 2)
    r = rep.rows[0]
    assert (r.lhs, r.rhs) == (F(3, 4), F(2, 3))
    assert rep.status == HOLDS


def test_chung_erdos_constant_half(half):
    r = chung_erdos(half, 4).rows[0]
    assert (r.lhs, r.rhs) == (F(15, 16), F(4, 5))


def test_second_moment_ratio_s4(s4_model):
    bf, rep = second_moment_ratio(s4_model, 2)
    assert bf[0] == F(3, 2)
    assert rep.status == HOLDS


def test_second_moment_ratio_half(half):
    bf, _ = second_moment_ratio(half, 4)
    assert bf[0] == F(5, 4)


def test_second_moment_zero_marginals():
    space = FiniteProbabilitySpace([F(1, 2), F(1, 2)])
    model = ExplicitModel(space, Partition.discrete(2), (Event.of(0),))
    bf, rep = second_moment_ratio(model, 1)
    assert bf.null_blocks == frozenset({1})
    assert rep.verdicts()[(1, "")] == INAPPLICABLE
    assert rep.verdicts()[(0, "")] == HOLDS


@pytest.mark.parametrize("seed", range(30))
def test_second_moment_properties_random(seed):
    rng = random.Random(seed)
    model = rand_explicit(rng, max_outcomes=10, max_events=5)
    n = len(model.events)
    ce = chung_erdos(model, n)
    sm = second_moment_ratio(model, n)[1]
    assert VIOLATED not in {r.verdict for r in ce.rows + sm.rows}
    assert_consistent(ce)
    assert_consistent(sm)


# -- quantitative lemmas ------------------------------------------------------

def test_first_bc_geometric(geo):
    phi = convergence_rate(geo, 4)
    rep = first_bc_quantitative(geo, phi, 3, 10)
    r = rep.rows[0]
    assert r.rhs == F(1, 8)
    assert r.lhs == 1 - F(15, 16) * F(31, 32) * F(63, 64) * F(127, 128) * F(255, 256) * F(511, 512) * F(1023, 1024)
    assert rep.status == HOLDS


def test_first_bc_premise_violation_reported(geo):
    bad = RateFunction.from_function("phi", 1, lambda lv: 1, range(0, 3))
    rep = first_bc_quantitative(geo, bad, 2, 6)
    assert rep.status == INAPPLICABLE
    assert "premise-violated" in rep.rows[0].note


def test_second_bc_constant_half(half):
    psi = divergence_rate(half, 3)
    rep = second_bc_quantitative(half, psi, 1, 3)
    r = rep.rows[0]
    assert r.lhs == F(63, 64)
    assert rep.status == HOLDS
    assert_consistent(rep)


def test_second_bc_mixture(two_regimes):
    psi = divergence_rate(two_regimes, 2)
    rep = second_bc_quantitative(two_regimes, psi, 1, 2)
    assert rep.verdicts() == {(0, ""): HOLDS, (1, ""): INAPPLICABLE}
    assert rep.status == HOLDS


def test_second_bc_markov_inapplicable(markov):
    psi = divergence_rate(markov, 2)
    assert second_bc_quantitative(markov, psi, 1, 2).status == INAPPLICABLE


@pytest.mark.parametrize("level, m, last", [(0, 4, 16), (1, 4, 16), (2, 5, 32), (3, 6, 64)])
def test_erdos_renyi_schedule(half, level, m, last):
    psi = divergence_rate(half, 2)
    rep = erdos_renyi_schedule(half, psi, None, 1, level)
    sched = rep.extras["schedule"]["0"]
    assert sched["m"] == m
    assert sched["schedule"] == [2 ** k for k in range(1, m + 1)]
    r = rep.rows[0]
    assert r.lhs == 1 - F(1, 2 ** last)
    assert rep.status == HOLDS


def test_erdos_renyi_summable_block(geo):
    psi = divergence_rate(geo, 2)
    assert erdos_renyi_schedule(geo, psi, None, 1, 1).status == INAPPLICABLE


def test_kochen_stone_witness(half):
    rep = kochen_stone_quantitative(half, None, 1, 1, lambda i: 2 * i)
    search = rep.extras["search"]["0"]
    assert search["witness"] == 2
    assert all(mg > 0 for _, mg in search["margins"])
    assert rep.status == HOLDS


def test_kochen_stone_budget_is_inconclusive():
    model = MixtureBernoulli.of((1, ProbFormula.constant(F(1, 2))))
    psi = divergence_rate(model, 2)
    # the first candidate is n = m + 1 = 2, already past the cap
    rep = kochen_stone_quantitative(model, psi, 1, 1, lambda i: 2 * i, n_max=1)
    assert rep.status == INCONCLUSIVE
    assert "budget-exhausted" in rep.rows[0].note


def test_kochen_stone_bad_window(half):
    with pytest.raises(InvalidInput):
        kochen_stone_quantitative(half, None, 1, 1, lambda i: i)


# -- report mechanics ---------------------------------------------------------

def test_judge_relations():
    assert judge(F(1), F(1), "==")[0] == HOLDS
    assert judge(F(1), F(2), ">=")[0] == VIOLATED
    assert judge(F(1), F(2), "<=")[0] == HOLDS
    assert judge(None, F(1), ">=")[0] == INAPPLICABLE


def test_report_status_precedence(two_regimes):
    psi = divergence_rate(two_regimes, 2)
    rep = second_bc_quantitative(two_regimes, psi, 1, 2)
    assert rep.exit_code == 0
    assert rep.restrict([1]).exit_code == 3
