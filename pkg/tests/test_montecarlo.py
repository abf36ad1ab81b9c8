import math
from fractions import Fraction as F

import pytest

from bcq.errors import InvalidInput
from bcq.measure import Partition
from bcq.models import ExplicitModel, MixtureBernoulli, ProbFormula
from bcq.montecarlo import (
    Query,
    SimulationPlan,
    _bernoulli,
    estimate_query,
    hoeffding_halfwidth,
    horizon_sweep,
    sample_path,
    stream,
)


def test_hoeffding_formula():
    assert hoeffding_halfwidth(10_000, 0.01) == pytest.approx(0.016276, abs=1e-6)
    assert hoeffding_halfwidth(1, 0.5) == math.sqrt(math.log(4) / 2)
    with pytest.raises(InvalidInput):
        hoeffding_halfwidth(0, 0.1)


def test_streams_are_keyed():
    a = stream(1, 0, 0).integers(1 << 62)
    assert a == stream(1, 0, 0).integers(1 << 62)
    assert a != stream(1, 0, 1).integers(1 << 62)
    assert a != stream(1, 1, 0).integers(1 << 62)
    assert a != stream(2, 0, 0).integers(1 << 62)


def test_bernoulli_draw_edges():
    rng = stream(0, 0, 0)
    assert _bernoulli(rng, F(0)) == 0
    assert _bernoulli(rng, F(1)) == 1


def test_bernoulli_huge_denominator():
    p = F(1, 3) + F(1, 2**80)
    rng = stream(5, 0, 0)
    hits = sum(_bernoulli(rng, p) for _ in range(3000))
    assert abs(hits / 3000 - 1 / 3) < 0.05


def test_absorbing_chain_path():
    from bcq.models import MixtureMarkov
    model = MixtureMarkov.of((1, F(1), F(0), F(1)))
    assert sample_path(model, 0, 8, stream(3, 0, 0)) == [1] * 8


def test_query_semantics():
    path = [0, 0, 1, 1]
    assert Query("union", 1, 2).hit(path) is False
    assert Query("union", 2, 3).hit(path) is True
    assert Query("pattern", 1, 2).hit(path) is True
    assert Query("pattern", 2, 1).hit(path) is True
    assert Query("pairwise", 3, 4).hit(path) is True
    with pytest.raises(InvalidInput):
        Query("union", 3, 2)
    with pytest.raises(InvalidInput):
        Query("spike", 1, 1)


def test_plan_validation(half, s4):
    q = Query("union", 1, 2)
    with pytest.raises(InvalidInput):
        SimulationPlan(half, 1, 10, 0, q)
    space, a1, a2 = s4
    explicit = ExplicitModel(space, Partition.trivial(4), (a1, a2))
    with pytest.raises(InvalidInput):
        SimulationPlan(explicit, 2, 10, 0, q)


def test_estimate_covers_exact(half):
    plan = SimulationPlan(half, 2, 4000, 11, Query("union", 1, 2))
    est = estimate_query(plan)
    assert est.covers(Query("union", 1, 2).exact(half)) == [True]
    assert est == estimate_query(plan)


def test_mixture_strata(markov):
    model = MixtureBernoulli.of((F(1, 3), ProbFormula.constant(F(1, 5))),
                                (F(2, 3), ProbFormula.geometric(F(1, 2), F(1, 2))))
    q = Query("pattern", 1, 1)
    est = estimate_query(SimulationPlan(model, 2, 3000, 3, q))
    assert len(est.counts) == 2
    assert all(est.covers(q.exact(model)))


def test_sweep_monotone_and_trend():
    model = MixtureBernoulli.of((F(1, 2), ProbFormula.constant(F(1, 2))),
                                (F(1, 2), ProbFormula.geometric(F(1, 4), F(1, 4))))
    plan = SimulationPlan(model, 12, 2000, 9, Query("union", 1, 1))
    sw = horizon_sweep(plan, [1, 4, 12])
    for b in range(2):
        counts = [e.counts[b] for e in sw.estimates]
        assert counts == sorted(counts)
    assert sw.trend == ("to-one", "plateau")
    with pytest.raises(InvalidInput):
        horizon_sweep(plan, [4, 2])
