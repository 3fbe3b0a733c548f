import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from survodds.evaluation import compare_models, concordance_index, ranking_to_csv
from survodds.exceptions import DegenerateDataError, DomainError

from oracles import pair_concordance


def test_perfect_and_constant():
    t = np.arange(1.0, 11.0)
    e = np.ones(10, int)
    assert concordance_index(t, e, -t).c_index == 1.0
    assert concordance_index(t, e, np.zeros(10)).c_index == 0.5


def test_small_hand_case():
    t, e, r = [1, 2, 3, 4], [1, 1, 0, 1], [3, 1, 2, 0]
    res = concordance_index(t, e, r)
    # pairs: (1,2)c (1,3)c (1,4)c (2,3)d (2,4)c ; subject 3 censored before 4 is not comparable
    assert (res.concordant, res.discordant, res.tied_risk, res.comparable_pairs) == (4, 1, 0, 5)
    assert res.c_index == 0.8


def test_tied_times():
    # both events at t=2: not comparable; event vs censored at t=2: event is earlier
    res = concordance_index([2, 2, 2], [1, 1, 0], [1, 0, 5])
    assert res.comparable_pairs == 2 and res.concordant == 0


def test_no_pairs():
    with pytest.raises(DegenerateDataError):
        concordance_index([1, 2], [0, 0], [1, 2])


@pytest.mark.parametrize("seed", range(20))
def test_matches_pair_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 100))
    t = rng.integers(1, 20, n)
    e = rng.integers(0, 2, n)
    e[0] = 1
    t[0] = 0
    r = rng.integers(0, 5, n)
    res = concordance_index(t, e, r)
    assert (res.concordant, res.discordant, res.tied_risk, res.comparable_pairs) == pair_concordance(t, e, r)
    assert res.c_index == pytest.approx((res.concordant + 0.5 * res.tied_risk) / res.comparable_pairs, abs=1e-12)


def test_random_scores_near_half():
    rng = np.random.default_rng(0)
    t = rng.exponential(1, 500)
    e = (rng.random(500) < 0.7).astype(int)
    assert abs(concordance_index(t, e, rng.random(500)).c_index - 0.5) < 0.05


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 30), st.booleans(), st.integers(-50, 50)), min_size=3, max_size=40))
def test_invariances(rows):
    t = np.array([r[0] for r in rows])
    e = np.array([int(r[1]) for r in rows])
    s = np.array([r[2] for r in rows])
    e[0], t[0] = 1, 0
    res = concordance_index(t, e, s)
    assert 0 <= res.c_index <= 1
    assert concordance_index(t, e, s.astype(float) ** 3 + 5 * s).c_index == res.c_index
    if len(np.unique(s)) == len(s):
        assert concordance_index(t, e, -s).c_index == pytest.approx(1 - res.c_index, abs=1e-12)


def test_single_model():
    (m,) = compare_models([("a", -10.0, 1, 20)])
    assert m.rank == 1 and m.delta_aic == 0


def test_dominance_and_hand_order():
    ranking = compare_models([("worse", -100.0, 2, 50), ("better", -90.0, 2, 50)])
    assert ranking[0].label == "better" and ranking[0].bic_rank == 1
    entries = [("a", -100.0, 1, 100), ("b", -98.0, 3, 100), ("c", -99.5, 2, 100)]
    aic = {lab: 2 * k - 2 * ll for lab, ll, k, _ in entries}
    bic = {lab: math.log(100) * k - 2 * ll for lab, ll, k, _ in entries}
    ranking = compare_models(entries)
    assert [m.label for m in ranking] == sorted(aic, key=aic.get)
    assert sorted(ranking, key=lambda m: m.bic_rank)[0].label == min(bic, key=bic.get)
    for m in ranking:
        assert m.aic == pytest.approx(aic[m.label], abs=1e-10)


def test_tie_broken_by_label():
    ranking = compare_models([("zeta", -5.0, 1, 10), ("alpha", -5.0, 1, 10)])
    assert [m.label for m in ranking] == ["alpha", "zeta"]


def test_nan_goes_last_and_mixed_n_rejected():
    ranking = compare_models([("failed", math.nan, 2, 10), ("ok", -5.0, 1, 10)])
    assert ranking[-1].label == "failed"
    with pytest.raises(DomainError):
        compare_models([("a", -1.0, 1, 10), ("b", -1.0, 1, 11)])
    assert ranking_to_csv(ranking).splitlines()[0].startswith("label,loglik,k,aic,bic,delta_aic,rank")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-500, -1), st.integers(0, 5)), min_size=1, max_size=6), st.randoms())
def test_order_independent_of_input_order(fits, rnd):
    entries = [(f"m{i}", ll, k, 100) for i, (ll, k) in enumerate(fits)]
    shuffled = entries[:]
    rnd.shuffle(shuffled)
    assert [m.label for m in compare_models(entries)] == [m.label for m in compare_models(shuffled)]
