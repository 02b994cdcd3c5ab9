import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recap import CaptureMatrix, GeneratorSpec, ModelSpec, Quantifier, cut_search, fit_model, generate, parse_model
from recap import parse_models, rank_models
from recap.selection import _CutScorer, cut_candidates

from conftest import random_capture_matrix


def small_data(seed=11, m=25, t=6):
    return random_capture_matrix(np.random.default_rng(seed), m, t, p=0.3)


def test_rank_single_candidate():
    rep = rank_models(small_data(), [parse_model("mz")])
    assert len(rep) == 1 and rep.best.label == "Mz"


def test_rank_sorted_by_aic_then_params():
    data = small_data()
    rep = rank_models(data, parse_models("standard"))
    keys = [r.sort_key() for r in rep]
    assert keys == sorted(keys)
    assert len(rep) == 11
    # shared-H1 models tie on N but not on AIC
    nh = {r.label: r.result.n_hat for r in rep}
    assert nh["Mb"] == nh["Mc1b"] == nh["Mc2b"]


def test_rank_records_errors_without_aborting():
    # at t=3 ML2 is undefined, the other model still fits
    data = CaptureMatrix.from_rows([(1, 0, 1), (0, 1, 1), (1, 1, 0), (0, 0, 1)])
    rep = rank_models(data, [parse_model("ml2"), parse_model("m0")])
    assert rep.best.label == "M0"
    bad = rep.rows[-1]
    assert bad.result is None and "t >= 4" in bad.error
    csv_lines = rep.to_csv().splitlines()
    assert csv_lines[0] == "model,params,n_hat,ci_lo,ci_hi,aic,failure"
    assert csv_lines[-1].startswith("ML2,")
    assert json.loads(rep.to_json())[1]["error"]


def test_rank_requires_candidates():
    with pytest.raises(ValueError):
        rank_models(small_data(), [])


def test_cut_candidates_replace_zero_by_tiny_cut():
    data = small_data()
    cands = cut_candidates(data, Quantifier("g"))
    assert cands[0] == Fraction(1, 2**6)
    assert all(a < b for a, b in zip(cands, cands[1:]))
    assert all(0 < c < 1 for c in cands)


@pytest.mark.parametrize("q", ["g", "gn", "gtilde"])
def test_scorer_matches_full_profile_fit(q):
    from recap import parse_quantifier

    data = small_data(seed=5)
    quant = parse_quantifier(q, data.t)
    scorer = _CutScorer(data, quant, 400, "full")
    cands = cut_candidates(data, quant)
    rng = np.random.default_rng(0)
    for _ in range(6):
        k = int(rng.integers(1, 4))
        idx = tuple(sorted(rng.choice(len(cands), size=k, replace=False)))
        spec = ModelSpec("cut", quantifier=quant, cutpoints=tuple(cands[i] for i in idx))
        ref = fit_model(data, spec, n_upp=400, grid="full")
        assert scorer.score(idx) == pytest.approx(ref.loglik, abs=1e-8)


def test_full_search_is_exhaustive_optimum():
    data = small_data(seed=3, m=15, t=5)
    q = Quantifier("g")
    cands = cut_candidates(data, q)
    for n_cuts in (1, 2):
        cuts, res = cut_search(data, q, n_cuts, "full", n_upp=300, grid="full")
        brute = max(
            (fit_model(data, ModelSpec("cut", quantifier=q, cutpoints=c), n_upp=300, grid="full").loglik, c)
            for c in itertools.combinations(cands, n_cuts)
        )
        assert res.loglik == pytest.approx(brute[0], abs=1e-8)


def test_single_tiny_cut_is_mb():
    data = small_data(seed=8)
    q = Quantifier("g")
    spec = ModelSpec("cut", quantifier=q, cutpoints=(Fraction(1, 2**data.t),))
    a = fit_model(data, spec, grid="full")
    b = fit_model(data, parse_model("mb"), grid="full")
    assert a.loglik == pytest.approx(b.loglik, abs=1e-9)
    assert a.n_hat == b.n_hat and a.ci == b.ci


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**31))
def test_more_cuts_never_lower_loglik(seed):
    data = random_capture_matrix(np.random.default_rng(seed), 30, 7, p=0.3)
    q = Quantifier("g")
    prev = -np.inf
    for k in range(1, 5):
        try:
            _, res = cut_search(data, q, k, "greedy", n_upp=300)
        except ValueError:
            break
        assert res.loglik >= prev - 1e-9
        prev = res.loglik
    full1 = cut_search(data, q, 1, "full", n_upp=300)[1]
    full2 = cut_search(data, q, 2, "full", n_upp=300)[1]
    assert full2.loglik >= full1.loglik - 1e-9


def test_greedy_and_reduced_run_and_agree_with_full_for_two_cuts():
    data = small_data(seed=21, m=40, t=8)
    q = Quantifier("g")
    full = cut_search(data, q, 2, "full")[1]
    greedy = cut_search(data, q, 2, "greedy")[1]
    reduced = cut_search(data, q, 2, "reduced")[1]
    assert greedy.loglik == pytest.approx(full.loglik)
    assert reduced.loglik <= full.loglik + 1e-9
    for k in (3, 4):
        cuts, res = cut_search(data, q, k, "reduced")
        assert len(cuts) == k and res.params == k + 2


def test_cut_search_rejects_too_many_cuts():
    data = CaptureMatrix.from_rows([(1, 0, 0), (0, 1, 0)])
    with pytest.raises(ValueError):
        cut_search(data, Quantifier("g"), 5)
    with pytest.raises(ValueError):
        cut_search(data, Quantifier("g"), 0)


def test_cut_search_tie_goes_to_smallest_vector():
    # identical rows: several cuts give the same likelihood
    data = CaptureMatrix.from_rows([(1, 1, 1, 1)] * 4)
    q = Quantifier("g")
    cands = cut_candidates(data, q)
    scorer = _CutScorer(data, q, 200, "coarse")
    scores = [scorer.score((i,)) for i in range(len(cands))]
    cuts, _ = cut_search(data, q, 1, n_upp=200)
    top = max(scores)
    first = next(i for i, s in enumerate(scores) if s > top - 1e-9)
    assert cuts == (cands[first],)


def test_cutsearch_model_through_fit_model():
    data = generate(GeneratorSpec(parse_model("mz"), 80, 10, seed=4, alpha=-2.5, beta=3.0))
    res = fit_model(data, parse_model("cutsearch:g:2"))
    cuts, direct = cut_search(data, Quantifier("g"), 2)
    assert res.to_dict() == direct.to_dict()
    assert res.model.startswith("Mz.cut(")
