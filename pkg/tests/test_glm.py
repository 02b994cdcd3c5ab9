import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit, logit

from recap import CaptureMatrix, Design, DegenerateDesignError, Quantifier, build_grouped, irls_fit, loglik
from recap.glm import GroupedData, bernoulli_loglik
from recap.partitions import named_partition

from conftest import random_capture_matrix
from oracles import g_value, loglik_ungrouped


def linear(t, q="g"):
    return Design("linear", t, quantifier=Quantifier(q))


def factor(name, t, k=None):
    return Design("factor", t, partition=named_partition(name, t, k))


def test_constant_design_pools_everything():
    data = CaptureMatrix.from_rows([(1, 0, 1), (0, 1, 0)])
    g = build_grouped(data, Design("constant", 3), 7)
    assert g.successes.tolist() == [3]
    assert g.trials.tolist() == [21]


def test_mb_factor_cells_t2():
    data = CaptureMatrix.from_rows([(1, 0), (0, 1), (1, 1)])
    g = build_grouped(data, factor("Mb", 2), 5)
    # class 1: 5 first-occasion trials plus occasion 2 for the three never-caught units
    assert g.successes.tolist() == [3, 1]
    assert g.trials.tolist() == [8, 2]
    assert g.trials.sum() == 5 * 2


def test_linear_unobserved_units_sit_at_zero():
    data = CaptureMatrix.from_rows([(0, 1, 1)])
    g0 = build_grouped(data, linear(3), 1)
    g = build_grouped(data, linear(3), 4)
    zero = g.keys.index(0)
    assert g.trials[zero] - g0.trials[zero] == 3 * 3
    assert g.successes[zero] == g0.successes[zero]
    assert g.trials.sum() == 4 * 3


def test_build_grouped_rejects_small_n():
    data = CaptureMatrix.from_rows([(1, 0), (0, 1)])
    with pytest.raises(ValueError):
        build_grouped(data, Design("constant", 2), 1)


def test_constant_closed_form():
    d = Design("constant", 5)
    g = GroupedData(d, (1,), np.array([38.0]), np.array([100.0]), np.array([0.0]), 0, 0, np.ones((1, 1)))
    fit = irls_fit(g)
    assert fit.probs[0] == pytest.approx(0.38)
    assert fit.coefficients[0] == pytest.approx(logit(0.38))


def test_factor_closed_form_mb():
    data = CaptureMatrix.from_rows([(1, 0, 0), (0, 1, 1), (1, 1, 0), (0, 0, 1)])
    g = build_grouped(data, factor("Mb", 3), 9)
    fit = irls_fit(g)
    assert np.allclose(fit.probs, g.successes / g.trials)
    # H1 gains t trials per unobserved unit
    assert g.unobserved_per_unit.tolist() == [3, 0]


def test_linear_recovers_known_coefficients():
    z = np.array([0.0, 0.5, 1.0])
    n = np.full(3, 1e7)
    s = n * expit(-1 + 2 * z)
    d = linear(4)
    X = np.column_stack([np.ones(3), z])
    g = GroupedData(d, tuple(z), s, n, np.zeros(3), 0, 0, X)
    fit = irls_fit(g)
    assert fit.converged and not fit.separation
    assert fit.coefficients == pytest.approx([-1.0, 2.0], abs=1e-3)


def test_loglik_half():
    assert bernoulli_loglik([1], [2], [0.5]) == pytest.approx(-1.3863, abs=1e-4)


def test_all_failures_boundary():
    d = Design("constant", 3)
    g = GroupedData(d, (1,), np.array([0.0]), np.array([12.0]), np.array([0.0]), 0, 0, np.ones((1, 1)))
    fit = irls_fit(g)
    assert fit.loglik == 0.0
    assert fit.separation


def test_linear_separation_flag():
    # nobody is ever recaptured, so beta runs off to minus infinity
    data = CaptureMatrix.from_rows([(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (1, 0, 0, 0)])
    fit = irls_fit(build_grouped(data, linear(4), 4))
    assert fit.separation
    assert np.isfinite(fit.loglik)


def test_degenerate_linear_design():
    data = CaptureMatrix.from_rows([(0, 0, 1), (0, 0, 1)])
    with pytest.raises(DegenerateDesignError):
        irls_fit(build_grouped(data, linear(3), 2))


def _design_prob(design, fit):
    def prob(prefix):
        f = sum(b << j for j, b in enumerate(prefix))
        key = design.key(tuple(prefix), f, sum(prefix))
        if design.kind == "linear":
            a, b = fit.coefficients
            return float(expit(a + b * float(key)))
        return float(fit.probs[int(key) - 1])

    return prob


@pytest.mark.parametrize("make", [
    lambda t: linear(t), lambda t: linear(t, "gn"), lambda t: linear(t, "f"),
    lambda t: factor("Mc", t, 2), lambda t: factor("Mcount", t), lambda t: Design("time", t),
])
def test_grouped_equals_ungrouped(make, rng):
    for _ in range(5):
        data = random_capture_matrix(rng, 10, 4)
        design = make(4)
        n = 10 + int(rng.integers(0, 15))
        g = build_grouped(data, design, n)
        fit = irls_fit(g)
        ref = loglik_ungrouped(data.rows(), n, 4, _design_prob(design, fit))
        assert loglik(fit, g) == pytest.approx(ref, abs=1e-12 * max(1.0, abs(ref)))
        assert fit.loglik == pytest.approx(ref, abs=1e-9 * max(1.0, abs(ref)))


def test_ungrouped_oracle_uses_g_directly(rng):
    data = random_capture_matrix(rng, 12, 5)
    fit = irls_fit(build_grouped(data, linear(5), 20))
    a, b = fit.coefficients
    ref = loglik_ungrouped(data.rows(), 20, 5, lambda pre: expit(a + b * g_value(pre)))
    assert fit.loglik == pytest.approx(ref, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(3, 8), st.integers(5, 30), st.sampled_from(["g", "gn", "gtilde", "gaug:1"]))
def test_irls_gradient_vanishes(seed, t, m, q):
    from recap import parse_quantifier

    rng = np.random.default_rng(seed)
    data = random_capture_matrix(rng, m, t, p=0.3)
    design = Design("linear", t, quantifier=parse_quantifier(q, t))
    g = build_grouped(data, design, m + int(rng.integers(0, 3 * m)))
    try:
        fit = irls_fit(g)
    except DegenerateDesignError:
        return
    if fit.separation or not fit.converged:
        return
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        up = fit.__class__(**{**fit.__dict__, "coefficients": fit.coefficients + e})
        dn = fit.__class__(**{**fit.__dict__, "coefficients": fit.coefficients - e})
        grad = (loglik(up, g) - loglik(dn, g)) / (2 * h)
        assert abs(grad) < 1e-4 * max(1.0, g.trials.sum() / 100)
    # analytic gradient
    p = expit(g.X @ fit.coefficients)
    assert np.max(np.abs(g.X.T @ (g.successes - g.trials * p))) < 1e-6


def test_zero_weight_cells_do_not_change_fit(rng):
    data = random_capture_matrix(rng, 15, 5)
    g = build_grouped(data, linear(5), 30)
    base = irls_fit(g)
    extra_z = np.array([0.123, 0.777])
    padded = GroupedData(
        g.design, g.keys + tuple(extra_z), np.concatenate([g.successes, [0, 0]]),
        np.concatenate([g.observed_trials, [0, 0]]), np.concatenate([g.unobserved_per_unit, [0, 0]]),
        g.m, g.n_total, np.vstack([g.X, np.column_stack([np.ones(2), extra_z])]),
    )
    fit = irls_fit(padded)
    assert fit.coefficients == pytest.approx(base.coefficients, abs=1e-10)
    assert fit.loglik == pytest.approx(base.loglik, abs=1e-10)


def test_grouped_csv_dump():
    data = CaptureMatrix.from_rows([(1, 0), (0, 1), (1, 1)])
    text = build_grouped(data, factor("Mb", 2), 5).to_csv()
    assert text.splitlines() == ["key,successes,trials", "1,3,8", "2,1,2"]


def test_trials_total_is_n_times_t(rng):
    data = random_capture_matrix(rng, 9, 6)
    for design in (linear(6), factor("Mcb", 6, 2), Design("time", 6), factor("ML2", 6)):
        for n in (9, 13, 40):
            g = build_grouped(data, design, n)
            assert g.trials.sum() == n * 6
            assert np.all(g.successes <= g.trials)
            assert g.successes.sum() == data.n_captures


def test_log_of_probability_floor_is_finite():
    assert math.isfinite(bernoulli_loglik([0, 5], [5, 5], [0.0, 1.0]))
