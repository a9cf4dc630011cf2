import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpsummary.release import (ProductDistribution, QuantGrid, QuantizedDataset, ReleaseParams, h2,
                               h2_error_bound, h2_noiseless, mw_step, quantize_dataset,
                               quantize_scalar, score, scores, select_coordinate, update_marginal)
from dpsummary.rff import hash_points, sample_basis


def random_hashes(q, d, seed):
    b = sample_basis(0.5, d, 3, seed)
    return hash_points(b, np.random.default_rng(seed).standard_normal((q, 3)))


# ---------------------------------------------------------------- oracle


def joint_mwem(col_sums, q, grid, eps, sel_u, lap_u):
    """MWEM over the explicit joint distribution on S^d (no product form).

    Returns (marginals after T steps, time-averaged w).  Selection and
    noise use the same uniforms as the product-form implementation.
    """
    d = len(col_sums)
    states = np.array(list(itertools.product(grid, repeat=d)))  # (|S|^d, d)
    P = np.full(len(states), 1.0 / len(states))
    w_sum = np.zeros(d)
    for u_sel, u_lap in zip(sel_u, lap_u):
        w = q * (P @ states)
        psi = np.abs(w - col_sums)
        weights = np.exp(eps * (psi - psi.max()))
        cdf = np.cumsum(weights)
        i = int(np.searchsorted(cdf, u_sel * cdf[-1], side="right"))
        v = u_lap - 0.5
        noise = -(1.0 / eps) * math.copysign(1.0, v) * math.log(max(1.0 - 2.0 * abs(v), 1e-300))
        mu = col_sums[i] + noise
        P = P * np.exp(states[:, i] * (mu - w[i]) / (2.0 * q))
        P /= P.sum()
        w_sum += q * (P @ states)
    marg = np.array([[P[states[:, i] == s].sum() for s in grid] for i in range(d)])
    return marg, w_sum / len(sel_u)


def test_product_form_matches_joint_distribution():
    grid = QuantGrid(1.0)  # S = {-1, 0, 1}
    for seed in range(20):
        H = random_hashes(12, 2, seed)
        rng = np.random.default_rng(seed)
        params = ReleaseParams(0.7, 10, 1.0)
        res = h2(H, params, rng=np.random.default_rng(seed))
        # replay the documented draw order: quantization, selection, Laplace
        dq = quantize_dataset(H, grid, rng)
        sel_u, lap_u = rng.random(10), rng.random(10)
        marg, w_avg = joint_mwem(dq.col_sums(), dq.q, grid.points, 0.7, sel_u, lap_u)
        np.testing.assert_allclose(res.marginals, marg, atol=1e-9)
        np.testing.assert_allclose(res.vector, math.sqrt(2 / 2) * w_avg / dq.q, atol=1e-9)


# ---------------------------------------------------------------- quantization


def test_grid_construction():
    g = QuantGrid(0.5)
    np.testing.assert_array_equal(g.points, [-1, -0.5, 0, 0.5, 1])
    assert g.cells == 4 and len(g) == 5
    with pytest.raises(ValueError):
        QuantGrid(0.3)


def test_quantize_on_grid_is_exact():
    g = QuantGrid(0.25)
    rng = np.random.default_rng(0)
    for x in g.points:
        assert all(quantize_scalar(float(x), g, rng) == x for _ in range(50))
    with pytest.raises(ValueError):
        quantize_scalar(1.5, g, rng)


def test_quantize_two_point_frequencies():
    g = QuantGrid(0.5)
    rng = np.random.default_rng(1)
    draws = np.array([quantize_scalar(0.3, g, rng) for _ in range(100_000)])
    assert set(np.unique(draws)) == {0.0, 0.5}
    assert abs(np.mean(draws == 0.0) - 0.4) < 0.02


def test_quantize_mean_is_unbiased():
    g = QuantGrid(0.5)
    X = np.full((1000, 1000), 0.3 / math.sqrt(1000 / 2))  # sqrt(d/2) scaling maps back to 0.3
    dq = quantize_dataset(X, g, np.random.default_rng(2))
    assert abs(dq.rows.mean() - 0.3) < 0.002


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.integers(0, 2 ** 31))
def test_quantize_lands_on_adjacent_grid_point(x, seed):
    g = QuantGrid(0.125)
    v = quantize_scalar(x, g, np.random.default_rng(seed))
    assert v in set(g.points.tolist())
    assert abs(v - x) <= g.eta + 1e-12


def test_quantize_dataset_zero_and_determinism():
    g = QuantGrid(0.25)
    dq = quantize_dataset(np.zeros((5, 8)), g, np.random.default_rng(0))
    assert np.all(dq.rows == 0.0)
    H = random_hashes(30, 8, 1)
    a = quantize_dataset(H, g, np.random.default_rng(5)).rows
    b = quantize_dataset(H, g, np.random.default_rng(5)).rows
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        quantize_dataset(np.full((1, 8), 1.0), g, np.random.default_rng(0))


def test_quantized_sum_deviation_within_eta():
    d, q, eta = 8, 200, 0.125
    g = QuantGrid(eta)
    H = random_hashes(q, d, 3)
    rng = np.random.default_rng(4)
    ok = 0
    for _ in range(200):
        dq = quantize_dataset(H, g, rng)
        dev = np.abs(math.sqrt(2 / d) * dq.col_sums() / q - H.sum(0) / q)
        ok += bool(np.all(dev <= eta))
    assert ok / 200 >= 1 - 2 * d * math.exp(-q / 4)


# ---------------------------------------------------------------- scores and steps


def test_score_uniform_and_oracle():
    g = QuantGrid(0.5)
    rows = np.random.default_rng(0).choice(g.points, size=(7, 3))
    dq = QuantizedDataset(rows)
    P = ProductDistribution.uniform(3, g)
    for i in range(3):
        assert score(P, dq, i, g) == pytest.approx(abs(rows[:, i].sum()), abs=1e-12)
    assert score(P, QuantizedDataset(np.zeros((4, 3))), 0, g) == pytest.approx(0.0, abs=1e-12)
    P = ProductDistribution(np.random.default_rng(1).dirichlet(np.ones(5), size=3))
    for i in range(3):
        direct = abs(7 * sum(s * p for s, p in zip(g.points, P.marginals[i])) - sum(rows[:, i]))
        assert score(P, dq, i, g) == pytest.approx(direct, abs=1e-12)
    np.testing.assert_allclose(scores(P, dq, g), [score(P, dq, i, g) for i in range(3)], atol=1e-12)
    assert P.marginals.size == 3 * len(g)


def test_select_coordinate_distribution():
    rng = np.random.default_rng(0)
    eps = 0.8
    draws = np.array([select_coordinate([0.0, math.log(3) / eps], eps, rng) for _ in range(100_000)])
    assert abs(np.mean(draws == 1) - 0.75) < 0.01
    draws = np.array([select_coordinate([5.0, 1.0, 2.0, 9.0], 0.0, rng) for _ in range(100_000)])
    counts = np.bincount(draws, minlength=4)
    chi2 = ((counts - 25_000) ** 2 / 25_000).sum()
    assert chi2 < 16.27  # 3 dof, p = 0.001


def test_update_with_zero_exponent_is_identity():
    g = QuantGrid(0.5)
    row = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    np.testing.assert_allclose(update_marginal(row, g, 3.0, 3.0, 10), row, atol=1e-15)


def test_mw_step_touches_one_marginal():
    g = QuantGrid(0.25)
    rng = np.random.default_rng(3)
    dq = QuantizedDataset(rng.choice(g.points, size=(20, 6)))
    P = ProductDistribution.uniform(6, g)
    for _ in range(10):
        new, i, _ = mw_step(P, dq, 0.5, rng, g)
        others = [j for j in range(6) if j != i]
        np.testing.assert_array_equal(new.marginals[others], P.marginals[others])
        new.validate()
        P = new


# ---------------------------------------------------------------- h2


def test_h2_events_and_bounds():
    H = random_hashes(50, 8, 0)
    res = h2(H, ReleaseParams(0.3, 17, 0.125), rng=np.random.default_rng(0))
    assert len(res.events) == 34 and all(e.epsilon == 0.3 for e in res.events)
    assert np.all(np.abs(res.vector) <= math.sqrt(2 / 8) + 1e-15)
    again = h2(H, ReleaseParams(0.3, 17, 0.125), rng=np.random.default_rng(0))
    np.testing.assert_array_equal(res.vector, again.vector)
    assert h2_noiseless(H, ReleaseParams(0.3, 17, 0.125)).events == []


def test_h2_rejects_bad_input():
    with pytest.raises(ValueError):
        h2(np.zeros((0, 4)), ReleaseParams(1.0, 3, 0.5))
    with pytest.raises(ValueError):
        ReleaseParams(0.0, 3, 0.5)
    with pytest.raises(ValueError):
        h2(np.zeros((2, 4)), ReleaseParams(1.0, 3, 0.5), init=np.ones((3, 5)))


def test_h2_warm_start_uses_given_marginals():
    H = random_hashes(40, 4, 2)
    g = QuantGrid(0.25)
    first = h2(H, ReleaseParams(1.0, 30, 0.25), rng=np.random.default_rng(1))
    warm = h2(H, ReleaseParams(1.0, 1, 0.25), rng=np.random.default_rng(2), init=first.marginals)
    cold = h2(H, ReleaseParams(1.0, 1, 0.25), rng=np.random.default_rng(2))
    assert not np.allclose(warm.vector, cold.vector)
    assert first.marginals.shape == (4, len(g))


def test_h2_noise_free_limit():
    d, q = 8, 2000
    eta = 1 / d
    H = random_hashes(q, d, 7)
    res = h2_noiseless(H, ReleaseParams(1.0, d * d, eta), rng=np.random.default_rng(0))
    err = np.max(np.abs(res.vector - H.mean(0)))
    bound = 2 * math.sqrt(2 * math.log(2 / eta) / d ** 2) + 4 / d + 2 * d * math.exp(-q / 4) + eta
    assert err <= bound


def test_error_bound_value():
    assert h2_error_bound(8, 500, 1 / 8, 1.0) == pytest.approx(
        2 * math.sqrt(2 * math.log(16) / 64) + 11 * math.sqrt(2) * math.log(8) / (500 * math.sqrt(8))
        + 0.5 + 16 * math.exp(-125) + 0.125)
