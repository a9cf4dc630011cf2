import math

import numpy as np
import pytest

from dpsummary.auction import (AuctionParams, AuctionState, Bid, choose_winner, expected_access_bound,
                               expected_requests, rank_bids, receive, request_probability, run_round,
                               select_requests)


def fresh_bids(K, rnd, rng):
    return [Bid(k, float(v), rnd) for k, v in enumerate(rng.standard_normal(K))]


def test_params_validation():
    with pytest.raises(ValueError):
        AuctionParams(0.0, 1)
    with pytest.raises(ValueError):
        AuctionParams(0.5, 0)


def test_rank_ties_by_owner_then_point():
    bids = [Bid(2, 1.0, 0), Bid(1, 1.0, 5), Bid(1, 1.0, 3), Bid(0, 0.5, 0)]
    assert [b.key for b in rank_bids(bids)] == [(1, 3), (1, 5), (2, 0), (0, 0)]


def test_request_rate_matches_geometric_sum():
    K, eps = 10, 0.5
    params = AuctionParams(eps, 10 ** 6)
    state = AuctionState()
    rng = np.random.default_rng(0)
    counts, top = [], 0
    for rnd in range(10_000):
        bids = fresh_bids(K, rnd, rng)
        ranked, requested, _ = select_requests(bids, params, state, rng)
        counts.append(len(requested))
        top += ranked[0] in requested
    assert abs(np.mean(counts) - expected_requests(K, eps)) <= 0.05
    assert expected_requests(10, 0.5) == pytest.approx(sum(math.exp(-0.5 * i) for i in range(10)))
    assert expected_requests(10, 0.5) == pytest.approx(2.5244, abs=1e-4)
    assert top == 10_000


def test_single_owner_always_wins():
    params = AuctionParams(0.3, 1)
    state = AuctionState()
    rng = np.random.default_rng(1)
    for rnd in range(20):
        res = run_round([Bid(7, 0.1, rnd)], params, state, rng)
        assert res.requested == [Bid(7, 0.1, rnd)] and res.winner.key == (7, rnd)


def test_tau_rule_forces_request():
    params = AuctionParams(50.0, 3)  # huge eps: ranks below 1 practically never requested
    state = AuctionState()
    rng = np.random.default_rng(2)
    low = Bid(1, -1.0, 0)
    forced_at = None
    for rnd in range(5):
        _, requested, forced = select_requests([Bid(0, 1.0, rnd), low], params, state, rng)
        for b in requested:
            receive(state, b)
        if low in forced:
            forced_at = rnd + 1
            break
    assert forced_at == 3
    assert state.choice_counts[low.key] == 3


def test_re_requesting_a_sent_point_is_an_error():
    state = AuctionState()
    receive(state, Bid(0, 1.0, 0))
    with pytest.raises(ValueError):
        select_requests([Bid(0, 1.0, 0)], AuctionParams(1.0, 1), state, np.random.default_rng(0))


def test_recount_flag_leaves_choice_counts():
    state = AuctionState()
    bids = [Bid(0, 1.0, 0), Bid(1, 0.5, 0)]
    select_requests(bids, AuctionParams(1.0, 5), state, np.random.default_rng(0))
    select_requests(bids, AuctionParams(1.0, 5), state, np.random.default_rng(0), count_choices=False)
    assert state.choice_counts[(0, 0)] == 1 and state.rounds == 1


def test_choose_winner_pool_maximum_and_rescoring():
    state = AuctionState()
    for b in (Bid(0, 0.2, 0), Bid(1, 0.9, 0), Bid(2, 0.5, 0)):
        receive(state, b)
    assert choose_winner(state).key == (1, 0)
    # re-scoring can reorder the remaining pool
    w = choose_winner(state, lambda b: -b.value)
    assert w.key == (0, 0) and w.value == -0.2
    assert choose_winner(state).key == (2, 0)
    assert choose_winner(state) is None
    assert state.accessed_total == 3


def test_access_bound_formula():
    assert expected_access_bound(100, 8, AuctionParams(0.25, 4)) == pytest.approx(600.0)
    assert expected_access_bound(10, 5, AuctionParams(0.5, 5)) == pytest.approx(10 * (1 + 2))
    assert request_probability(1, 0.7) == 1.0
    assert request_probability(3, 0.5) == pytest.approx(math.exp(-1.0))
