"""Private auction for winner notification.

Owners' best bids are ranked; the rank-i bid (1-based) is requested
independently with probability exp(-eps_auc * (i - 1)), and any point that
has been its owner's best tau times is requested unconditionally.  The
winner is the best point in the pool of everything obtained so far that is
not yet in the summary.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional


@dataclass(frozen=True)
class Bid:
    owner_id: int
    value: float
    point_id: int

    @property
    def key(self):
        return (self.owner_id, self.point_id)


@dataclass(frozen=True)
class AuctionParams:
    eps_auc: float
    tau: int

    def __post_init__(self):
        if not self.eps_auc > 0:
            raise ValueError(f"eps_auc must be positive, got {self.eps_auc}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")


@dataclass
class AuctionState:
    choice_counts: Counter = field(default_factory=Counter)
    sent_registry: set = field(default_factory=set)
    # (owner_id, point_id) -> Bid at the time the point was obtained
    pool: dict = field(default_factory=dict)
    accessed_total: int = 0
    rounds: int = 0


@dataclass
class RoundResult:
    ranked: list
    requested: list
    forced: list
    winner: Optional[Bid]


def rank_bids(bids):
    """Decreasing value; ties by owner id then point id."""
    return sorted(bids, key=lambda b: (-b.value, b.owner_id, b.point_id))


def request_probability(rank, eps_auc):
    return math.exp(-eps_auc * (rank - 1))


def expected_requests(K, eps_auc):
    """Mean number of rank-based requests per round with K bidders."""
    return (1.0 - math.exp(-K * eps_auc)) / (1.0 - math.exp(-eps_auc))


def expected_access_bound(p, K, params):
    return p * (K / params.tau + 1.0 / params.eps_auc)


def select_requests(bids, params, state, rng, count_choices=True):
    """Decide which bids to request this round and update choice counts.

    Returns (ranked, requested, forced); ``forced`` is the subset requested
    by the tau rule.  Does not touch the pool.  ``count_choices=False`` is
    for re-running a round after a rejected delivery, so that the same bids
    are not counted twice.
    """
    for b in bids:
        if b.key in state.sent_registry:
            raise ValueError(f"bid references already transmitted point {b.key}")
        if count_choices:
            state.choice_counts[b.key] += 1
    ranked = rank_bids(bids)
    u = rng.random(len(ranked))
    requested, forced = [], []
    for i, b in enumerate(ranked, start=1):
        by_rank = i == 1 or u[i - 1] < request_probability(i, params.eps_auc)
        by_tau = state.choice_counts[b.key] >= params.tau
        if by_rank or by_tau:
            requested.append(b)
            if by_tau and not by_rank:
                forced.append(b)
    if count_choices:
        state.rounds += 1
    return ranked, requested, forced


def receive(state, bid, count=True):
    """Record a transmitted point: pool, registry and (optionally) access counter."""
    state.sent_registry.add(bid.key)
    state.pool[bid.key] = bid
    if count:
        state.accessed_total += 1


def choose_winner(state, value_of: Optional[Callable] = None):
    """Pop and return the best pool member, or None if the pool is empty.

    ``value_of(bid)`` re-scores a pool member under the current round's
    broadcasts; by default the value stored at receipt is used.
    """
    if not state.pool:
        return None
    best_key, best_val = None, None
    for key, bid in state.pool.items():
        val = bid.value if value_of is None else value_of(bid)
        rank_key = (-val, key[0], key[1])
        if best_key is None or rank_key < best_key:
            best_key, best_val = rank_key, val
    owner_id, point_id = best_key[1], best_key[2]
    state.pool.pop((owner_id, point_id))
    return Bid(owner_id, best_val, point_id)


def run_round(bids, params, state, rng, value_of=None):
    """One auction round with honest delivery of every requested point."""
    if bids:
        ranked, requested, forced = select_requests(bids, params, state, rng)
        for b in requested:
            receive(state, b)
    else:
        ranked, requested, forced = [], [], []
    winner = choose_winner(state, value_of)
    return RoundResult(ranked, requested, forced, winner)
