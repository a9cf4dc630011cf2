"""Non-private reference algorithms: greedy, uniform sampling, brute force."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _numeric
from .data import DataError, Dataset
from .kernel import ObjectiveState, objective_j
from .protocol import bid_values, exact_mean
from .rff import hash_dataset

MAX_SUBSETS = 10 ** 6


@dataclass
class GreedyResult:
    summary: Dataset
    selected: list  # (owner_id, point_id) in selection order
    gains: list
    status: str


def _candidates(owners):
    """Stack owner points in owner order; returns (points, keys)."""
    keys = [(o.owner_id, i) for o in owners for i in range(len(o.dataset))]
    dims = {o.dataset.dim for o in owners}
    if len(dims) != 1:
        raise DataError(f"owners disagree on dimension: {sorted(dims)}")
    dim = dims.pop()
    pts = np.vstack([o.dataset.points for o in owners]) if keys else np.zeros((0, dim))
    return pts, keys, dim


def _argmax_first(values, taken):
    vals = np.where(taken, -np.inf, values)
    return int(np.argmax(vals))


def greedy_nonprivate(owners, validation, p, kp, seed_set=None):
    """p steps of exact marginal-gain maximization over every remaining point.

    Ties go to the earliest candidate in owner order.  The seed set (if any)
    is part of the working summary but not of the returned one.
    """
    pts, keys, dim = _candidates(owners)
    state = ObjectiveState(validation, kp, None if seed_set is None else seed_set.points)
    a = state.validation_sums(pts)
    b = state.summary_sums(pts)
    taken = np.zeros(len(keys), dtype=bool)
    chosen, gains = [], []
    for _ in range(min(p, len(keys))):
        g = state.gains(pts, a=a, b=b)
        j = _argmax_first(g, taken)
        gains.append(float(g[j]))
        x = pts[j]
        b = b + _numeric.rbf_rowsum(pts, x.reshape(1, -1), kp.gamma)
        state.add(x, a=a[j])
        taken[j] = True
        chosen.append(j)
    status = "complete" if len(chosen) == p else "exhausted"
    return GreedyResult(Dataset(pts[chosen].reshape(-1, dim), dim), [keys[j] for j in chosen],
                        gains, status)


def greedy_hashed(owners, validation, p, basis, seed_set=None, bid_form="derived"):
    """Greedy on bid values computed from exact mean hashes.

    This mirrors the protocol with noise disabled: the same bid function and
    the same (value, owner, point) tie-breaking.
    """
    pts, keys, dim = _candidates(owners)
    H = np.vstack([hash_dataset(basis, o.dataset) for o in owners]) if keys else np.zeros((0, basis.d))
    g_tilde = exact_mean(hash_dataset(basis, validation), basis.d)
    Hs = hash_dataset(basis, seed_set) if seed_set is not None else np.zeros((0, basis.d))
    taken = np.zeros(len(keys), dtype=bool)
    chosen, gains = [], []
    for ell in range(1, min(p, len(keys)) + 1):
        q = Hs.shape[0]
        g_ell = exact_mean(Hs, basis.d)
        vals = bid_values(H, g_ell, g_tilde, ell, q, bid_form)
        j = _argmax_first(vals, taken)
        gains.append(float(vals[j]))
        taken[j] = True
        chosen.append(j)
        Hs = np.vstack([Hs, H[j:j + 1]])
    status = "complete" if len(chosen) == p else "exhausted"
    return GreedyResult(Dataset(pts[chosen].reshape(-1, dim), dim), [keys[j] for j in chosen],
                        gains, status)


def uniform_sampling(owners, p, rng):
    """p/K points per owner without replacement, remainder round-robin.

    Owners too small for their share give what they have and the shortfall
    moves round-robin to owners with points left.
    """
    K = len(owners)
    if K == 0:
        raise DataError("need at least one owner")
    sizes = [len(o.dataset) for o in owners]
    if sum(sizes) < p:
        raise DataError(f"owners hold {sum(sizes)} points, fewer than p={p}")
    quota = [min(p // K, s) for s in sizes]
    k = 0
    while sum(quota) < p:
        if quota[k % K] < sizes[k % K]:
            quota[k % K] += 1
        k += 1
    rows = []
    for o, n in zip(owners, quota):
        idx = np.sort(rng.choice(len(o.dataset), size=n, replace=False))
        rows.append(o.dataset.points[idx])
    dim = owners[0].dataset.dim
    return Dataset(np.vstack(rows).reshape(-1, dim), dim)


def brute_force_optimal(points, validation, p, kp, seed_set=None):
    """Exhaustive maximization of the objective over p-subsets.

    With a seed set, subsets are scored as seed + subset.  Returns the best
    subset (first in lexicographic index order on ties) and its value.
    """
    pts = points.points if isinstance(points, Dataset) else np.asarray(points, dtype=np.float64)
    N = pts.shape[0]
    if not 1 <= p <= N:
        raise ValueError(f"need 1 <= p <= N, got p={p}, N={N}")
    if math.comb(N, p) > MAX_SUBSETS:
        raise ValueError(f"C({N},{p}) exceeds {MAX_SUBSETS} subsets")
    seed = np.zeros((0, pts.shape[1])) if seed_set is None else np.asarray(
        seed_set.points if isinstance(seed_set, Dataset) else seed_set)
    best, best_val = None, -np.inf
    for combo in itertools.combinations(range(N), p):
        val = objective_j(validation, np.vstack([seed, pts[list(combo)]]), kp)
        if val > best_val:
            best, best_val = combo, val
    return Dataset(pts[list(best)]), float(best_val)
