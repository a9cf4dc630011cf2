"""Instance generators and brute-force checks for the greedy guarantee.

The objective is monotone submodular only when the kernel matrix of the
ground set is close to diagonal.  Because J is negative on small summaries,
the guarantee is checked on the gain over a fixed non-empty seed summary:
f(S) = J(S0 + S) - J(S0), which is zero at the empty set.
"""

import math
from dataclasses import dataclass

import numpy as np

from .baselines import brute_force_optimal, greedy_nonprivate
from .data import Dataset, OwnerSplit
from .kernel import KernelParams, objective_j, rbf_matrix, submod_condition

GREEDY_FACTOR = 1.0 - 1.0 / math.e


@dataclass
class RegimeInstance:
    ground: Dataset
    seed: Dataset
    validation: Dataset
    kp: KernelParams


def regime_instance(N, rng, seed_size=2, m=6, dim=4, gamma=1.0, max_tries=500):
    """Ground, seed and validation points meeting the kernel condition jointly.

    The condition is imposed on the kernel matrix of every point in the
    system (ground set, seed and validation), so all cross affinities are
    tiny and J is monotone submodular on non-empty summaries.
    """
    kp = KernelParams(gamma)
    total = N + seed_size + m
    # squared distance at which k drops to the threshold
    need = math.log(total ** 3 + 3 * total ** 2 + total) / gamma
    spread = math.sqrt(need)
    for _ in range(max_tries):
        pts = spread * rng.standard_normal((total, dim))
        if submod_condition(rbf_matrix(pts, pts, kp)):
            break
    else:
        raise RuntimeError("could not draw points meeting the kernel condition")
    return RegimeInstance(Dataset(pts[seed_size:seed_size + N]), Dataset(pts[:seed_size]),
                          Dataset(pts[seed_size + N:]), kp)


def seeded_gain(inst, summary_pts):
    """f(S) = J(S0 + S) - J(S0)."""
    base = objective_j(inst.validation, inst.seed, inst.kp)
    if len(summary_pts) == 0:
        return 0.0
    return objective_j(inst.validation, np.vstack([inst.seed.points, summary_pts]), inst.kp) - base


def greedy_vs_optimal(inst, p):
    """(f(greedy), f(OPT), J(OPT) without the seed) for one instance."""
    owners = [OwnerSplit(1, inst.ground)]
    g = greedy_nonprivate(owners, inst.validation, p, inst.kp, inst.seed)
    _, j_opt = brute_force_optimal(inst.ground, inst.validation, p, inst.kp, seed_set=inst.seed)
    base = objective_j(inst.validation, inst.seed, inst.kp)
    _, j_opt_plain = brute_force_optimal(inst.ground, inst.validation, p, inst.kp)
    return seeded_gain(inst, g.summary.points), j_opt - base, j_opt_plain


def subset_values(ground, validation, kp):
    """J for every non-empty subset of the ground set, indexed by bitmask."""
    G = ground.points if isinstance(ground, Dataset) else np.asarray(ground)
    V = validation.points if isinstance(validation, Dataset) else np.asarray(validation)
    N = G.shape[0]
    Kg = rbf_matrix(G, G, kp)
    a = rbf_matrix(G, V, kp).sum(axis=1)
    m = V.shape[0]
    masks = np.arange(1 << N)
    member = ((masks[:, None] >> np.arange(N)) & 1).astype(np.float64)  # (2^N, N)
    size = member.sum(axis=1)
    A = member @ a
    B = np.einsum("si,ij,sj->s", member, Kg, member)
    with np.errstate(divide="ignore", invalid="ignore"):
        J = 2.0 * A / (m * size) - B / (size * size)
    J[0] = np.nan
    return J


def submodularity_violations(ground, validation, kp, tol=1e-9):
    """Exhaustive check over non-empty S strictly inside T.

    Returns (monotonicity violations, diminishing-returns violations,
    number of (S, T) pairs).  Monotone: J(T) >= J(S) - tol.  Diminishing
    returns: J(S+x) - J(S) >= J(T+x) - J(T) - tol for every x outside T.
    """
    J = subset_values(ground, validation, kp)
    n_pts = len(ground)
    full = (1 << n_pts) - 1
    masks = np.arange(1, 1 << n_pts)
    mono = dr = pairs = 0
    for T in masks:
        # proper non-empty submasks of T
        S = masks[((masks & ~T) == 0) & (masks != T)]
        if S.size == 0:
            continue
        pairs += S.size
        mono += int(np.sum(J[T] < J[S] - tol))
        outside = full & ~T
        for x in range(n_pts):
            bit = 1 << x
            if outside & bit:
                gain_s = J[S | bit] - J[S]
                gain_t = J[T | bit] - J[T]
                dr += int(np.sum(gain_s < gain_t - tol))
    return mono, dr, pairs
