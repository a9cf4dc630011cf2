"""Private release of the mean hash vector: stochastic quantization + MWEM.

The synthetic distribution over S^d is kept as d independent marginals
(multiplicative updates touch one coordinate, so the product form is
preserved), giving d*|S| state instead of |S|^d.

Random draws happen in a fixed order from one generator: q*d quantization
uniforms, then T selection uniforms, then T Laplace uniforms.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _numeric
from ._numeric import _categorical_from_uniform, _laplace_from_uniform
from .privacy import PrivacyEvent


@dataclass(frozen=True)
class QuantGrid:
    eta: float
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        cells = 2.0 / self.eta
        n = int(round(cells))
        if n < 1 or abs(cells - n) > 1e-9:
            raise ValueError(f"2/eta must be an integer, got {cells}")
        # (2j - n)/n keeps the grid exactly symmetric about zero
        pts = (2.0 * np.arange(n + 1) - n) / n
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def cells(self):
        return len(self.points) - 1

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class QuantizedDataset:
    rows: np.ndarray  # (q, d), entries in the grid

    @property
    def q(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    def col_sums(self):
        return self.rows.sum(axis=0)


@dataclass
class ProductDistribution:
    marginals: np.ndarray  # (d, |S|)

    @classmethod
    def uniform(cls, d, grid):
        return cls(np.full((d, len(grid)), 1.0 / len(grid)))

    def copy(self):
        return ProductDistribution(self.marginals.copy())

    def w(self, q, grid):
        """q * E[s_i] for every coordinate i."""
        return q * (self.marginals @ grid.points)

    def validate(self, tol=1e-9):
        if np.any(self.marginals < 0):
            raise ValueError("negative probability")
        if np.any(np.abs(self.marginals.sum(axis=1) - 1.0) > tol):
            raise ValueError("marginal does not sum to one")


@dataclass(frozen=True)
class ReleaseParams:
    epsilon: float
    T: int
    eta: float
    rng_seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")


@dataclass
class H2Result:
    vector: np.ndarray
    marginals: np.ndarray
    chosen: np.ndarray
    noisy: np.ndarray
    events: list


def _grid_indices(x, grid, tol=1e-12):
    """Lower grid index k and interpolation weight toward k+1."""
    t = (np.asarray(x, dtype=np.float64) + 1.0) / grid.eta
    k = np.floor(t)
    frac = t - k
    snap_up = frac > 1.0 - tol
    k = np.where(snap_up, k + 1, k)
    frac = np.where(snap_up | (frac < tol), 0.0, frac)
    k = k.astype(np.int64)
    top = k >= grid.cells
    k = np.where(top, grid.cells - 1, k)
    frac = np.where(top, 1.0, frac)
    return k, frac


def quantize_scalar(x, grid, rng):
    """Unbiased stochastic rounding of ``x`` in [-1, 1] to a neighbouring grid point."""
    if not -1.0 <= x <= 1.0:
        raise ValueError(f"value {x} outside [-1, 1]")
    # scalar mirror of _grid_indices; plain floats keep per-call cost low
    t = (float(x) + 1.0) / grid.eta
    k = math.floor(t)
    frac = t - k
    if frac > 1.0 - 1e-12:
        k, frac = k + 1, 0.0
    elif frac < 1e-12:
        frac = 0.0
    if k >= grid.cells:
        k, frac = grid.cells - 1, 1.0
    if frac == 0.0:
        return float(grid.points[k])
    return float(grid.points[k + 1] if rng.random() < frac else grid.points[k])


def quantize_dataset(hashes, grid, rng, tol=1e-9):
    """Quantize sqrt(d/2) * v element-wise for every hash vector v."""
    H = np.asarray(hashes, dtype=np.float64)
    if H.ndim != 2:
        raise ValueError("hashes must be a (q, d) array")
    d = H.shape[1]
    X = math.sqrt(d / 2.0) * H
    if np.any(np.abs(X) > 1.0 + tol):
        raise ValueError("hash coordinate outside [-sqrt(2/d), sqrt(2/d)]")
    np.clip(X, -1.0, 1.0, out=X)
    k, frac = _grid_indices(X, grid)
    u = rng.random(X.shape)
    idx = k + (u < frac)
    return QuantizedDataset(grid.points[idx])


def score(dist, dq, i, grid):
    """|w(P, i) - w(D_Q, i)|."""
    w_p = dq.q * float(dist.marginals[i] @ grid.points)
    return abs(w_p - float(dq.rows[:, i].sum()))


def scores(dist, dq, grid):
    return np.abs(dist.w(dq.q, grid) - dq.col_sums())


def select_coordinate(score_vec, epsilon, rng):
    """Sample i with probability proportional to exp(epsilon * score_i)."""
    s = np.asarray(score_vec, dtype=np.float64)
    weights = np.exp(epsilon * (s - s.max()))
    return int(_categorical_from_uniform(weights, rng.random()))


def update_marginal(row, grid, mu, w_prev, q):
    with np.errstate(divide="ignore"):
        logw = np.log(row) + grid.points * ((mu - w_prev) / (2.0 * q))
    new = np.exp(logw - logw.max())
    return new / new.sum()


def mw_step(dist, dq, epsilon, rng, grid):
    """One selection + Laplace measurement + multiplicative update.

    Returns (new distribution, chosen coordinate, noisy measurement).  Only
    the chosen marginal changes; the rest are carried over unchanged.
    """
    sc = scores(dist, dq, grid)
    i = select_coordinate(sc, epsilon, rng)
    mu = float(dq.rows[:, i].sum()) + _laplace_from_uniform(rng.random(), 1.0 / epsilon)
    w_prev = dq.q * float(dist.marginals[i] @ grid.points)
    new = dist.copy()
    new.marginals[i] = update_marginal(dist.marginals[i], grid, mu, w_prev, dq.q)
    return new, i, mu


def _run(hashes, params, rng, init, noise_off):
    H = np.asarray(hashes, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] == 0:
        raise ValueError("h2 needs at least one hash vector")
    q, d = H.shape
    grid = QuantGrid(params.eta)
    rng = np.random.default_rng(params.rng_seed) if rng is None else rng
    dq = quantize_dataset(H, grid, rng)
    T = int(params.T)
    sel_u = rng.random(T)
    lap_u = rng.random(T)
    marg0 = ProductDistribution.uniform(d, grid).marginals if init is None else np.asarray(init)
    if marg0.shape != (d, len(grid)):
        raise ValueError(f"initial marginals must have shape {(d, len(grid))}")
    marg, w_avg, chosen, mus = _numeric.mwem(
        dq.col_sums(), q, grid.points, marg0, params.epsilon, sel_u, lap_u, noise_off)
    vec = math.sqrt(2.0 / d) * w_avg / q
    return vec, marg, chosen, mus


def h2(hashes, params, *, rng=None, init=None, events_per_iter=2, tag="h2-iter"):
    """Differentially private estimate of the mean of ``hashes``.

    Returns an H2Result whose ``events`` list holds the releases consumed:
    ``events_per_iter`` epsilon-DP events per iteration (coordinate
    selection and Laplace measurement).  ``init`` warm-starts the marginals.
    """
    vec, marg, chosen, mus = _run(hashes, params, rng, init, noise_off=False)
    events = [PrivacyEvent(params.epsilon, 0.0, tag)] * (events_per_iter * int(params.T))
    return H2Result(vec, marg, chosen, mus, events)


def h2_noiseless(hashes, params, *, rng=None, init=None):
    """Test hook: argmax selection and zero Laplace noise.  Not private."""
    vec, marg, chosen, mus = _run(hashes, params, rng, init, noise_off=True)
    return H2Result(vec, marg, chosen, mus, [])


def h2_error_bound(d, q, eta, epsilon):
    """Expected max-coordinate error bound for T = d^2 (natural logs)."""
    return (2.0 * math.sqrt(2.0 * math.log(2.0 / eta) / d ** 2)
            + 11.0 * math.sqrt(2.0) * math.log(d) / (q * epsilon * math.sqrt(d))
            + 4.0 / d
            + 2.0 * d * math.exp(-q / 4.0)
            + eta)
