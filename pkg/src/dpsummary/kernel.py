"""RBF kernel, sample MMD^2, the normalized objective J and its marginal gains.

J(S) = 2/(m|S|) * sum_{y in V, x in S} k(y, x) - 1/|S|^2 * sum_{x, x' in S} k(x, x')

with the convention J(empty) = 0.  Summaries are multisets indexed by
position, so duplicated points count twice.
"""

from dataclasses import dataclass

import numpy as np

from . import _numeric
from .data import DataError, Dataset


@dataclass(frozen=True)
class KernelParams:
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")


def _as_points(a):
    if isinstance(a, Dataset):
        return a.points
    pts = np.asarray(a, dtype=np.float64)
    return pts.reshape(1, -1) if pts.ndim == 1 else pts


def rbf(x, y, kp):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DataError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(np.exp(-kp.gamma * float(diff @ diff)))


def rbf_matrix(a, b, kp):
    """Dense kernel matrix between the rows of ``a`` and ``b``."""
    A, B = _as_points(a), _as_points(b)
    if A.shape[1] != B.shape[1]:
        raise DataError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-kp.gamma * sq)


def kernel_sum(a, b, kp):
    A, B = _as_points(a), _as_points(b)
    if A.shape[1] != B.shape[1]:
        raise DataError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return float(_numeric.rbf_rowsum(A, B, kp.gamma).sum())


def mmd_sq(a, b, kp, clamp=False):
    """Biased sample MMD^2 between two datasets.

    The raw value can dip a hair below zero from rounding; ``clamp=True``
    reports max(raw, 0).
    """
    A, B = _as_points(a), _as_points(b)
    if len(A) == 0 or len(B) == 0:
        raise DataError("mmd_sq needs two non-empty datasets")
    # evaluate in a canonical argument order so that swapping a and b
    # reproduces the same floating-point sum exactly
    if (len(B), B.tobytes()) < (len(A), A.tobytes()):
        A, B = B, A
    m1, m2 = len(A), len(B)
    val = (kernel_sum(A, A, kp) / (m1 * m1)
           - 2.0 * kernel_sum(A, B, kp) / (m1 * m2)
           + kernel_sum(B, B, kp) / (m2 * m2))
    return max(val, 0.0) if clamp else val


def objective_j(validation, summary, kp):
    V, S = _as_points(validation), _as_points(summary)
    if len(V) == 0:
        raise DataError("validation set is empty")
    if len(S) == 0:
        raise DataError("J is undefined for an empty summary")
    m, s = len(V), len(S)
    return 2.0 * kernel_sum(V, S, kp) / (m * s) - kernel_sum(S, S, kp) / (s * s)


class ObjectiveState:
    """Running sums for J over a growing summary.

    Holds A = sum_{V,S} k and B = sum_{S,S} k so that the gain of any
    candidate needs only its validation sum a(x) and its summary sum b(x).
    """

    def __init__(self, validation, kp, summary=None):
        self.V = _as_points(validation)
        if len(self.V) == 0:
            raise DataError("validation set is empty")
        self.kp = kp
        self.m = len(self.V)
        self.vv = kernel_sum(self.V, self.V, kp)
        self.points = np.zeros((0, self.V.shape[1]))
        self.A = 0.0
        self.B = 0.0
        if summary is not None:
            for x in _as_points(summary):
                self.add(x)

    @property
    def q(self):
        return len(self.points)

    @property
    def j(self):
        if self.q == 0:
            return 0.0
        return 2.0 * self.A / (self.m * self.q) - self.B / (self.q * self.q)

    @property
    def mmd_sq(self):
        if self.q == 0:
            raise DataError("summary is empty")
        return self.vv / (self.m * self.m) - self.j

    def validation_sums(self, cands):
        return _numeric.rbf_rowsum(_as_points(cands), self.V, self.kp.gamma)

    def summary_sums(self, cands):
        return _numeric.rbf_rowsum(_as_points(cands), self.points, self.kp.gamma)

    def gains(self, cands, a=None, b=None, self_k=1.0):
        """J(S + x) - J(S) for each row x of ``cands``.

        ``a``/``b`` may be supplied when the caller maintains them
        incrementally; ``self_k`` is k(x, x), which is 1 for the RBF kernel.
        """
        C = _as_points(cands)
        a = self.validation_sums(C) if a is None else np.asarray(a, dtype=np.float64)
        b = self.summary_sums(C) if b is None else np.asarray(b, dtype=np.float64)
        q, m = self.q, self.m
        new_j = 2.0 * (self.A + a) / (m * (q + 1)) - (self.B + 2.0 * b + self_k) / ((q + 1) ** 2)
        return new_j - self.j

    def add(self, x, a=None, b=None):
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        a = float(self.validation_sums(x)[0]) if a is None else float(a)
        b = float(self.summary_sums(x)[0]) if b is None else float(b)
        self.A += a
        self.B += 2.0 * b + 1.0
        self.points = np.vstack([self.points, x])


def marginal_gain(validation, summary, x, kp):
    """J(summary + {x}) - J(summary) via the incremental expansion."""
    state = ObjectiveState(validation, kp, summary)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != state.V.shape[1]:
        raise DataError(f"dimension mismatch: {x.shape[1]} vs {state.V.shape[1]}")
    return float(state.gains(x)[0])


def submod_threshold(N):
    return 1.0 / (N ** 3 + 3 * N ** 2 + N)


def submod_condition(kmatrix, atol=1e-12):
    """Diagonal-dominance condition under which J is monotone submodular.

    True iff the diagonal is constant k* and every off-diagonal entry is at
    most k* / (N^3 + 3N^2 + N).
    """
    K = np.asarray(kmatrix, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"kernel matrix must be square, got shape {K.shape}")
    if not np.allclose(K, K.T, rtol=0, atol=atol):
        raise ValueError("kernel matrix must be symmetric")
    N = K.shape[0]
    diag = np.diag(K)
    kstar = diag[0]
    if not np.allclose(diag, kstar, rtol=0, atol=atol):
        raise ValueError("kernel matrix diagonal must be constant")
    if N < 2:
        return True
    off = K[~np.eye(N, dtype=bool)]
    return bool(np.all(off <= kstar * submod_threshold(N)))
