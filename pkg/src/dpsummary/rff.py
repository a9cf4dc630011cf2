"""Shared random Fourier feature hash for the RBF kernel.

The basis is drawn once per protocol run from numpy's PCG64 generator
(``np.random.default_rng(seed)``): first the (d, n) frequency matrix as
``sqrt(2*gamma) * standard_normal``, then d offsets ``uniform(0, 2*pi)``.
PCG64 and its ziggurat normal sampler are platform independent, so curator
and owners rebuild bit-identical bases from (seed, gamma, d, n).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _numeric
from .data import DataError, Dataset


@dataclass(frozen=True)
class RffBasis:
    omegas: np.ndarray
    offsets: np.ndarray
    gamma: float
    seed: int
    d: int = field(init=False)
    n: int = field(init=False)

    def __post_init__(self):
        om = np.ascontiguousarray(self.omegas, dtype=np.float64)
        off = np.ascontiguousarray(self.offsets, dtype=np.float64)
        if om.ndim != 2 or off.shape != (om.shape[0],):
            raise ValueError("omegas must be (d, n) and offsets (d,)")
        om.setflags(write=False)
        off.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "d", om.shape[0])
        object.__setattr__(self, "n", om.shape[1])

    @property
    def bound(self):
        return math.sqrt(2.0 / self.d)

    def to_json(self):
        return json.dumps({"seed": self.seed, "gamma": self.gamma, "d": self.d, "n": self.n},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return sample_basis(doc["gamma"], doc["d"], doc["n"], doc["seed"])


def sample_basis(gamma, d, n, seed):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if int(d) != d or d < 1 or int(n) != n or n < 1:
        raise ValueError(f"d and n must be positive integers, got d={d}, n={n}")
    d, n = int(d), int(n)
    rng = np.random.default_rng(seed)
    omegas = math.sqrt(2.0 * gamma) * rng.standard_normal((d, n))
    offsets = rng.uniform(0.0, 2.0 * math.pi, size=d)
    return RffBasis(omegas, offsets, float(gamma), int(seed))


def hash_points(basis, X):
    """Hash every row of an (N, n) array; returns an (N, d) array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != basis.n:
        raise DataError(f"point dimension {X.shape[1]} does not match basis dimension {basis.n}")
    if X.shape[0] == 0:
        return np.zeros((0, basis.d))
    H = _numeric.rff_project(X, basis.omegas, basis.offsets, basis.bound)
    # cos is within [-1, 1] but the scaled product may round one ulp past the bound
    np.clip(H, -basis.bound, basis.bound, out=H)
    return H


def hash_point(basis, x):
    return hash_points(basis, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def hash_dataset(basis, ds):
    """Pointwise hash of a Dataset, in row order."""
    pts = ds.points if isinstance(ds, Dataset) else ds
    return hash_points(basis, pts)
