"""Datasets, CSV ingestion, owner splits and synthetic covariate-shift instances."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of points, stored as an (m, n) float64 array.

    Point identity is the row index; equal-valued rows are distinct points.
    """

    points: np.ndarray
    dim: int = field(default=-1)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(0, max(self.dim, 0)) if pts.size == 0 else pts.reshape(1, -1)
        if pts.ndim != 2:
            raise DataError(f"points must be a 2-d array, got shape {pts.shape}")
        dim = pts.shape[1] if self.dim < 0 else self.dim
        if pts.shape[1] != dim:
            raise DataError(f"points have dimension {pts.shape[1]}, declared {dim}")
        if not np.all(np.isfinite(pts)):
            raise DataError("dataset contains non-finite values")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dim", int(dim))

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, idx):
        return self.points[idx]

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), dim)

    def subset(self, indices):
        return Dataset(self.points[np.asarray(indices, dtype=np.int64)], self.dim)

    def concat(self, other):
        if other.dim != self.dim:
            raise DataError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return Dataset(np.vstack([self.points, other.points]), self.dim)

    def require_nonempty(self, what="dataset"):
        if len(self) == 0:
            raise DataError(f"{what} is empty")


@dataclass(frozen=True)
class OwnerSplit:
    owner_id: int
    dataset: Dataset
    # row indices into the source dataset, empty for generated data
    source_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def load_csv(path, has_header=False):
    """Read a comma-separated file of reals into a Dataset.

    Raises DataError naming the 1-based data row and column on any bad cell.
    """
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if has_header:
            next(reader, None)
        width = None
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}: row {rownum} has {len(row)} columns, expected {width}")
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: cannot parse {cell!r} at row {rownum}, column {col}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: non-finite value at row {rownum}, column {col}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.float64))


def split_owners(d, spec, rng_seed):
    """Partition ``d`` among owners by fractions or explicit index lists.

    Fractions are applied to a seeded permutation: owner i receives the next
    ``round(f_i * len(d))`` rows.  Index lists are used verbatim and must be
    pairwise disjoint.
    """
    if len(spec) == 0:
        raise DataError("need at least one owner")
    m = len(d)
    if all(np.isscalar(s) for s in spec):
        fracs = np.asarray(spec, dtype=np.float64)
        if np.any(fracs < 0):
            raise DataError("fractions must be non-negative")
        if fracs.sum() > 1.0 + 1e-9:
            raise DataError(f"fractions sum to {fracs.sum():.6g} > 1")
        perm = np.random.default_rng(rng_seed).permutation(m)
        splits = []
        start = 0
        for k, f in enumerate(fracs, start=1):
            count = min(int(round(f * m)), m - start)
            idx = np.sort(perm[start:start + count])
            start += count
            splits.append(OwnerSplit(k, d.subset(idx), idx))
        return splits
    seen = set()
    splits = []
    for k, idx in enumerate(spec, start=1):
        idx = np.asarray(idx, dtype=np.int64)
        if np.any((idx < 0) | (idx >= m)):
            raise DataError(f"owner {k}: index out of range")
        overlap = seen.intersection(idx.tolist())
        if overlap or len(set(idx.tolist())) != len(idx):
            raise DataError(f"owner {k}: indices overlap another owner or repeat")
        seen.update(idx.tolist())
        splits.append(OwnerSplit(k, d.subset(idx), idx))
    return splits


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian source; ``cov`` is a scalar, a variance vector or a full matrix."""

    size: int
    mean: Sequence[float]
    cov: object = 1.0

    def sample(self, n, rng):
        mean = np.broadcast_to(np.asarray(self.mean, dtype=np.float64), (n,))
        if self.size < 0:
            raise DataError("size must be non-negative")
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.ndim <= 1:
            var = np.broadcast_to(cov, (n,))
            if np.any(var <= 0):
                raise DataError("variances must be positive")
            z = rng.standard_normal((self.size, n))
            return Dataset(mean + z * np.sqrt(var), n)
        if cov.shape != (n, n):
            raise DataError(f"covariance shape {cov.shape} does not match dimension {n}")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DataError("covariance is not positive definite") from None
        z = rng.standard_normal((self.size, n))
        return Dataset(mean + z @ chol.T, n)


def synth_shift(n, owners, validation, rng_seed):
    """Draw owner datasets and a validation set from independent Gaussians.

    ``owners`` is a list of GaussianSpec (one per owner), ``validation`` a
    single GaussianSpec.  Sampling order is owners 1..K then validation, all
    from one PCG64 stream seeded by ``rng_seed``.
    """
    rng = np.random.default_rng(rng_seed)
    splits = [OwnerSplit(k, spec.sample(n, rng)) for k, spec in enumerate(owners, start=1)]
    return splits, validation.sample(n, rng)


def two_gaussian_shift(n=2, sizes=(100, 100), shift=3.0, validation_size=100, rng_seed=0):
    """Owners alternate between N(-shift, I) and N(+shift, I); validation at +shift."""
    specs = [GaussianSpec(s, [(-shift if k % 2 == 0 else shift)] * n) for k, s in enumerate(sizes)]
    return synth_shift(n, specs, GaussianSpec(validation_size, [shift] * n), rng_seed)


def standardize(owners, validation, *extra):
    """Z-score every dataset using validation statistics only."""
    mu = validation.points.mean(axis=0)
    sd = validation.points.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)

    def tx(ds):
        return Dataset((ds.points - mu) / sd, ds.dim)

    new_owners = [OwnerSplit(o.owner_id, tx(o.dataset), o.source_index) for o in owners]
    return (new_owners, tx(validation), *[tx(e) for e in extra])
