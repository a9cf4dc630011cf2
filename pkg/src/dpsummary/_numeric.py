"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``DPSUMMARY_NUMBA=0`` to force the numpy implementations.  Both paths
consume identical pre-drawn uniforms, so a seeded run makes the same random
choices under either backend; floating-point results agree to ~1e-12 but are
only guaranteed bit-identical within one backend.

Every kernel here is row-independent: the value computed for one row never
depends on which other rows were passed in the same call.  The protocol
relies on this to reproduce greedy selections exactly.
"""

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None


def _env_enabled():
    flag = os.environ.get("DPSUMMARY_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


USE_NUMBA = NUMBA_AVAILABLE and _env_enabled()


def backend():
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# sampling helpers shared by both paths (scalar, trivially jit-able)


def _categorical_from_uniform(weights, u):
    total = 0.0
    for i in range(weights.shape[0]):
        total += weights[i]
    target = u * total
    acc = 0.0
    for i in range(weights.shape[0]):
        acc += weights[i]
        if acc > target:
            return i
    # u*total rounded up to the full sum; take the last non-zero weight
    for i in range(weights.shape[0] - 1, -1, -1):
        if weights[i] > 0.0:
            return i
    return weights.shape[0] - 1


def _laplace_from_uniform(u, scale):
    v = u - 0.5
    tail = 1.0 - 2.0 * abs(v)
    if tail < 1e-300:
        tail = 1e-300
    if v < 0.0:
        return scale * math.log(tail)
    return -scale * math.log(tail)


# ---------------------------------------------------------------------------
# MWEM over a product distribution


def _mwem_numpy(col_sums, q, grid, marginals, eps, sel_u, lap_u, noise_off):
    marg = marginals.copy()
    w_cur = q * (marg @ grid)
    w_acc = np.zeros_like(w_cur)
    T = sel_u.shape[0]
    chosen = np.empty(T, dtype=np.int64)
    mus = np.empty(T)
    scale = 0.0 if noise_off else 1.0 / eps
    for t in range(T):
        scores = np.abs(w_cur - col_sums)
        if noise_off:
            i = int(np.argmax(scores))
        else:
            weights = np.exp(eps * (scores - scores.max()))
            i = _categorical_from_uniform(weights, sel_u[t])
        mu = col_sums[i]
        if not noise_off:
            mu += _laplace_from_uniform(lap_u[t], scale)
        # normalize in log space: the largest exponent may sit on a cell
        # whose probability already underflowed to zero
        with np.errstate(divide="ignore"):
            logw = np.log(marg[i]) + grid * ((mu - w_cur[i]) / (2.0 * q))
        row = np.exp(logw - logw.max())
        row /= row.sum()
        marg[i] = row
        w_cur[i] = q * float(row @ grid)
        w_acc += w_cur
        chosen[t] = i
        mus[t] = mu
    return marg, w_acc / T, chosen, mus


def _mwem_loop(col_sums, q, grid, marginals, eps, sel_u, lap_u, noise_off):
    d, S = marginals.shape
    marg = marginals.copy()
    w_cur = np.empty(d)
    for j in range(d):
        acc = 0.0
        for s in range(S):
            acc += marg[j, s] * grid[s]
        w_cur[j] = q * acc
    w_acc = np.zeros(d)
    T = sel_u.shape[0]
    chosen = np.empty(T, dtype=np.int64)
    mus = np.empty(T)
    scores = np.empty(d)
    weights = np.empty(d)
    expo = np.empty(S)
    scale = 0.0 if noise_off else 1.0 / eps
    for t in range(T):
        top = -1.0
        best = 0
        for j in range(d):
            scores[j] = abs(w_cur[j] - col_sums[j])
            if scores[j] > top:
                top = scores[j]
                best = j
        if noise_off:
            i = best
        else:
            for j in range(d):
                weights[j] = math.exp(eps * (scores[j] - top))
            i = _categorical_from_uniform(weights, sel_u[t])
        mu = col_sums[i]
        if not noise_off:
            mu += _laplace_from_uniform(lap_u[t], scale)
        step = (mu - w_cur[i]) / (2.0 * q)
        emax = -np.inf
        for s in range(S):
            if marg[i, s] > 0.0:
                expo[s] = math.log(marg[i, s]) + grid[s] * step
            else:
                expo[s] = -np.inf
            if expo[s] > emax:
                emax = expo[s]
        norm = 0.0
        for s in range(S):
            expo[s] = math.exp(expo[s] - emax)
            norm += expo[s]
        acc = 0.0
        for s in range(S):
            marg[i, s] = expo[s] / norm
            acc += marg[i, s] * grid[s]
        w_cur[i] = q * acc
        for j in range(d):
            w_acc[j] += w_cur[j]
        chosen[t] = i
        mus[t] = mu
    for j in range(d):
        w_acc[j] /= T
    return marg, w_acc, chosen, mus


# ---------------------------------------------------------------------------
# random Fourier projection


def _rff_numpy(X, omegas, offsets, scale, chunk=256):
    out = np.empty((X.shape[0], omegas.shape[0]))
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk]
        # reduction over the last (feature) axis only: per-row result is
        # independent of the block it sits in
        proj = (block[:, None, :] * omegas[None, :, :]).sum(axis=2)
        out[start:start + chunk] = scale * np.cos(proj + offsets)
    return out


def _rff_loop(X, omegas, offsets, scale):
    N, n = X.shape
    d = omegas.shape[0]
    out = np.empty((N, d))
    for r in range(N):
        for i in range(d):
            acc = 0.0
            for k in range(n):
                acc += omegas[i, k] * X[r, k]
            out[r, i] = scale * math.cos(acc + offsets[i])
    return out


# ---------------------------------------------------------------------------
# row-wise dot products and RBF row sums


def _row_dots_numpy(H, g):
    return (H * g).sum(axis=1)


def _row_dots_loop(H, g):
    N, d = H.shape
    out = np.empty(N)
    for r in range(N):
        acc = 0.0
        for i in range(d):
            acc += H[r, i] * g[i]
        out[r] = acc
    return out


def _rbf_rowsum_numpy(X, Y, gamma, chunk=512):
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk]
        sq = ((block[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = np.exp(-gamma * sq).sum(axis=1)
    return out


def _rbf_rowsum_loop(X, Y, gamma):
    N, n = X.shape
    M = Y.shape[0]
    out = np.empty(N)
    for r in range(N):
        acc = 0.0
        for c in range(M):
            sq = 0.0
            for k in range(n):
                diff = X[r, k] - Y[c, k]
                sq += diff * diff
            acc += math.exp(-gamma * sq)
        out[r] = acc
    return out


if NUMBA_AVAILABLE:
    _categorical_from_uniform_jit = numba.njit(cache=True)(_categorical_from_uniform)
    _laplace_from_uniform_jit = numba.njit(cache=True)(_laplace_from_uniform)

    # the loop body calls the helpers by global name; rebind them for the jit
    _mwem_src_globals = dict(_mwem_loop.__globals__)
    _mwem_src_globals["_categorical_from_uniform"] = _categorical_from_uniform_jit
    _mwem_src_globals["_laplace_from_uniform"] = _laplace_from_uniform_jit
    _mwem_loop_rebound = type(_mwem_loop)(
        _mwem_loop.__code__, _mwem_src_globals, "_mwem_loop"
    )
    _mwem_numba = numba.njit(cache=False)(_mwem_loop_rebound)
    _rff_numba = numba.njit(cache=True)(_rff_loop)
    _row_dots_numba = numba.njit(cache=True)(_row_dots_loop)
    _rbf_rowsum_numba = numba.njit(cache=True)(_rbf_rowsum_loop)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def mwem(col_sums, q, grid, marginals, eps, sel_u, lap_u, noise_off=False, use_numba=None):
    """Run T multiplicative-weights steps on a product distribution.

    Returns ``(final_marginals, w_avg, chosen, mus)`` where ``w_avg[i]`` is
    the time-average of ``q * sum_s s * P_t[i, s]`` over t = 1..T.
    """
    use = USE_NUMBA if use_numba is None else (use_numba and NUMBA_AVAILABLE)
    args = (_f64(col_sums), float(q), _f64(grid), _f64(marginals), float(eps),
            _f64(sel_u), _f64(lap_u), bool(noise_off))
    if use:
        return _mwem_numba(*args)
    return _mwem_numpy(*args)


def rff_project(X, omegas, offsets, scale, use_numba=None):
    use = USE_NUMBA if use_numba is None else (use_numba and NUMBA_AVAILABLE)
    X, omegas, offsets = _f64(X), _f64(omegas), _f64(offsets)
    if use:
        return _rff_numba(X, omegas, offsets, float(scale))
    return _rff_numpy(X, omegas, offsets, float(scale))


def row_dots(H, g, use_numba=None):
    use = USE_NUMBA if use_numba is None else (use_numba and NUMBA_AVAILABLE)
    H, g = _f64(H), _f64(g)
    if use:
        return _row_dots_numba(H, g)
    return _row_dots_numpy(H, g)


def rbf_rowsum(X, Y, gamma, use_numba=None):
    """``out[r] = sum_c exp(-gamma * ||X[r] - Y[c]||^2)``."""
    use = USE_NUMBA if use_numba is None else (use_numba and NUMBA_AVAILABLE)
    X, Y = _f64(X), _f64(Y)
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return np.zeros(X.shape[0])
    if use:
        return _rbf_rowsum_numba(X, Y, float(gamma))
    return _rbf_rowsum_numpy(X, Y, float(gamma))
