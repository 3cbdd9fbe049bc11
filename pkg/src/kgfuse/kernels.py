"""Numeric inner loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``KGFUSE_NUMBA`` is not set to
``0``. ``set_backend("numpy")`` switches at runtime (tests and the benchmark
use it to compare both paths). Public functions here dispatch on the current
backend; ``*_nb`` / ``*_np`` are the two implementations.
"""
from __future__ import annotations

import contextlib
import math
import os
import warnings

import numpy as np

try:
    import numba as _numba

    HAVE_NUMBA = True
    prange = _numba.prange
    # skip the TBB layer: older system TBB builds only emit a warning
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None
    HAVE_NUMBA = False
    prange = range


def _env_wants_numba() -> bool:
    flag = os.environ.get("KGFUSE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


_USE_NUMBA = HAVE_NUMBA and _env_wants_numba()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend() -> str:
    return "numba" if _USE_NUMBA else "numpy"


def set_backend(name: str) -> None:
    global _USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            warnings.warn("numba is not installed; staying on the numpy backend")
            return
        _USE_NUMBA = True
    elif name == "numpy":
        _USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def using_backend(name: str):
    previous = backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


# ---------------------------------------------------------------------------
# PageRank
# ---------------------------------------------------------------------------

@njit
def _pagerank_nb(src, dst, n, damping, tol, max_iter):
    m = src.shape[0]
    outdeg = np.zeros(n)
    for e in range(m):
        outdeg[src[e]] += 1.0
    x = np.full(n, 1.0 / n)
    new = np.empty(n)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        dangling = 0.0
        for v in range(n):
            if outdeg[v] == 0.0:
                dangling += x[v]
        new[:] = 0.0
        for e in range(m):
            u = src[e]
            new[dst[e]] += x[u] / outdeg[u]
        base = (1.0 - damping) / n + damping * dangling / n
        diff = 0.0
        for v in range(n):
            val = damping * new[v] + base
            diff += abs(val - x[v])
            new[v] = val
        x, new = new, x
        if diff < tol:
            converged = True
            break
    total = 0.0
    for v in range(n):
        total += x[v]
    for v in range(n):
        x[v] /= total
    return x, it, converged


def _pagerank_np(src, dst, n, damping, tol, max_iter):
    outdeg = np.bincount(src, minlength=n).astype(np.float64)
    dangling_mask = outdeg == 0.0
    safe = np.where(dangling_mask, 1.0, outdeg)
    x = np.full(n, 1.0 / n)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        dangling = x[dangling_mask].sum()
        flow = np.bincount(dst, weights=(x / safe)[src], minlength=n)
        new = damping * flow + ((1.0 - damping) / n + damping * dangling / n)
        diff = np.abs(new - x).sum()
        x = new
        if diff < tol:
            converged = True
            break
    return x / x.sum(), it, converged


def pagerank_scores(src, dst, n, damping=0.85, tol=1e-9, max_iter=100):
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    fn = _pagerank_nb if _USE_NUMBA else _pagerank_np
    x, it, conv = fn(src, dst, int(n), float(damping), float(tol), int(max_iter))
    return np.asarray(x), int(it), bool(conv)


# ---------------------------------------------------------------------------
# HITS
# ---------------------------------------------------------------------------

@njit
def _hits_nb(src, dst, n, tol, max_iter):
    m = src.shape[0]
    hubs = np.ones(n)
    auth = np.ones(n)
    new_a = np.empty(n)
    new_h = np.empty(n)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        new_a[:] = 0.0
        for e in range(m):
            new_a[dst[e]] += hubs[src[e]]
        norm = 0.0
        for v in range(n):
            norm += new_a[v] * new_a[v]
        norm = math.sqrt(norm)
        for v in range(n):
            new_a[v] /= norm
        new_h[:] = 0.0
        for e in range(m):
            new_h[src[e]] += new_a[dst[e]]
        norm = 0.0
        for v in range(n):
            norm += new_h[v] * new_h[v]
        norm = math.sqrt(norm)
        for v in range(n):
            new_h[v] /= norm
        diff = 0.0
        for v in range(n):
            diff += abs(new_a[v] - auth[v]) + abs(new_h[v] - hubs[v])
        auth, new_a = new_a, auth
        hubs, new_h = new_h, hubs
        if diff < tol:
            converged = True
            break
    return hubs, auth, it, converged


def _hits_np(src, dst, n, tol, max_iter):
    hubs = np.ones(n)
    auth = np.ones(n)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        new_a = np.bincount(dst, weights=hubs[src], minlength=n)
        new_a /= np.sqrt((new_a * new_a).sum())
        new_h = np.bincount(src, weights=new_a[dst], minlength=n)
        new_h /= np.sqrt((new_h * new_h).sum())
        diff = np.abs(new_a - auth).sum() + np.abs(new_h - hubs).sum()
        auth, hubs = new_a, new_h
        if diff < tol:
            converged = True
            break
    return hubs, auth, it, converged


def hits_scores(src, dst, n, tol=1e-9, max_iter=100):
    src = np.ascontiguousarray(src, dtype=np.int64)
    dst = np.ascontiguousarray(dst, dtype=np.int64)
    fn = _hits_nb if _USE_NUMBA else _hits_np
    h, a, it, conv = fn(src, dst, int(n), float(tol), int(max_iter))
    return np.asarray(h), np.asarray(a), int(it), bool(conv)


# ---------------------------------------------------------------------------
# Union-find
# ---------------------------------------------------------------------------

@njit
def _components_nb(n, a, b):
    parent = np.arange(n)
    for i in range(a.shape[0]):
        x = a[i]
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        y = b[i]
        while parent[y] != y:
            parent[y] = parent[parent[y]]
            y = parent[y]
        if x != y:
            # smaller index becomes the root so labels do not depend on edge order
            if x < y:
                parent[y] = x
            else:
                parent[x] = y
    for v in range(n):
        r = v
        while parent[r] != r:
            r = parent[r]
        parent[v] = r
    return parent


def _components_np(n, a, b):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for x, y in zip(a.tolist(), b.tolist()):
        rx, ry = find(x), find(y)
        if rx != ry:
            if rx < ry:
                parent[ry] = rx
            else:
                parent[rx] = ry
    return np.array([find(v) for v in range(n)], dtype=np.int64)


def connected_components(n, a, b):
    """Root label per element; the root is the smallest index in its component."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if _USE_NUMBA:
        return np.asarray(_components_nb(int(n), a, b))
    return _components_np(int(n), a, b)


# ---------------------------------------------------------------------------
# Levenshtein distance
# ---------------------------------------------------------------------------

@njit
def _levenshtein_nb(a, b):
    la = a.shape[0]
    lb = b.shape[0]
    prev = np.arange(lb + 1)
    cur = np.empty(lb + 1, dtype=np.int64)
    for i in range(1, la + 1):
        cur[0] = i
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            if prev[j - 1] + cost < best:
                best = prev[j - 1] + cost
            cur[j] = best
        prev, cur = cur, prev
    return prev[lb]


def _levenshtein_np(a, b):
    lb = b.shape[0]
    prev = np.arange(lb + 1, dtype=np.int64)
    idx = np.arange(lb + 1, dtype=np.int64)
    for i in range(1, a.shape[0] + 1):
        cost = (b != a[i - 1]).astype(np.int64)
        t = np.empty(lb + 1, dtype=np.int64)
        t[0] = i
        t[1:] = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        # insertion chain: cur[j] = min_k<=j t[k] + (j - k)
        prev = np.minimum.accumulate(t - idx) + idx
    return int(prev[lb])


def _codes(s: str) -> np.ndarray:
    return np.fromiter(map(ord, s), dtype=np.int64, count=len(s))


def levenshtein_distance(a: str, b: str) -> int:
    ca, cb = _codes(a), _codes(b)
    if _USE_NUMBA:
        return int(_levenshtein_nb(ca, cb))
    return _levenshtein_np(ca, cb)


# ---------------------------------------------------------------------------
# Cosine similarity against a matrix
# ---------------------------------------------------------------------------

@njit
def _cosine_nb(matrix, query):
    n, d = matrix.shape
    qn = 0.0
    for j in range(d):
        qn += query[j] * query[j]
    qn = math.sqrt(qn)
    out = np.empty(n)
    for i in range(n):
        dot = 0.0
        rn = 0.0
        for j in range(d):
            dot += matrix[i, j] * query[j]
            rn += matrix[i, j] * matrix[i, j]
        if rn == 0.0:
            out[i] = 0.0
        else:
            out[i] = dot / (math.sqrt(rn) * qn)
    return out


def _cosine_np(matrix, query):
    norms = np.sqrt((matrix * matrix).sum(axis=1))
    dots = matrix @ query
    qn = math.sqrt(float(query @ query))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = dots / (norms * qn)
    out[norms == 0.0] = 0.0
    return out


def cosine_scores(matrix, query):
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if _USE_NUMBA:
        return np.asarray(_cosine_nb(matrix, query))
    return _cosine_np(matrix, query)


# ---------------------------------------------------------------------------
# SGD epochs for the four scoring models
#
# Every sample: score s with current parameters, loss softplus(-y s),
# gradient coefficient g = -y * sigmoid(-y s), then h, r, t are updated
# together from gradients taken at the pre-update values.
# ---------------------------------------------------------------------------

@njit
def _softplus(x):
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit
def _sample_loop_nb(model, E, R, heads, rels, tails, neg_ent, neg_side, lr):
    n_pos = heads.shape[0]
    n_neg = neg_ent.shape[1]
    d = E.shape[1]
    half = d // 2
    gh = np.empty(d)
    gt = np.empty(d)
    gr = np.empty(d)
    total = 0.0
    for p in range(n_pos):
        for s in range(n_neg + 1):
            h = heads[p]
            r = rels[p]
            t = tails[p]
            y = 1.0
            if s > 0:
                y = -1.0
                if neg_side[p, s - 1] == 0:
                    h = neg_ent[p, s - 1]
                else:
                    t = neg_ent[p, s - 1]
            score = 0.0
            if model == 0:  # TransE
                for j in range(d):
                    score += (E[h, j] + R[r, j]) * E[t, j]
            elif model == 1:  # DistMult
                for j in range(d):
                    score += E[h, j] * R[r, j] * E[t, j]
            else:  # ComplEx
                for j in range(half):
                    hr = E[h, j]
                    hi = E[h, half + j]
                    rr = R[r, j]
                    ri = R[r, half + j]
                    tr = E[t, j]
                    ti = E[t, half + j]
                    score += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr
            total += _softplus(-y * score)
            g = -y * _sigmoid(-y * score)
            if model == 0:
                for j in range(d):
                    gh[j] = E[t, j]
                    gr[j] = E[t, j]
                    gt[j] = E[h, j] + R[r, j]
            elif model == 1:
                for j in range(d):
                    gh[j] = R[r, j] * E[t, j]
                    gr[j] = E[h, j] * E[t, j]
                    gt[j] = E[h, j] * R[r, j]
            else:
                for j in range(half):
                    hr = E[h, j]
                    hi = E[h, half + j]
                    rr = R[r, j]
                    ri = R[r, half + j]
                    tr = E[t, j]
                    ti = E[t, half + j]
                    gh[j] = rr * tr + ri * ti
                    gh[half + j] = rr * ti - ri * tr
                    gr[j] = hr * tr + hi * ti
                    gr[half + j] = hr * ti - hi * tr
                    gt[j] = hr * rr - hi * ri
                    gt[half + j] = hi * rr + hr * ri
            step = lr * g
            if h == t:
                for j in range(d):
                    E[h, j] -= step * (gh[j] + gt[j])
            else:
                for j in range(d):
                    E[h, j] -= step * gh[j]
                    E[t, j] -= step * gt[j]
            for j in range(d):
                R[r, j] -= step * gr[j]
    return total


@njit
def _sample_loop_rescal_nb(E, R, heads, rels, tails, neg_ent, neg_side, lr):
    n_pos = heads.shape[0]
    n_neg = neg_ent.shape[1]
    d = E.shape[1]
    gh = np.empty(d)
    gt = np.empty(d)
    total = 0.0
    for p in range(n_pos):
        for s in range(n_neg + 1):
            h = heads[p]
            r = rels[p]
            t = tails[p]
            y = 1.0
            if s > 0:
                y = -1.0
                if neg_side[p, s - 1] == 0:
                    h = neg_ent[p, s - 1]
                else:
                    t = neg_ent[p, s - 1]
            # gh = R t ; score = h . (R t)
            for a in range(d):
                acc = 0.0
                for b in range(d):
                    acc += R[r, a, b] * E[t, b]
                gh[a] = acc
            score = 0.0
            for a in range(d):
                score += E[h, a] * gh[a]
            for b in range(d):
                acc = 0.0
                for a in range(d):
                    acc += E[h, a] * R[r, a, b]
                gt[b] = acc
            total += _softplus(-y * score)
            step = lr * (-y * _sigmoid(-y * score))
            for a in range(d):
                ha = E[h, a]
                for b in range(d):
                    R[r, a, b] -= step * ha * E[t, b]
            if h == t:
                for j in range(d):
                    E[h, j] -= step * (gh[j] + gt[j])
            else:
                for j in range(d):
                    E[h, j] -= step * gh[j]
                    E[t, j] -= step * gt[j]
    return total


def _softplus_np(x: float) -> float:
    return x + math.log1p(math.exp(-x)) if x > 0 else math.log1p(math.exp(x))


def _sigmoid_np(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def score_grads(model, hv, rv, tv):
    """Score and its gradients w.r.t. head, relation params and tail."""
    if model == 0:
        return float(np.dot(hv + rv, tv)), tv.copy(), tv.copy(), hv + rv
    if model == 1:
        return float(np.sum(hv * rv * tv)), rv * tv, hv * tv, hv * rv
    if model == 2:
        half = hv.shape[0] // 2
        hr, hi = hv[:half], hv[half:]
        rr, ri = rv[:half], rv[half:]
        tr, ti = tv[:half], tv[half:]
        score = float(np.sum(hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr))
        gh = np.concatenate((rr * tr + ri * ti, rr * ti - ri * tr))
        gr = np.concatenate((hr * tr + hi * ti, hr * ti - hi * tr))
        gt = np.concatenate((hr * rr - hi * ri, hi * rr + hr * ri))
        return score, gh, gr, gt
    rt = rv @ tv
    return float(hv @ rt), rt, np.outer(hv, tv), hv @ rv


def _sample_loop_np(model, E, R, heads, rels, tails, neg_ent, neg_side, lr):
    n_neg = neg_ent.shape[1]
    total = 0.0
    for p in range(heads.shape[0]):
        for s in range(n_neg + 1):
            h, r, t = int(heads[p]), int(rels[p]), int(tails[p])
            y = 1.0
            if s > 0:
                y = -1.0
                if neg_side[p, s - 1] == 0:
                    h = int(neg_ent[p, s - 1])
                else:
                    t = int(neg_ent[p, s - 1])
            score, gh, gr, gt = score_grads(model, E[h], R[r], E[t])
            total += _softplus_np(-y * score)
            step = lr * (-y * _sigmoid_np(-y * score))
            if h == t:
                E[h] -= step * (gh + gt)
            else:
                E[h] -= step * gh
                E[t] -= step * gt
            R[r] -= step * gr
    return total


MODEL_CODES = {"transe": 0, "distmult": 1, "complex": 2, "rescal": 3}


def sgd_epoch(model: str, E, R, heads, rels, tails, neg_ent, neg_side, lr: float) -> float:
    """Run one pass of per-sample SGD in place; returns the summed loss."""
    code = MODEL_CODES[model]
    args = (
        np.ascontiguousarray(heads, dtype=np.int64),
        np.ascontiguousarray(rels, dtype=np.int64),
        np.ascontiguousarray(tails, dtype=np.int64),
        np.ascontiguousarray(neg_ent, dtype=np.int64),
        np.ascontiguousarray(neg_side, dtype=np.int64),
        float(lr),
    )
    if not _USE_NUMBA:
        # overflow surfaces as a non-finite loss, which the caller reports
        with np.errstate(over="ignore", invalid="ignore"):
            return float(_sample_loop_np(code, E, R, *args))
    if code == 3:
        return float(_sample_loop_rescal_nb(E, R, *args))
    return float(_sample_loop_nb(code, E, R, *args))


@njit(parallel=True)
def _sharded_nb(model, E, R, heads, rels, tails, neg_ent, neg_side, lr, bounds):
    losses = np.zeros(bounds.shape[0] - 1)
    for s in prange(bounds.shape[0] - 1):
        a, b = bounds[s], bounds[s + 1]
        losses[s] = _sample_loop_nb(model, E, R, heads[a:b], rels[a:b], tails[a:b], neg_ent[a:b], neg_side[a:b], lr)
    return losses.sum()


@njit(parallel=True)
def _sharded_rescal_nb(E, R, heads, rels, tails, neg_ent, neg_side, lr, bounds):
    losses = np.zeros(bounds.shape[0] - 1)
    for s in prange(bounds.shape[0] - 1):
        a, b = bounds[s], bounds[s + 1]
        losses[s] = _sample_loop_rescal_nb(E, R, heads[a:b], rels[a:b], tails[a:b], neg_ent[a:b], neg_side[a:b], lr)
    return losses.sum()


def sgd_epoch_sharded(
    model: str, E, R, heads, rels, tails, neg_ent, neg_side, lr: float, shards: int
) -> float:
    """Like :func:`sgd_epoch`, but contiguous shards update ``E``/``R`` concurrently without locks.

    Not reproducible bit for bit under numba. The numpy backend runs the
    shards one after another, which equals :func:`sgd_epoch`.
    """
    if shards < 1:
        raise ValueError("shards must be at least 1")
    if not _USE_NUMBA or shards == 1:
        return sgd_epoch(model, E, R, heads, rels, tails, neg_ent, neg_side, lr)
    bounds = np.linspace(0, len(heads), shards + 1).astype(np.int64)
    args = (
        np.ascontiguousarray(heads, dtype=np.int64),
        np.ascontiguousarray(rels, dtype=np.int64),
        np.ascontiguousarray(tails, dtype=np.int64),
        np.ascontiguousarray(neg_ent, dtype=np.int64),
        np.ascontiguousarray(neg_side, dtype=np.int64),
        float(lr),
        bounds,
    )
    if model == "rescal":
        return float(_sharded_rescal_nb(E, R, *args))
    return float(_sharded_nb(MODEL_CODES[model], E, R, *args))
