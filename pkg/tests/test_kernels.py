"""Both backends must agree on every kernel."""
import random

import numpy as np
import pytest

import oracles
from kgfuse import kernels

BACKENDS = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
AGREE_TOL = 1e-12


def run_both(fn):
    out = {}
    for name in BACKENDS:
        with kernels.using_backend(name):
            out[name] = fn()
    return out


def random_edges(seed, n=30, m=80):
    rng = np.random.default_rng(seed)
    return rng.integers(0, n, m), rng.integers(0, n, m), n


def test_set_backend():
    before = kernels.backend()
    with kernels.using_backend("numpy"):
        assert kernels.backend() == "numpy"
    assert kernels.backend() == before
    with pytest.raises(ValueError):
        kernels.set_backend("cuda")


@pytest.mark.parametrize("seed", range(5))
def test_pagerank_agree(seed):
    src, dst, n = random_edges(seed)
    out = run_both(lambda: kernels.pagerank_scores(src, dst, n))
    ref = oracles.dense_pagerank(n, list(zip(src, dst)))
    for x, it, conv in out.values():
        assert conv
        assert np.allclose(x, ref, atol=1e-10)
    xs = [v[0] for v in out.values()]
    assert np.allclose(xs[0], xs[-1], atol=AGREE_TOL)


@pytest.mark.parametrize("seed", range(5))
def test_hits_agree(seed):
    src, dst, n = random_edges(seed)
    out = run_both(lambda: kernels.hits_scores(src, dst, n, 1e-12, 500))
    (h0, a0, *_), (h1, a1, *_) = list(out.values())[0], list(out.values())[-1]
    assert np.allclose(h0, h1, atol=1e-10) and np.allclose(a0, a1, atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_components_agree(seed):
    a, b, n = random_edges(seed, n=40, m=25)
    out = run_both(lambda: kernels.connected_components(n, a, b))
    roots = list(out.values())
    assert np.array_equal(roots[0], roots[-1])
    # root is the smallest member
    for v in range(n):
        assert roots[0][v] <= v and roots[0][roots[0][v]] == roots[0][v]


def test_components_chain():
    roots = kernels.connected_components(5, [3, 2, 1], [4, 3, 2])
    assert roots.tolist() == [0, 1, 1, 1, 1]


def test_levenshtein_agree():
    rng = random.Random(3)
    for _ in range(200):
        a = "".join(rng.choice("abcé ") for _ in range(rng.randint(0, 8)))
        b = "".join(rng.choice("abcé ") for _ in range(rng.randint(0, 8)))
        out = run_both(lambda: kernels.levenshtein_distance(a, b))
        assert set(out.values()) == {oracles.edit_distance(a, b)}


def test_cosine_agree():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(20, 7))
    M[3] = 0.0
    q = rng.normal(size=7)
    out = run_both(lambda: kernels.cosine_scores(M, q))
    ref = M @ q / np.maximum(np.linalg.norm(M, axis=1) * np.linalg.norm(q), 1e-300)
    ref[3] = 0.0
    for v in out.values():
        assert np.allclose(v, ref, atol=1e-12)


@pytest.mark.parametrize("model", ["transe", "distmult", "complex", "rescal"])
def test_sgd_epoch_agree(model):
    rng = np.random.default_rng(1)
    n, k, d, m = 12, 3, 4, 30
    E0 = rng.normal(scale=0.1, size=(n, d))
    R0 = rng.normal(scale=0.1, size=(k, d, d) if model == "rescal" else (k, d))
    heads, rels, tails = rng.integers(0, n, m), rng.integers(0, k, m), rng.integers(0, n, m)
    neg_ent, neg_side = rng.integers(0, n, (m, 2)), rng.integers(0, 2, (m, 2))

    def epoch():
        E, R = E0.copy(), R0.copy()
        loss = kernels.sgd_epoch(model, E, R, heads, rels, tails, neg_ent, neg_side, 0.05)
        return loss, E, R

    out = list(run_both(epoch).values())
    assert out[0][0] == pytest.approx(out[-1][0], rel=1e-12)
    assert np.allclose(out[0][1], out[-1][1], atol=AGREE_TOL)
    assert np.allclose(out[0][2], out[-1][2], atol=AGREE_TOL)
    assert not np.array_equal(out[0][1], E0)


def test_sharded_epoch_numpy_equals_sequential():
    rng = np.random.default_rng(2)
    E0, R0 = rng.normal(size=(10, 4)), rng.normal(size=(3, 4))
    h, r, t = rng.integers(0, 10, 40), rng.integers(0, 3, 40), rng.integers(0, 10, 40)
    ne, ns = rng.integers(0, 10, (40, 2)), rng.integers(0, 2, (40, 2))
    with kernels.using_backend("numpy"):
        E1, R1, E2, R2 = E0.copy(), R0.copy(), E0.copy(), R0.copy()
        a = kernels.sgd_epoch("distmult", E1, R1, h, r, t, ne, ns, 0.1)
        b = kernels.sgd_epoch_sharded("distmult", E2, R2, h, r, t, ne, ns, 0.1, 4)
    assert a == b and np.array_equal(E1, E2)
    with pytest.raises(ValueError):
        kernels.sgd_epoch_sharded("distmult", E2, R2, h, r, t, ne, ns, 0.1, 0)
