import math

import numpy as np
import pytest

import oracles
from kgfuse import analysis
from kgfuse.edge_model import EdgeTable, edges_from_triples
from kgfuse.graph import Graph


def graph(triples, source="CN"):
    return Graph(EdgeTable(edges_from_triples(triples, source)))


def test_degree_stats_small():
    g = graph([("a", "r", "b"), ("a", "r", "c"), ("b", "s", "c")])
    rep = analysis.degree_stats(g)
    assert (rep.nodes, rep.edges, rep.relations) == (3, 3, 2)
    assert rep.avg_degree == pytest.approx(2.0)
    assert rep.std_degree == pytest.approx(0.0)
    assert rep.out_degree_histogram == {0: 1, 1: 1, 2: 1}
    assert rep.in_degree_histogram == {0: 1, 1: 1, 2: 1}
    assert "in_degree_histogram" not in rep.summary()


def test_degree_std_star():
    g = graph([("hub", "r", f"leaf{i}") for i in range(4)])
    rep = analysis.degree_stats(g)
    assert rep.avg_degree == pytest.approx(8 / 5)
    assert rep.std_degree == pytest.approx(np.std([4, 1, 1, 1, 1]))


def test_self_loop_counts_twice():
    rep = analysis.degree_stats(graph([("a", "r", "a")]))
    assert rep.avg_degree == 2.0


def test_average_degree():
    assert analysis.average_degree(6_001_531, 2_160_968) == pytest.approx(5.55, abs=5e-3)
    with pytest.raises(analysis.EmptyGraphError):
        analysis.average_degree(3, 0)


def test_empty_graph_errors():
    g = Graph([])
    with pytest.raises(analysis.EmptyGraphError):
        analysis.degree_stats(g)
    with pytest.raises(analysis.EmptyGraphError):
        analysis.pagerank(g)
    with pytest.raises(analysis.EmptyGraphError):
        analysis.hits(g)


def test_source_stats_columns():
    es = list(edges_from_triples([("a", "r", "b")], "CN")) + list(edges_from_triples([("c", "r", "d"), ("d", "r", "e")], "WN"))
    rep = analysis.source_stats(es, {"ALL": es})
    assert set(rep) == {"CN", "WN", "ALL"}
    assert rep["WN"]["nodes"] == 3 and rep["ALL"]["edges"] == 3


def test_pagerank_triangle_uniform():
    res = analysis.pagerank(graph([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a")]))
    assert res.converged
    for v in res.scores.values():
        assert v == pytest.approx(1 / 3, abs=1e-12)


def test_pagerank_star_hub_wins():
    res = analysis.pagerank(graph([(f"l{i}", "r", "hub") for i in range(5)]))
    assert max(res.scores, key=res.scores.get) == "hub"
    assert sum(res.scores.values()) == pytest.approx(1.0, abs=1e-9)


def test_pagerank_matches_linear_solve():
    triples = [("a", "r", "b"), ("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a"), ("c", "r", "d")]
    g = graph(triples)
    res = analysis.pagerank(g, tol=1e-14, max_iter=1000)
    exact = oracles.pagerank_linear(g.n_nodes, list(zip(g.src, g.dst)))
    assert np.allclose([res.scores[n] for n in g.nodes], exact, atol=1e-10)


def test_pagerank_damping_validated():
    g = graph([("a", "r", "b")])
    for d in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            analysis.pagerank(g, damping=d)


def test_pagerank_reports_nonconvergence():
    res = analysis.pagerank(graph([("a", "r", "b"), ("b", "r", "c")]), tol=0.0, max_iter=3)
    assert not res.converged and res.iterations == 3


def test_hits_bipartite():
    g = graph([("h1", "r", "a1"), ("h1", "r", "a2"), ("h2", "r", "a1")])
    res = analysis.hits(g)
    assert res.hubs["h1"] > res.hubs["h2"] > 0
    assert res.authorities["a1"] > res.authorities["a2"] > 0
    assert res.hubs["a1"] == 0 and res.authorities["h1"] == 0
    assert math.fsum(v * v for v in res.hubs.values()) == pytest.approx(1.0)
    h, a = oracles.dense_hits(g.n_nodes, list(zip(g.src, g.dst)))
    assert np.allclose([res.hubs[n] for n in g.nodes], h, atol=1e-12)
    assert np.allclose([res.authorities[n] for n in g.nodes], a, atol=1e-12)


def test_top_k_ties_and_labels():
    scores = {"b": 0.5, "a": 0.5, "c": 0.9, "d": 0.1}
    assert analysis.top_k(scores, 3, {"c": ["cee", "sea"]}) == [("c", "cee", 0.9), ("a", "", 0.5), ("b", "", 0.5)]
    assert len(analysis.top_k(scores, 10)) == 4
    with pytest.raises(ValueError):
        analysis.top_k(scores, 0)
