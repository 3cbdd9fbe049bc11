"""Degree statistics and PageRank/HITS centrality."""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from . import kernels, vocab
from .edge_model import Edge
from .graph import Graph


class EmptyGraphError(ValueError):
    pass


@dataclass
class StatsReport:
    nodes: int
    edges: int
    relations: int
    avg_degree: float
    std_degree: float
    in_degree_histogram: dict[int, int] = field(default_factory=dict, repr=False)
    out_degree_histogram: dict[int, int] = field(default_factory=dict, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("in_degree_histogram")
        d.pop("out_degree_histogram")
        return d


def _histogram(values: np.ndarray) -> dict[int, int]:
    return {int(k): int(v) for k, v in sorted(Counter(values.tolist()).items())}


def average_degree(n_edges: int, n_nodes: int) -> float:
    """Mean total degree: every edge adds one to an in- and one to an out-degree."""
    if n_nodes <= 0:
        raise EmptyGraphError("average degree needs at least one node")
    return 2.0 * n_edges / n_nodes


def degree_stats(graph: Graph) -> StatsReport:
    """Mean and population std of total (in + out) degree, multigraph counting."""
    if graph.n_nodes == 0:
        raise EmptyGraphError("degree statistics need at least one node")
    indeg = graph.in_degree()
    outdeg = graph.out_degree()
    total = (indeg + outdeg).astype(np.float64)
    return StatsReport(
        nodes=graph.n_nodes,
        edges=graph.n_edges,
        relations=len(graph.relations),
        avg_degree=average_degree(graph.n_edges, graph.n_nodes),
        std_degree=float(total.std()),
        in_degree_histogram=_histogram(indeg),
        out_degree_histogram=_histogram(outdeg),
    )


def source_stats(edges: Iterable[Edge], columns: Mapping[str, Iterable[Edge]] | None = None) -> dict[str, dict]:
    """Per-source and total statistics in the layout of a source-by-metric table.

    Each source column covers the edges whose ``source`` contains that tag.
    Extra named tables (e.g. the pre-merge graph) can be passed in ``columns``.
    """
    edges = list(edges)
    report: dict[str, dict] = {}
    for tag in vocab.SOURCE_TAGS:
        subset = [e for e in edges if tag in e.source]
        if subset:
            report[tag] = degree_stats(Graph(subset)).summary()
    for name, table in (columns or {}).items():
        table = list(table)
        if table:
            report[name] = degree_stats(Graph(table)).summary()
    return report


class PageRankResult(NamedTuple):
    scores: dict[str, float]
    iterations: int
    converged: bool


class HitsResult(NamedTuple):
    hubs: dict[str, float]
    authorities: dict[str, float]
    iterations: int
    converged: bool


def pagerank(graph: Graph, damping: float = 0.85, tol: float = 1e-9, max_iter: int = 100) -> PageRankResult:
    """Power iteration; parallel edges add transition weight, dangling mass spreads uniformly."""
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie strictly between 0 and 1")
    if graph.n_nodes == 0:
        raise EmptyGraphError("PageRank needs at least one node")
    x, it, conv = kernels.pagerank_scores(graph.src, graph.dst, graph.n_nodes, damping, tol, max_iter)
    return PageRankResult(dict(zip(graph.nodes, x.tolist())), it, conv)


def hits(graph: Graph, tol: float = 1e-9, max_iter: int = 100) -> HitsResult:
    """Hub/authority mutual reinforcement, L2-normalised every iteration, from all-ones."""
    if graph.n_edges == 0:
        raise EmptyGraphError("HITS needs at least one edge")
    h, a, it, conv = kernels.hits_scores(graph.src, graph.dst, graph.n_nodes, tol, max_iter)
    return HitsResult(dict(zip(graph.nodes, h.tolist())), dict(zip(graph.nodes, a.tolist())), it, conv)


def top_k(
    scores: Mapping[str, float], k: int, labels: Mapping[str, Iterable[str]] | None = None
) -> list[tuple[str, str, float]]:
    if k < 1:
        raise ValueError("k must be at least 1")
    labels = labels or {}
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    out = []
    for node, score in ranked:
        labs = tuple(labels.get(node, ()))
        out.append((node, labs[0] if labs else "", score))
    return out
