"""Indexed, read-only view over an edge table."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable

import numpy as np

from .edge_model import Edge, relation_label
from .linker import normalize_label


class Graph:
    """Directed multigraph with integer node indices and a label index.

    Node indices follow sorted node id order. ``src``/``dst``/``rel`` hold one
    entry per edge, in edge-table order.
    """

    def __init__(self, edges: Iterable[Edge], exclude_relations: Iterable[str] = ()):
        excluded = set(exclude_relations)
        self.edges: tuple[Edge, ...] = tuple(e for e in edges if e.relation not in excluded)
        labels: dict[str, dict[str, None]] = {}
        rel_labels: dict[str, dict[str, None]] = {}
        for e in self.edges:
            labels.setdefault(e.node1, {}).update(dict.fromkeys(e.node1_label))
            labels.setdefault(e.node2, {}).update(dict.fromkeys(e.node2_label))
            rel_labels.setdefault(e.relation, {}).update(dict.fromkeys(e.relation_label))

        self.nodes: list[str] = sorted(labels)
        self.index: dict[str, int] = {n: i for i, n in enumerate(self.nodes)}
        self.relations: list[str] = sorted(rel_labels)
        self.relation_index: dict[str, int] = {r: i for i, r in enumerate(self.relations)}
        self.labels: dict[str, tuple[str, ...]] = {n: tuple(ls) for n, ls in labels.items()}
        self.relation_labels: dict[str, tuple[str, ...]] = {r: tuple(ls) for r, ls in rel_labels.items()}

        m = len(self.edges)
        self.src = np.fromiter((self.index[e.node1] for e in self.edges), dtype=np.int64, count=m)
        self.dst = np.fromiter((self.index[e.node2] for e in self.edges), dtype=np.int64, count=m)
        self.rel = np.fromiter((self.relation_index[e.relation] for e in self.edges), dtype=np.int64, count=m)

        self.label_index: dict[str, list[str]] = defaultdict(list)
        for node in self.nodes:
            for key in dict.fromkeys(normalize_label(lab) for lab in self.labels[node]):
                if key:
                    self.label_index[key].append(node)
        self.label_index = dict(self.label_index)

        self._out: list[list[int]] | None = None
        self._in: list[list[int]] | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def __contains__(self, node: str) -> bool:
        return node in self.index

    def _build_adjacency(self) -> None:
        out: list[list[int]] = [[] for _ in self.nodes]
        inc: list[list[int]] = [[] for _ in self.nodes]
        for i, (s, d) in enumerate(zip(self.src.tolist(), self.dst.tolist())):
            out[s].append(i)
            inc[d].append(i)
        self._out, self._in = out, inc

    def out_edges(self, node: str) -> list[Edge]:
        if self._out is None:
            self._build_adjacency()
        return [self.edges[i] for i in self._out[self.index[node]]]

    def in_edges(self, node: str) -> list[Edge]:
        if self._in is None:
            self._build_adjacency()
        return [self.edges[i] for i in self._in[self.index[node]]]

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_nodes)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n_nodes)

    def first_label(self, node: str) -> str | None:
        labels = self.labels.get(node, ())
        return labels[0] if labels else None

    def relation_text(self, relation: str) -> str:
        labels = self.relation_labels.get(relation, ())
        return labels[0] if labels else relation_label(relation)

    def nodes_with_label(self, label: str) -> list[str]:
        return list(self.label_index.get(normalize_label(label), ()))
