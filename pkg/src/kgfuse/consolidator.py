"""Concatenate, deduplicate and merge identical nodes.

Ordering rules that make the output independent of input order:

* sources of a deduplicated edge are sorted;
* a node's label list is built from the distinct label lists it carries,
  taken in order of (priority of the carrying edge's source, list contents);
* the sentence of a deduplicated edge is the smallest non-empty sentence from
  the highest-priority source;
* the label list of a merged node is the canonical node's labels followed by
  the other members' labels, members ordered by namespace priority then id.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import kernels, vocab
from .edge_model import SAME_AS, Edge, EdgeTable, assign_ids, make_edge_id

logger = logging.getLogger(__name__)


def _edge_rank(edge: Edge) -> int:
    return min((vocab.source_priority(s) for s in edge.source), default=len(vocab.SOURCE_PRIORITY))


def concatenate(tables: Sequence[Iterable[Edge]]) -> EdgeTable:
    taken: set[str] = set()
    edges: list[Edge] = []
    for table in tables:
        edges.extend(assign_ids(table, taken))
    return EdgeTable(edges, validate=False)


def _ordered_union(lists: Iterable[tuple[str, ...]]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(v for lst in lists for v in lst))


def resolve_node_labels(table: Iterable[Edge]) -> dict[str, tuple[str, ...]]:
    variants: dict[str, set[tuple[int, tuple[str, ...]]]] = {}
    for e in table:
        rank = _edge_rank(e)
        variants.setdefault(e.node1, set()).add((rank, e.node1_label))
        variants.setdefault(e.node2, set()).add((rank, e.node2_label))
    return {node: _ordered_union(lst for _, lst in sorted(v)) for node, v in variants.items()}


def resolve_relation_labels(table: Iterable[Edge]) -> dict[str, tuple[str, ...]]:
    variants: dict[str, set[tuple[int, tuple[str, ...]]]] = {}
    for e in table:
        variants.setdefault(e.relation, set()).add((_edge_rank(e), e.relation_label))
    return {rel: _ordered_union(lst for _, lst in sorted(v)) for rel, v in variants.items()}


def _first_nonempty(group: list[Edge], attr: str) -> str:
    candidates = sorted((_edge_rank(e), getattr(e, attr)) for e in group if getattr(e, attr))
    return candidates[0][1] if candidates else ""


def deduplicate(table: Iterable[Edge]) -> EdgeTable:
    """Collapse edges with equal (node1, relation, node2); output sorted by id."""
    table = list(table)
    node_labels = resolve_node_labels(table)
    rel_labels = resolve_relation_labels(table)
    groups: dict[tuple[str, str, str], list[Edge]] = {}
    for e in table:
        groups.setdefault(e.triple, []).append(e)

    merged = []
    for triple in sorted(groups):
        group = groups[triple]
        n1, rel, n2 = triple
        merged.append(
            Edge(
                id=make_edge_id(n1, rel, n2),
                node1=n1,
                relation=rel,
                node2=n2,
                node1_label=node_labels[n1],
                node2_label=node_labels[n2],
                relation_label=rel_labels[rel],
                relation_dimension=_first_nonempty(group, "relation_dimension"),
                source=tuple(sorted({s for e in group for s in e.source})),
                sentence=_first_nonempty(group, "sentence"),
            )
        )
    # distinct triples can share an id string when node ids contain '-'
    merged = assign_ids(merged)
    merged.sort(key=lambda e: e.id)
    return EdgeTable(merged, validate=False)


@dataclass(frozen=True)
class MergePlan:
    """Equivalence classes of ``mw:SameAs``-connected nodes.

    ``classes`` holds each class as a tuple sorted by merge priority, so the
    first member is the canonical node. ``canonical`` maps every node to it.
    """

    classes: tuple[tuple[str, ...], ...]
    canonical: dict[str, str] = field(compare=False)

    def canonical_of(self, node: str) -> str:
        return self.canonical.get(node, node)

    def merged_classes(self) -> list[tuple[str, ...]]:
        return [c for c in self.classes if len(c) > 1]


def build_merge_plan(table: Iterable[Edge], priority: Sequence[str] | None = None) -> MergePlan:
    """Union-find over ``mw:SameAs`` edges.

    ``priority`` lists source tags from most to least preferred for the
    canonical node; the default is CN, WN, WD, FN, RG, VG, AT.
    """
    table = list(table)
    key = vocab.node_priority if priority is None else vocab.priority_key(priority)
    nodes = sorted({n for e in table for n in (e.node1, e.node2)})
    index = {n: i for i, n in enumerate(nodes)}
    pairs = [(index[e.node1], index[e.node2]) for e in table if e.relation == SAME_AS]
    a = np.array([p[0] for p in pairs], dtype=np.int64)
    b = np.array([p[1] for p in pairs], dtype=np.int64)
    roots = kernels.connected_components(len(nodes), a, b)

    members: dict[int, list[str]] = {}
    for i, root in enumerate(roots.tolist()):
        members.setdefault(root, []).append(nodes[i])
    classes = sorted(tuple(sorted(m, key=key)) for m in members.values())
    canonical = {n: cls[0] for cls in classes for n in cls}
    return MergePlan(tuple(classes), canonical)


def apply_merge(table: Iterable[Edge], plan: MergePlan) -> EdgeTable:
    table = list(table)
    labels = resolve_node_labels(table)
    class_labels: dict[str, tuple[str, ...]] = {}
    for cls in plan.classes:
        if len(cls) > 1:
            class_labels[cls[0]] = _ordered_union(labels.get(n, ()) for n in cls)

    rewritten = []
    for e in table:
        c1 = plan.canonical_of(e.node1)
        c2 = plan.canonical_of(e.node2)
        if e.relation == SAME_AS and c1 == c2:
            continue
        rewritten.append(
            replace(
                e,
                node1=c1,
                node2=c2,
                node1_label=class_labels.get(c1, labels.get(c1, e.node1_label)),
                node2_label=class_labels.get(c2, labels.get(c2, e.node2_label)),
            )
        )
    return deduplicate(rewritten)


@dataclass
class ConsolidationResult:
    cskg_star: EdgeTable
    cskg: EdgeTable
    plan: MergePlan

    def counts(self) -> dict[str, dict[str, int]]:
        return {
            "cskg_star": {"nodes": len(self.cskg_star.nodes()), "edges": len(self.cskg_star)},
            "cskg": {"nodes": len(self.cskg.nodes()), "edges": len(self.cskg)},
        }


def consolidate(
    tables: Sequence[Iterable[Edge]], links: Iterable[Edge] = (), priority: Sequence[str] | None = None
) -> ConsolidationResult:
    """Build the concatenated graph with links appended, then merge identical nodes."""
    star = deduplicate(concatenate([*tables, links]))
    plan = build_merge_plan(star, priority)
    merged = apply_merge(star, plan)
    result = ConsolidationResult(star, merged, plan)
    c = result.counts()
    logger.info(
        "consolidated: %d nodes / %d edges -> %d nodes / %d edges",
        c["cskg_star"]["nodes"], c["cskg_star"]["edges"], c["cskg"]["nodes"], c["cskg"]["edges"],
    )
    return result
