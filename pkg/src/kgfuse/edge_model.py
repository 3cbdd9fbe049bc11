"""Hyper-relational edge records and their ten-column TSV serialization.

Every stage of the pipeline reads and writes this format::

    id  node1  relation  node2  node1;label  node2;label  relation;label
        relation;dimension  source  sentence

Multi-valued cells (the three label columns and ``source``) are joined with
``|``. A literal ``|`` inside a value is written as ``\\|`` and a literal
backslash as ``\\\\``.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

HEADER: tuple[str, ...] = (
    "id",
    "node1",
    "relation",
    "node2",
    "node1;label",
    "node2;label",
    "relation;label",
    "relation;dimension",
    "source",
    "sentence",
)

SAME_AS = "mw:SameAs"
HAS_LEXICAL_UNIT = "fn:HasLexicalUnit"
MAY_HAVE_PROPERTY = "mw:MayHaveProperty"

_FORBIDDEN = re.compile(r"[\t\n\r]")


class EdgeFormatError(ValueError):
    """Raised for malformed edge rows or invariant violations.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def make_edge_id(node1: str, relation: str, node2: str, ordinal: int = 0) -> str:
    """Return ``node1-relation-node2``, suffixed with ``-<ordinal>`` when ordinal > 0.

    >>> make_edge_id("a", "/r/IsA", "b")
    'a-/r/IsA-b'
    >>> make_edge_id("a", "/r/IsA", "b", 2)
    'a-/r/IsA-b-2'
    """
    if ordinal < 0:
        raise ValueError("ordinal must be non-negative")
    base = f"{node1}-{relation}-{node2}"
    return base if ordinal == 0 else f"{base}-{ordinal}"


_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def relation_label(relation: str) -> str:
    """Human-readable label derived from a relation id.

    >>> relation_label("/r/UsedFor")
    'used for'
    >>> relation_label("mw:MayHaveProperty")
    'may have property'
    """
    tail = re.split(r"[/:]", relation.rstrip("/"))[-1]
    return _CAMEL.sub(" ", tail).replace("_", " ").lower()


@dataclass(frozen=True)
class Edge:
    id: str
    node1: str
    relation: str
    node2: str
    node1_label: tuple[str, ...] = ()
    node2_label: tuple[str, ...] = ()
    relation_label: tuple[str, ...] = ()
    relation_dimension: str = ""
    source: tuple[str, ...] = ()
    sentence: str = ""

    def __post_init__(self) -> None:
        # accept lists from callers, store tuples
        for name in ("node1_label", "node2_label", "relation_label", "source"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.node1, self.relation, self.node2)

    def validate(self) -> None:
        for name in ("id", "node1", "relation", "node2"):
            value = getattr(self, name)
            if not value:
                raise EdgeFormatError(f"empty {name}")
            if _FORBIDDEN.search(value):
                raise EdgeFormatError(f"{name} contains a tab or line break: {value!r}")
        for name in ("relation_dimension", "sentence"):
            if _FORBIDDEN.search(getattr(self, name)):
                raise EdgeFormatError(f"{name} contains a tab or line break in edge {self.id!r}")
        for name in ("node1_label", "node2_label", "relation_label", "source"):
            values = getattr(self, name)
            if len(set(values)) != len(values):
                raise EdgeFormatError(f"duplicate entries in {name} of edge {self.id!r}")
            for v in values:
                if not v:
                    raise EdgeFormatError(f"empty entry in {name} of edge {self.id!r}")
                if _FORBIDDEN.search(v):
                    raise EdgeFormatError(f"{name} entry contains a tab or line break in edge {self.id!r}")


class EdgeTable(Sequence[Edge]):
    """Immutable ordered collection of edges with unique ids."""

    __slots__ = ("_edges",)

    def __init__(self, edges: Iterable[Edge] = (), validate: bool = True):
        self._edges: tuple[Edge, ...] = tuple(edges)
        if validate:
            seen: dict[str, int] = {}
            for i, edge in enumerate(self._edges):
                edge.validate()
                if edge.id in seen:
                    raise EdgeFormatError(
                        f"duplicate edge id {edge.id!r} at positions {seen[edge.id]} and {i}"
                    )
                seen[edge.id] = i

    def __getitem__(self, item):
        if isinstance(item, slice):
            return EdgeTable(self._edges[item], validate=False)
        return self._edges[item]

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self) -> Iterator[Edge]:
        return iter(self._edges)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, EdgeTable):
            return self._edges == other._edges
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._edges)

    def __repr__(self) -> str:
        return f"EdgeTable({len(self._edges)} edges)"

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    def nodes(self) -> set[str]:
        out: set[str] = set()
        for e in self._edges:
            out.add(e.node1)
            out.add(e.node2)
        return out

    def relations(self) -> set[str]:
        return {e.relation for e in self._edges}

    def check_relations(self, allowed: Iterable[str]) -> None:
        allowed = set(allowed)
        bad = sorted(self.relations() - allowed)
        if bad:
            raise EdgeFormatError(f"relations outside the allow-list: {', '.join(bad)}")


# --- cell codec -------------------------------------------------------------

def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("|", "\\|")


def join_multi(values: Sequence[str]) -> str:
    return "|".join(_escape(v) for v in values)


def split_multi(cell: str) -> tuple[str, ...]:
    if not cell:
        return ()
    if "\\" not in cell:
        return tuple(cell.split("|"))
    out: list[str] = []
    buf: list[str] = []
    chars = iter(cell)
    for ch in chars:
        if ch == "\\":
            nxt = next(chars, None)
            if nxt not in ("\\", "|"):
                raise ValueError(f"bad escape sequence in cell {cell!r}")
            buf.append(nxt)
        elif ch == "|":
            out.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    out.append("".join(buf))
    return tuple(out)


def format_row(edge: Edge) -> str:
    return "\t".join(
        (
            edge.id,
            edge.node1,
            edge.relation,
            edge.node2,
            join_multi(edge.node1_label),
            join_multi(edge.node2_label),
            join_multi(edge.relation_label),
            edge.relation_dimension,
            join_multi(edge.source),
            edge.sentence,
        )
    )


def parse_row(line: str, lineno: int | None = None) -> Edge:
    cells = line.split("\t")
    if len(cells) != len(HEADER):
        raise EdgeFormatError(f"expected {len(HEADER)} columns, found {len(cells)}", lineno)
    try:
        edge = Edge(
            id=cells[0],
            node1=cells[1],
            relation=cells[2],
            node2=cells[3],
            node1_label=split_multi(cells[4]),
            node2_label=split_multi(cells[5]),
            relation_label=split_multi(cells[6]),
            relation_dimension=cells[7],
            source=split_multi(cells[8]),
            sentence=cells[9],
        )
        edge.validate()
    except EdgeFormatError as exc:
        raise EdgeFormatError(str(exc), lineno) from None
    except ValueError as exc:
        raise EdgeFormatError(str(exc), lineno) from None
    return edge


# --- files ------------------------------------------------------------------

def read_edge_table(path: str | os.PathLike) -> EdgeTable:
    with open(path, "rb") as fh:
        raw = fh.read()
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    if not lines:
        raise EdgeFormatError("missing header row", 1)

    edges: list[Edge] = []
    first_seen: dict[str, int] = {}
    for lineno, blob in enumerate(lines, start=1):
        try:
            line = blob.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EdgeFormatError(f"invalid UTF-8 at byte {exc.start}", lineno) from None
        if "\r" in line:
            raise EdgeFormatError("carriage return in row", lineno)
        if lineno == 1:
            header = tuple(line.split("\t"))
            if header != HEADER:
                raise EdgeFormatError(f"unexpected header {header!r}", 1)
            continue
        edge = parse_row(line, lineno)
        if edge.id in first_seen:
            raise EdgeFormatError(
                f"duplicate edge id {edge.id!r} (first at line {first_seen[edge.id]})", lineno
            )
        first_seen[edge.id] = lineno
        edges.append(edge)
    return EdgeTable(edges, validate=False)


def serialize_edge_table(table: Iterable[Edge]) -> bytes:
    rows = ["\t".join(HEADER)]
    for edge in table:
        edge.validate()
        rows.append(format_row(edge))
    return ("\n".join(rows) + "\n").encode("utf-8")


def write_edge_table(table: Iterable[Edge], path: str | os.PathLike) -> None:
    data = serialize_edge_table(table)
    with open(path, "wb") as fh:
        fh.write(data)


def assign_ids(edges: Iterable[Edge], taken: set[str] | None = None) -> list[Edge]:
    """Re-id edges whose id collides, using the smallest free ordinal suffix."""
    taken = set() if taken is None else taken
    out: list[Edge] = []
    for edge in edges:
        new_id = edge.id
        if new_id in taken:
            ordinal = 1
            while (new_id := make_edge_id(*edge.triple, ordinal)) in taken:
                ordinal += 1
        taken.add(new_id)
        out.append(edge if new_id == edge.id else replace(edge, id=new_id))
    return out


def edges_from_triples(
    triples: Iterable[tuple[str, str, str]],
    source: str,
    labels: dict[str, Sequence[str]] | None = None,
) -> list[Edge]:
    """Build edges for imported triples; repeated triples get ordinal ids."""
    labels = labels or {}
    counts: dict[tuple[str, str, str], int] = {}
    out = []
    for n1, rel, n2 in triples:
        key = (n1, rel, n2)
        ordinal = counts.get(key, 0)
        counts[key] = ordinal + 1
        out.append(
            Edge(
                id=make_edge_id(n1, rel, n2, ordinal),
                node1=n1,
                relation=rel,
                node2=n2,
                node1_label=tuple(labels.get(n1, ())),
                node2_label=tuple(labels.get(n2, ())),
                relation_label=(relation_label(rel),),
                source=(source,),
            )
        )
    return out
