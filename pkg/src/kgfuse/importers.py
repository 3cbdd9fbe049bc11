"""Per-source importers producing canonical edge tables.

Input formats are small tab-separated files that keep the fields of each
source's public dump that the import needs. Blank lines and lines starting
with ``#`` are ignored everywhere.

ConceptNet
    ConceptNet assertions layout, 5 columns, no header:
    ``assertion-uri  relation  start  end  json``. ``surfaceText`` in the JSON
    becomes the edge sentence (``[[`` / ``]]`` markers removed).
ATOMIC
    ``event  relation  target`` (optional header row).
FrameNet
    header ``node1  edge_type  node2  node1_label  node2_label``; labels may be
    empty, in which case they are derived from the node id.
Roget
    ``word1  relation  word2`` with relation ``synonym`` or ``antonym``.
Visual Genome
    typed rows: ``object  <obj-id>  <synset or empty>  <name>``,
    ``relationship  <subj-id>  <predicate>  <obj-id>``,
    ``attribute  <obj-id>  <attribute>  [<POS>]``. POS missing from the row is
    looked up in the auxiliary ``attribute  POS`` lexicon.
Wikidata-CS
    header ``node1  property  node2  node1_label  node2_label``; the auxiliary
    table maps ``property  relation``.
WordNet
    ``synset1  relation  synset2`` with relation one of ``hypernym``,
    ``part_holonym``, ``member_holonym``, ``substance_meronym``.
"""
from __future__ import annotations

import json
import logging
import os
import re
from collections import Counter
from typing import Callable, Iterator

from .edge_model import (
    MAY_HAVE_PROPERTY,
    Edge,
    EdgeFormatError,
    EdgeTable,
    make_edge_id,
    relation_label,
)
from . import vocab

logger = logging.getLogger(__name__)

PathLike = str | os.PathLike


class SourceFormatError(EdgeFormatError):
    """A source dump row that cannot be imported."""


def _rows(path: PathLike, header: tuple[str, ...] | None = None) -> Iterator[tuple[int, list[str]]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    for lineno, blob in enumerate(raw.split(b"\n"), start=1):
        try:
            line = blob.decode("utf-8").rstrip("\r")
        except UnicodeDecodeError:
            raise SourceFormatError("invalid UTF-8", lineno) from None
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if header is not None and tuple(c.strip() for c in cells) == header:
            continue
        yield lineno, cells


def _need(cells: list[str], n: int, lineno: int, at_most: int | None = None) -> None:
    if len(cells) < n or len(cells) > (at_most if at_most is not None else n):
        raise SourceFormatError(f"expected {n} columns, found {len(cells)}", lineno)


class _Builder:
    """Accumulates edges for one source, numbering repeated triples."""

    def __init__(self, source: str):
        self.source = source
        self.edges: list[Edge] = []
        self._ordinals: Counter = Counter()

    def add(self, node1, relation, node2, label1=(), label2=(), rel_label=None, sentence=""):
        key = (node1, relation, node2)
        ordinal = self._ordinals[key]
        self._ordinals[key] += 1
        self.edges.append(
            Edge(
                id=make_edge_id(node1, relation, node2, ordinal),
                node1=node1,
                relation=relation,
                node2=node2,
                node1_label=_dedup(label1),
                node2_label=_dedup(label2),
                relation_label=(rel_label or relation_label(relation),),
                source=(self.source,),
                sentence=sentence,
            )
        )

    def table(self) -> EdgeTable:
        return EdgeTable(self.edges)


def _dedup(values) -> tuple[str, ...]:
    return tuple(dict.fromkeys(v for v in values if v))


# --- ConceptNet -------------------------------------------------------------

_CN_URI = re.compile(r"^/c/[a-z]{2,3}/[^/\s]+(/[^\s]*)?$")


def conceptnet_label(uri: str) -> str:
    """Surface text of a ConceptNet concept URI.

    >>> conceptnet_label("/c/en/tropical_rainforest")
    'tropical rainforest'
    >>> conceptnet_label("/c/en/cat/n/wn/animal")
    'cat'
    """
    return uri.split("/")[3].replace("_", " ")


def import_conceptnet(dump: PathLike, relations: frozenset[str] | None = None) -> EdgeTable:
    allowed = vocab.conceptnet_relations() if relations is None else relations
    out = _Builder("CN")
    for lineno, cells in _rows(dump):
        _need(cells, 5, lineno, at_most=5)
        _, rel, start, end, meta = cells
        if rel not in allowed:
            raise SourceFormatError(f"unknown ConceptNet relation {rel!r}", lineno)
        for uri in (start, end):
            if not _CN_URI.match(uri):
                raise SourceFormatError(f"malformed concept URI {uri!r}", lineno)
        sentence = ""
        if meta.strip():
            try:
                info = json.loads(meta)
            except json.JSONDecodeError as exc:
                raise SourceFormatError(f"bad JSON metadata: {exc.msg}", lineno) from None
            sentence = (info.get("surfaceText") or "").replace("[[", "").replace("]]", "")
        out.add(start, rel, end, [conceptnet_label(start)], [conceptnet_label(end)], sentence=sentence)
    return out.table()


# --- ATOMIC -----------------------------------------------------------------

_PERSON_TOKENS = {"personx", "persony", "personz"}


def normalize_atomic_label(text: str) -> str:
    """Strip person placeholders, possessives and blanks from an ATOMIC phrase.

    >>> normalize_atomic_label("personX accepts personY's invitation")
    'accepts invitation'
    >>> normalize_atomic_label("personX plays ___ piano")
    'plays piano'
    """
    kept = []
    for token in text.lower().split():
        if token.endswith("'s"):
            token = token[:-2]
        if not token or token in _PERSON_TOKENS or set(token) == {"_"}:
            continue
        kept.append(token)
    return " ".join(kept)


def atomic_node_id(text: str) -> str:
    return "at:" + "_".join(text.lower().split())


def import_atomic(dump: PathLike) -> EdgeTable:
    rel_labels = vocab.atomic_relations()
    out = _Builder("AT")
    for lineno, cells in _rows(dump, header=("event", "relation", "target")):
        _need(cells, 3, lineno)
        event, rel, target = (c.strip() for c in cells)
        if rel not in rel_labels:
            raise SourceFormatError(f"unknown ATOMIC relation {rel!r}", lineno)
        if not event or not target:
            raise SourceFormatError("empty event or target", lineno)
        out.add(
            atomic_node_id(event),
            vocab.atomic_relation_id(rel),
            atomic_node_id(target),
            [event, normalize_atomic_label(event)],
            [target, normalize_atomic_label(target)],
            rel_label=rel_labels[rel],
        )
    return out.table()


# --- FrameNet ---------------------------------------------------------------

def _id_label(node: str) -> str:
    return node.rsplit(":", 1)[-1].replace("_", " ")


def import_framenet(dump: PathLike, relation_map: dict[str, tuple[str, bool]] | None = None) -> EdgeTable:
    mapping = vocab.framenet_relation_map() if relation_map is None else relation_map
    out = _Builder("FN")
    header = ("node1", "edge_type", "node2", "node1_label", "node2_label")
    for lineno, cells in _rows(dump, header=header):
        _need(cells, 3, lineno, at_most=5)
        cells = cells + [""] * (5 - len(cells))
        n1, etype, n2, l1, l2 = (c.strip() for c in cells)
        if etype not in mapping:
            raise SourceFormatError(f"unmapped FrameNet edge type {etype!r}", lineno)
        for node in (n1, n2):
            if not node.startswith("fn:"):
                raise SourceFormatError(f"FrameNet node without fn: prefix: {node!r}", lineno)
        l1 = l1 or _id_label(n1)
        l2 = l2 or _id_label(n2)
        rel, reverse = mapping[etype]
        if reverse:
            n1, n2, l1, l2 = n2, n1, l2, l1
        out.add(n1, rel, n2, [l1], [l2])
    return out.table()


# --- Roget ------------------------------------------------------------------

_ROGET = {"synonym": "/r/Synonym", "antonym": "/r/Antonym"}


def roget_node_id(word: str) -> str:
    return "rg:" + "_".join(word.lower().split())


def import_roget(dump: PathLike) -> EdgeTable:
    out = _Builder("RG")
    for lineno, cells in _rows(dump):
        _need(cells, 3, lineno)
        w1, kind, w2 = (c.strip() for c in cells)
        rel = _ROGET.get(kind.lower())
        if rel is None:
            raise SourceFormatError(f"Roget relation must be synonym or antonym, got {kind!r}", lineno)
        out.add(roget_node_id(w1), rel, roget_node_id(w2), [w1], [w2])
    return out.table()


# --- Visual Genome ----------------------------------------------------------

_POS = {"adj": "ADJ", "a": "ADJ", "j": "ADJ", "adjective": "ADJ", "verb": "VERB", "v": "VERB"}


def synset_label(synset: str) -> str:
    return synset.split(".")[0].replace("_", " ")


def _read_pos_lexicon(path: PathLike | None) -> dict[str, str]:
    lexicon: dict[str, str] = {}
    if path is None:
        return lexicon
    for lineno, cells in _rows(path, header=("attribute", "pos")):
        _need(cells, 2, lineno)
        lexicon[cells[0].strip().lower()] = cells[1].strip()
    return lexicon


def import_visualgenome(
    dump: PathLike, synset_map: PathLike | None = None, counts: Counter | None = None
) -> EdgeTable:
    """Import a scene-graph dump.

    ``synset_map`` is the attribute POS lexicon used for attribute rows that
    carry no POS. Rows that cannot be placed (object without synset, unknown
    POS) are dropped and tallied in ``counts``.
    """
    counts = Counter() if counts is None else counts
    lexicon = _read_pos_lexicon(synset_map)
    objects: dict[str, tuple[str, str]] = {}
    pending: list[tuple[int, list[str]]] = []
    for lineno, cells in _rows(dump):
        kind = cells[0].strip()
        if kind == "object":
            _need(cells, 4, lineno)
            objects[cells[1].strip()] = (cells[2].strip(), cells[3].strip())
        elif kind in ("relationship", "attribute"):
            pending.append((lineno, cells))
        else:
            raise SourceFormatError(f"unknown Visual Genome row type {kind!r}", lineno)

    out = _Builder("VG")

    def resolve(obj_id: str, lineno: int) -> tuple[str, str] | None:
        if obj_id not in objects:
            raise SourceFormatError(f"reference to undeclared object {obj_id!r}", lineno)
        synset, name = objects[obj_id]
        return (synset, name) if synset else None

    for lineno, cells in pending:
        if cells[0].strip() == "relationship":
            _need(cells, 4, lineno)
            subj = resolve(cells[1].strip(), lineno)
            obj = resolve(cells[3].strip(), lineno)
            if subj is None or obj is None:
                counts["object_without_synset"] += 1
                continue
            predicate = cells[2].strip()
            out.add(
                f"wn:{subj[0]}", "/r/LocatedNear", f"wn:{obj[0]}",
                [synset_label(subj[0])], [synset_label(obj[0])],
                sentence=f"{subj[1]} {predicate} {obj[1]}",
            )
        else:
            _need(cells, 3, lineno, at_most=4)
            subj = resolve(cells[1].strip(), lineno)
            if subj is None:
                counts["object_without_synset"] += 1
                continue
            attr = cells[2].strip()
            pos_raw = cells[3].strip() if len(cells) == 4 and cells[3].strip() else lexicon.get(attr.lower(), "")
            pos = _POS.get(pos_raw.lower())
            if pos is None:
                counts["attribute_unknown_pos"] += 1
                continue
            rel = MAY_HAVE_PROPERTY if pos == "ADJ" else "/r/CapableOf"
            out.add(
                f"wn:{subj[0]}", rel, "/c/en/" + "_".join(attr.lower().split()),
                [synset_label(subj[0])], [attr.lower()],
                sentence=f"{attr} {subj[1]}",
            )
    dropped = sum(counts.values())
    if dropped:
        logger.warning("visual genome import skipped %d rows: %s", dropped, dict(counts))
    return out.table()


# --- Wikidata-CS ------------------------------------------------------------

def _wd(node: str) -> str:
    return node if node.startswith("wd:") else f"wd:{node}"


def read_property_map(path: PathLike) -> dict[str, str]:
    mapping = {}
    for lineno, cells in _rows(path, header=("property", "relation")):
        _need(cells, 2, lineno)
        prop, rel = cells[0].strip(), cells[1].strip()
        if rel not in vocab.conceptnet_relations():
            raise SourceFormatError(f"property {prop} mapped to non-ConceptNet relation {rel!r}", lineno)
        mapping[prop.removeprefix("wd:")] = rel
    return mapping


def import_wikidata_cs(dump: PathLike, property_map: PathLike, counts: Counter | None = None) -> EdgeTable:
    counts = Counter() if counts is None else counts
    mapping = read_property_map(property_map)
    out = _Builder("WD")
    header = ("node1", "property", "node2", "node1_label", "node2_label")
    for lineno, cells in _rows(dump, header=header):
        _need(cells, 3, lineno, at_most=5)
        cells = cells + [""] * (5 - len(cells))
        n1, prop, n2, l1, l2 = (c.strip() for c in cells)
        rel = mapping.get(prop.removeprefix("wd:"))
        if rel is None:
            counts["unmapped_property"] += 1
            continue
        out.add(_wd(n1), rel, _wd(n2), [l1], [l2])
    if counts:
        logger.warning("wikidata import dropped %d statements: %s", sum(counts.values()), dict(counts))
    return out.table()


# --- WordNet ----------------------------------------------------------------

def import_wordnet(dump: PathLike) -> EdgeTable:
    mapping = vocab.wordnet_relation_map()
    out = _Builder("WN")
    for lineno, cells in _rows(dump):
        _need(cells, 3, lineno)
        s1, kind, s2 = (c.strip() for c in cells)
        rel = mapping.get(kind)
        if rel is None:
            raise SourceFormatError(f"unsupported WordNet relation {kind!r}", lineno)
        out.add(f"wn:{s1}", rel, f"wn:{s2}", [synset_label(s1)], [synset_label(s2)])
    return out.table()


IMPORTERS: dict[str, Callable[..., EdgeTable]] = {
    "conceptnet": import_conceptnet,
    "atomic": import_atomic,
    "framenet": import_framenet,
    "roget": import_roget,
    "visualgenome": import_visualgenome,
    "wikidata": import_wikidata_cs,
    "wordnet": import_wordnet,
}

SOURCE_OF_IMPORTER = {
    "conceptnet": "CN",
    "atomic": "AT",
    "framenet": "FN",
    "roget": "RG",
    "visualgenome": "VG",
    "wikidata": "WD",
    "wordnet": "WN",
}


def import_source(name: str, path: PathLike, aux: PathLike | None = None, counts: Counter | None = None) -> EdgeTable:
    if name not in IMPORTERS:
        raise ValueError(f"unknown source {name!r}; choose from {', '.join(IMPORTERS)}")
    if name == "wikidata":
        if aux is None:
            raise ValueError("the wikidata importer needs a property mapping table (--aux)")
        return import_wikidata_cs(path, aux, counts=counts)
    if name == "visualgenome":
        return import_visualgenome(path, aux, counts=counts)
    return IMPORTERS[name](path)
