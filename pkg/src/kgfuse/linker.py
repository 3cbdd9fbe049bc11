"""Identity and lexical-unit links between nodes of different sources."""
from __future__ import annotations

import hashlib
import logging
import math
import os
import re
import subprocess
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Protocol, Sequence

import numpy as np

from . import kernels, vocab
from .edge_model import (
    HAS_LEXICAL_UNIT,
    SAME_AS,
    Edge,
    EdgeFormatError,
    EdgeTable,
    make_edge_id,
    relation_label,
)

logger = logging.getLogger(__name__)

METHODS = ("lexical", "table", "embedding")
LINK_SOURCE_PREFIX = "MW"


@dataclass(frozen=True, order=True)
class MappingLink:
    node1: str
    node2: str
    relation: str = SAME_AS
    method: str = "lexical"
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if self.node1 == self.node2:
            raise ValueError(f"self-link on {self.node1!r}")
        if self.relation == SAME_AS and self.node1 > self.node2:
            # canonical orientation for identity links
            a, b = self.node2, self.node1
            object.__setattr__(self, "node1", a)
            object.__setattr__(self, "node2", b)
        if self.method not in METHODS:
            raise ValueError(f"unknown link method {self.method!r}")
        if not 0.0 <= self.confidence <= 1.0 + 1e-12:
            raise ValueError(f"confidence out of range: {self.confidence}")


def normalize_label(text: str) -> str:
    """Trim, collapse internal whitespace, case-fold."""
    return " ".join(text.split()).casefold()


def levenshtein_similarity(a: str, b: str) -> float:
    """``1 - distance / max(len)``; 1.0 for two empty strings.

    >>> levenshtein_similarity("day", "daily")
    0.6
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - kernels.levenshtein_distance(a, b) / longest


# --- lexical matching -------------------------------------------------------

def is_lexical_node(node: str) -> bool:
    """Surface-form nodes: ``/c/<lang>/<term>``, ATOMIC and Roget nodes."""
    if node.startswith("/c/"):
        return len(node.strip("/").split("/")) == 3
    return node.startswith(("at:", "rg:"))


def node_labels(table: Iterable[Edge]) -> dict[str, list[str]]:
    """All labels seen for each node, in first-seen order."""
    labels: dict[str, dict[str, None]] = {}
    for e in table:
        labels.setdefault(e.node1, {}).update(dict.fromkeys(e.node1_label))
        labels.setdefault(e.node2, {}).update(dict.fromkeys(e.node2_label))
    return {n: list(ls) for n, ls in labels.items()}


def link_lexical(table: Iterable[Edge], sources: Iterable[str] = ("AT", "CN", "RG")) -> list[MappingLink]:
    wanted = set(sources)
    by_label: dict[str, set[str]] = defaultdict(set)
    for node, labels in node_labels(table).items():
        if not is_lexical_node(node) or vocab.node_source(node) not in wanted:
            continue
        for lab in labels:
            key = normalize_label(lab)
            if key:
                by_label[key].add(node)
    pairs: set[tuple[str, str]] = set()
    for nodes in by_label.values():
        ordered = sorted(nodes)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                if vocab.node_source(a) != vocab.node_source(b):
                    pairs.add((a, b))
    return [MappingLink(a, b, SAME_AS, "lexical", 1.0) for a, b in sorted(pairs)]


# --- alignment tables -------------------------------------------------------

def _with_ns(value: str, ns: str | None) -> str:
    if not ns or value.startswith(f"{ns}:") or value.startswith("/"):
        return value
    return f"{ns}:{value}"


def link_table(
    alignment: str | os.PathLike,
    left_ns: str | None = None,
    right_ns: str | None = None,
    nodes: set[str] | None = None,
    relation: str = SAME_AS,
    counts: Counter | None = None,
) -> list[MappingLink]:
    """One link per alignment row whose endpoints both exist in ``nodes``.

    Rows with a missing endpoint are tallied under ``counts["missing_endpoint"]``.
    """
    counts = Counter() if counts is None else counts
    links: set[MappingLink] = set()
    with open(alignment, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 2 or not cells[0].strip() or not cells[1].strip():
                raise EdgeFormatError("alignment rows need exactly two node ids", lineno)
            left = _with_ns(cells[0].strip(), left_ns)
            right = _with_ns(cells[1].strip(), right_ns)
            if nodes is not None and (left not in nodes or right not in nodes):
                counts["missing_endpoint"] += 1
                continue
            if left == right:
                counts["self_link"] += 1
                continue
            links.add(MappingLink(left, right, relation, "table", 1.0))
    return sorted(links)


# --- FrameNet corpus grounding ----------------------------------------------

def fe_node_id(fe: str) -> str:
    return "fn:fe:" + "_".join(fe.lower().split())


def link_framenet_corpus(annotations: str | os.PathLike, grounding_lexicon: str | os.PathLike) -> list[MappingLink]:
    """Treat annotated FE words as lexical units of that FE, grounded via the lexicon."""
    lexicon: dict[str, str] = {}
    with open(grounding_lexicon, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise EdgeFormatError("lexicon rows need word and node", lineno)
            lexicon[normalize_label(cells[0])] = cells[1].strip()
    links: set[MappingLink] = set()
    with open(annotations, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 3:
                raise EdgeFormatError("annotation rows need frame, FE and word", lineno)
            node = lexicon.get(normalize_label(cells[2]))
            if node is None:
                continue
            links.add(MappingLink(fe_node_id(cells[1]), node, HAS_LEXICAL_UNIT, "lexical", 1.0))
    return sorted(links)


# --- embedding links --------------------------------------------------------

class TextEncoder(Protocol):
    dimension: int

    def encode(self, text: str) -> np.ndarray: ...


class HashingEncoder:
    """Deterministic text encoder: character n-gram counts times a hash-seeded projection.

    Each n-gram (with ``<``/``>`` word boundary markers) owns a Gaussian row
    whose generator is seeded from ``blake2b(seed, ngram)``, so vectors are
    stable across processes and platforms.
    """

    def __init__(self, dimension: int = 128, ngram_range: tuple[int, int] = (2, 4), seed: int = 0):
        self.dimension = dimension
        self.ngram_range = ngram_range
        self.seed = seed
        self._row = lru_cache(maxsize=65536)(self._make_row)

    def _make_row(self, gram: str) -> np.ndarray:
        digest = hashlib.blake2b(f"{self.seed}\x00{gram}".encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return rng.standard_normal(self.dimension)

    def ngrams(self, text: str) -> Counter:
        grams: Counter = Counter()
        lo, hi = self.ngram_range
        for word in normalize_label(text).split():
            padded = f"<{word}>"
            for n in range(lo, hi + 1):
                for i in range(len(padded) - n + 1):
                    grams[padded[i:i + n]] += 1
        return grams

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension)
        grams = self.ngrams(text)
        for gram in sorted(grams):
            vec += grams[gram] * self._row(gram)
        return vec


class PrecomputedEncoder:
    """Looks vectors up in a ``text<TAB>v1 v2 ...`` file written by an external model."""

    def __init__(self, path: str | os.PathLike):
        self._vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                text, _, values = line.rstrip("\n").partition("\t")
                self._vectors[text] = np.array([float(v) for v in values.split()])
        dims = {v.shape[0] for v in self._vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"inconsistent vector dimensions in {path}: {sorted(dims)}")
        self.dimension = dims.pop() if dims else 0

    def encode(self, text: str) -> np.ndarray:
        try:
            return self._vectors[text]
        except KeyError:
            raise EncoderError(text) from None


class SubprocessEncoder:
    """Runs ``command`` once per text: text on stdin, whitespace-separated floats on stdout."""

    def __init__(self, command: Sequence[str], dimension: int):
        self.command = list(command)
        self.dimension = dimension

    def encode(self, text: str) -> np.ndarray:
        proc = subprocess.run(self.command, input=text, capture_output=True, text=True)
        if proc.returncode != 0:
            raise EncoderError(text)
        vec = np.array([float(v) for v in proc.stdout.split()])
        if vec.shape[0] != self.dimension:
            raise EncoderError(text)
        return vec


class EncoderError(RuntimeError):
    def __init__(self, text: str):
        self.text = text
        super().__init__(f"encoder failed on text: {text!r}")


class CandidateIndex(Protocol):
    def candidates(self, text: str, k: int) -> list[tuple[str, str]]: ...


_TOKEN = re.compile(r"[a-z0-9]+")


class InvertedIndex:
    """Token-overlap candidate retrieval over ``(node, description)`` records.

    Candidates are ranked by the number of shared tokens weighted by inverse
    document frequency, ties by node id.
    """

    def __init__(self, records: Iterable[tuple[str, str]]):
        self.descriptions: dict[str, str] = {}
        self._postings: dict[str, set[str]] = defaultdict(set)
        for node, desc in records:
            self.descriptions[node] = desc
            for tok in set(_TOKEN.findall(desc.casefold())):
                self._postings[tok].add(node)

    def candidates(self, text: str, k: int) -> list[tuple[str, str]]:
        n = max(len(self.descriptions), 1)
        scores: dict[str, float] = defaultdict(float)
        for tok in set(_TOKEN.findall(text.casefold())):
            posting = self._postings.get(tok)
            if not posting:
                continue
            idf = math.log(1.0 + n / len(posting))
            for node in posting:
                scores[node] += idf
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return [(node, self.descriptions[node]) for node, _ in ranked]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


def read_judgments(path: str | os.PathLike) -> dict[tuple[str, str], bool]:
    """Replayable accept/reject decisions: ``node1  node2  accept|reject``."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            if len(cells) != 3 or cells[2] not in ("accept", "reject"):
                raise EdgeFormatError("judgment rows need node1, node2, accept|reject", lineno)
            a, b = sorted((cells[0], cells[1]))
            out[(a, b)] = cells[2] == "accept"
    return out


def link_by_embedding(
    queries: Iterable[tuple[str, str]],
    candidates_index: CandidateIndex,
    encoder: TextEncoder,
    k: int = 50,
    threshold: float = 0.0,
    judgments: dict[tuple[str, str], bool] | None = None,
) -> list[MappingLink]:
    """Link each query node to its most cosine-similar candidate.

    Ties go to the smaller node id. Links whose cosine is below ``threshold``
    or that ``judgments`` rejects are dropped.
    """
    if k < 1:
        raise ValueError("k must be positive")
    links = []
    for node, description in queries:
        cands = [(c, d) for c, d in candidates_index.candidates(description, k) if c != node]
        if not cands:
            continue
        qv = _encode(encoder, description)
        best: tuple[float, str] | None = None
        for cand, desc in cands:
            sim = cosine(qv, _encode(encoder, desc))
            if best is None or sim > best[0] or (sim == best[0] and cand < best[1]):
                best = (sim, cand)
        sim, cand = best
        if sim < threshold or sim < 0.0:
            continue
        link = MappingLink(node, cand, SAME_AS, "embedding", min(sim, 1.0))
        if judgments is not None and not judgments.get((link.node1, link.node2), True):
            continue
        links.append(link)
    return sorted(links)


def _encode(encoder: TextEncoder, text: str) -> np.ndarray:
    try:
        vec = np.asarray(encoder.encode(text), dtype=np.float64)
    except EncoderError:
        raise
    except Exception as exc:
        raise EncoderError(text) from exc
    if not np.all(np.isfinite(vec)):
        raise EncoderError(text)
    return vec


# --- link <-> edge conversion -----------------------------------------------

def link_source_tag(link: MappingLink) -> str:
    return f"{LINK_SOURCE_PREFIX}:{link.method}:{link.confidence:.6f}"


def links_to_table(links: Iterable[MappingLink], labels: dict[str, Sequence[str]] | None = None) -> EdgeTable:
    labels = labels or {}
    edges = []
    seen: Counter = Counter()
    for link in sorted(set(links)):
        key = (link.node1, link.relation, link.node2)
        ordinal = seen[key]
        seen[key] += 1
        edges.append(
            Edge(
                id=make_edge_id(*key, ordinal),
                node1=link.node1,
                relation=link.relation,
                node2=link.node2,
                node1_label=tuple(labels.get(link.node1, ())),
                node2_label=tuple(labels.get(link.node2, ())),
                relation_label=(relation_label(link.relation),),
                source=(link_source_tag(link),),
            )
        )
    return EdgeTable(edges)


def table_to_links(table: Iterable[Edge]) -> list[MappingLink]:
    out = []
    for e in table:
        if e.relation not in (SAME_AS, HAS_LEXICAL_UNIT):
            continue
        method, confidence = "table", 1.0
        for tag in e.source:
            parts = tag.split(":")
            if len(parts) == 3 and parts[0] == LINK_SOURCE_PREFIX:
                method, confidence = parts[1], float(parts[2])
                break
        out.append(MappingLink(e.node1, e.node2, e.relation, method, confidence))
    return out
