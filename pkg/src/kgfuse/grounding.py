"""Ground question/answer text to graph nodes and collect connecting evidence edges."""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from typing import Iterable

from . import vocab
from .edge_model import Edge
from .graph import Graph

_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class QAItem:
    question: str
    answers: tuple[str, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.answers, tuple):
            object.__setattr__(self, "answers", tuple(self.answers))
        if not self.answers:
            raise ValueError("a QA item needs at least one answer")


def read_items(path: str | os.PathLike) -> list[QAItem]:
    """JSON lines: ``{"question": ..., "answers": [...]}``."""
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                items.append(QAItem(obj["question"], tuple(obj["answers"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad QA item ({exc})") from None
    return items


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def matched_spans(
    text: str, graph: Graph, max_ngram: int = 3, stopwords: frozenset[str] | None = None
) -> list[tuple[int, int, str]]:
    """``(start, end, ngram)`` for every token n-gram that is a node label.

    n-grams that begin or end with a stopword are not considered.
    """
    stop = vocab.stopwords() if stopwords is None else stopwords
    tokens = tokenize(text)
    spans = []
    for n in range(1, max_ngram + 1):
        for i in range(len(tokens) - n + 1):
            gram = tokens[i:i + n]
            if gram[0] in stop or gram[-1] in stop:
                continue
            phrase = " ".join(gram)
            if phrase in graph.label_index:
                spans.append((i, i + n, phrase))
    return spans


def extract_concepts(
    text: str,
    graph: Graph,
    max_ngram: int = 3,
    suppress_subspans: bool = True,
    stopwords: frozenset[str] | None = None,
) -> set[str]:
    """Nodes whose labels match n-grams of ``text``.

    With ``suppress_subspans`` a match strictly inside a longer match is
    dropped ("tropical rainforest" hides "tropical" and "rainforest").
    """
    spans = matched_spans(text, graph, max_ngram, stopwords)
    if suppress_subspans:
        spans = [
            (s, e, p) for s, e, p in spans
            if not any(s2 <= s and e <= e2 and (e2 - s2) > (e - s) for s2, e2, _ in spans)
        ]
    nodes: set[str] = set()
    for _, _, phrase in spans:
        nodes.update(graph.label_index[phrase])
    return nodes


@dataclass
class GroundingResult:
    item: QAItem
    per_answer: dict[str, list[Edge]] = field(default_factory=dict)

    @property
    def triples(self) -> list[Edge]:
        seen: dict[str, Edge] = {}
        for edges in self.per_answer.values():
            for e in edges:
                seen.setdefault(e.id, e)
        return sorted(seen.values(), key=lambda e: e.id)

    @property
    def counts(self) -> dict[str, int]:
        return {a: len(edges) for a, edges in self.per_answer.items()}

    @property
    def total(self) -> int:
        return sum(len(edges) for edges in self.per_answer.values())


def retrieve_evidence(
    graph: Graph, item: QAItem, max_ngram: int = 3, stopwords: frozenset[str] | None = None
) -> GroundingResult:
    """Edges (either direction) joining a question concept to an answer concept.

    Both sides are grounded on every matched n-gram, so a multiword answer
    also contributes its component words. Matching on every span keeps the
    result monotone: a larger graph never yields fewer triples.
    """
    question = extract_concepts(item.question, graph, max_ngram, False, stopwords)
    result = GroundingResult(item)
    for answer in dict.fromkeys(item.answers):
        ans = extract_concepts(answer, graph, max_ngram, False, stopwords)
        hits = [
            e for e in graph.edges
            if (e.node1 in question and e.node2 in ans) or (e.node1 in ans and e.node2 in question)
        ]
        result.per_answer[answer] = sorted({e.id: e for e in hits}.values(), key=lambda e: e.id)
    return result


def count_dataset(
    graph: Graph, items: Iterable[QAItem], max_ngram: int = 3, stopwords: frozenset[str] | None = None
) -> dict[str, int]:
    """Totals over a split: per-answer counts summed, and per-question unions summed."""
    questions = triples = unique = 0
    for item in items:
        res = retrieve_evidence(graph, item, max_ngram, stopwords)
        questions += 1
        triples += res.total
        unique += len(res.triples)
    return {"questions": questions, "triples": triples, "triples_question_union": unique}
