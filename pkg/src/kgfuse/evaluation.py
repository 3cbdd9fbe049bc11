"""Word-association evaluation of embeddings: MAP and NDCG against ranked gold lists."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .embeddings import EmbeddingTable, label_vector, nearest_neighbors
from .graph import Graph
from .linker import levenshtein_similarity, normalize_label


@dataclass(frozen=True)
class AssociationBenchmark:
    entries: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        for stimulus, gold in self.entries:
            if not gold:
                raise ValueError(f"empty gold list for stimulus {stimulus!r}")
            keys = [normalize_label(g) for g in gold]
            if len(set(keys)) != len(keys):
                raise ValueError(f"duplicate gold associations for stimulus {stimulus!r}")

    @classmethod
    def read(cls, path: str | os.PathLike) -> "AssociationBenchmark":
        """``stimulus<TAB>assoc1|assoc2|...`` per line, gold in descending frequency."""
        entries = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                stimulus, sep, gold = line.partition("\t")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected stimulus<TAB>associations")
                entries.append((stimulus.strip(), tuple(g.strip() for g in gold.split("|") if g.strip())))
        return cls(tuple(entries))


@dataclass
class EvalConfig:
    levenshtein_threshold: float | None = None
    gain: str = "graded"  # or "binary"


def average_precision(gold: Iterable[str], predicted: Sequence[str]) -> float:
    """Sum of precision@i at each first hit on a gold item, divided by |gold|.

    >>> average_precision({"a", "b"}, ["x", "a"])
    0.25
    """
    gold_keys = {normalize_label(g) for g in gold}
    if not gold_keys:
        raise ValueError("gold set is empty")
    seen: set[str] = set()
    hits = 0
    total = 0.0
    for i, item in enumerate(predicted, start=1):
        key = normalize_label(item)
        if key in gold_keys and key not in seen:
            seen.add(key)
            hits += 1
            total += hits / i
    return total / len(gold_keys)


def _gains(gold: Sequence[str], gain: str) -> dict[str, float]:
    n = len(gold)
    out: dict[str, float] = {}
    for rank, item in enumerate(gold):
        out.setdefault(normalize_label(item), float(n - rank) if gain == "graded" else 1.0)
    return out


def ndcg(gold: Sequence[str], predicted: Sequence[str], gain: str = "graded") -> float:
    """NDCG with gain ``|gold| - gold_rank`` (or 1 for ``gain="binary"``), log2 discount."""
    if not gold:
        raise ValueError("gold list is empty")
    gains = _gains(gold, gain)
    ideal = sorted(gains.values(), reverse=True)
    idcg = sum(g / math.log2(i + 1) for i, g in enumerate(ideal, start=1))
    seen: set[str] = set()
    dcg = 0.0
    for i, item in enumerate(predicted, start=1):
        key = normalize_label(item)
        if key in gains and key not in seen:
            seen.add(key)
            dcg += gains[key] / math.log2(i + 1)
    return dcg / idcg


def passes_filter(stimulus: str, candidate: str, threshold: float | None) -> bool:
    """False when the candidate is more similar than ``threshold`` to the stimulus."""
    if threshold is None:
        return True
    return levenshtein_similarity(normalize_label(stimulus), normalize_label(candidate)) <= threshold


def predict_associations(
    table: EmbeddingTable, graph: Graph, stimulus: str, k: int, config: EvalConfig | None = None
) -> list[str]:
    """Labels of the stimulus's nearest neighbors, at most ``k``.

    Nodes carrying the stimulus label are excluded; with a Levenshtein
    threshold ``t`` set, candidates more similar than ``t`` to the stimulus
    are dropped. Each node contributes its first label, repeats are skipped.
    """
    config = config or EvalConfig()
    query = label_vector(table, graph, stimulus)
    own = set(graph.nodes_with_label(stimulus))
    out: list[str] = []
    seen: set[str] = set()
    for node, _ in nearest_neighbors(table, query, len(table), exclude=own):
        label = graph.first_label(node)
        if not label:
            continue
        key = normalize_label(label)
        if key in seen:
            continue
        if not passes_filter(stimulus, label, config.levenshtein_threshold):
            continue
        seen.add(key)
        out.append(label)
        if len(out) == k:
            break
    return out


@dataclass
class EvalReport:
    map: float | None
    ndcg: float | None
    evaluated: int
    skipped: int
    rows: list[dict] = field(default_factory=list)
    skipped_stimuli: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "MAP": self.map,
            "NDCG": self.ndcg,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "skipped_stimuli": self.skipped_stimuli,
            "per_stimulus": self.rows,
        }


def evaluate(
    table: EmbeddingTable, graph: Graph, bench: AssociationBenchmark, config: EvalConfig | None = None
) -> EvalReport:
    config = config or EvalConfig()
    if not bench.entries:
        raise ValueError("benchmark has no entries")
    rows, skipped = [], []
    for stimulus, gold in sorted(bench.entries):
        try:
            predicted = predict_associations(table, graph, stimulus, len(gold), config)
        except KeyError:
            skipped.append(stimulus)
            continue
        rows.append(
            {
                "stimulus": stimulus,
                "gold": list(gold),
                "predicted": predicted,
                "AP": average_precision(gold, predicted),
                "NDCG": ndcg(gold, predicted, config.gain),
            }
        )
    n = len(rows)
    return EvalReport(
        map=math.fsum(r["AP"] for r in rows) / n if n else None,
        ndcg=math.fsum(r["NDCG"] for r in rows) / n if n else None,
        evaluated=n,
        skipped=len(skipped),
        rows=rows,
        skipped_stimuli=skipped,
    )
