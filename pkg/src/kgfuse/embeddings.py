"""Graph embeddings (TransE, DistMult, ComplEx, RESCAL), text embeddings and neighbor search.

All four graph models use a dot comparator: the head is transformed by the
relation and compared to the tail by inner product.

=========  =========================================
TransE     ``(h + r) . t``
DistMult   ``(h * r) . t``
ComplEx    ``Re(<h, r, conj(t)>)``, first half of each vector real, second half imaginary
RESCAL     ``h^T R t`` with one d x d matrix per relation
=========  =========================================

Training minimises the logistic loss ``softplus(-y * score)`` with plain SGD
over positives (y = +1) and uniformly corrupted negatives (y = -1).
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .graph import Graph
from .linker import TextEncoder, levenshtein_similarity, normalize_label

logger = logging.getLogger(__name__)

MODELS = ("transe", "distmult", "complex", "rescal")


class TrainingDivergedError(RuntimeError):
    pass


def _check_dims(model: str, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> None:
    if model not in kernels.MODEL_CODES:
        raise ValueError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    d = h.shape[0]
    if h.ndim != 1 or t.shape != h.shape:
        raise ValueError(f"head and tail must be vectors of equal length, got {h.shape} and {t.shape}")
    expected = (d, d) if model == "rescal" else (d,)
    if r.shape != expected:
        raise ValueError(f"{model} relation parameters must have shape {expected}, got {r.shape}")
    if model == "complex" and d % 2:
        raise ValueError("complex embeddings need an even dimension")


def score(model: str, h, r, t) -> float:
    h, r, t = (np.asarray(x, dtype=np.float64) for x in (h, r, t))
    _check_dims(model, h, r, t)
    return kernels.score_grads(kernels.MODEL_CODES[model], h, r, t)[0]


def score_and_grad(model: str, h, r, t):
    """``(score, d/dh, d/dr, d/dt)`` at the given parameters."""
    h, r, t = (np.asarray(x, dtype=np.float64) for x in (h, r, t))
    _check_dims(model, h, r, t)
    return kernels.score_grads(kernels.MODEL_CODES[model], h, r, t)


def logistic_loss(s, y):
    """``softplus(-y * s)``, stable for large ``|s|``."""
    return np.logaddexp(0.0, -y * np.asarray(s, dtype=np.float64))


def loss_and_grad(model: str, h, r, t, y: float):
    s, gh, gr, gt = score_and_grad(model, h, r, t)
    coeff = -y * (1.0 / (1.0 + math.exp(y * s)))
    return float(logistic_loss(s, y)), coeff * gh, coeff * gr, coeff * gt


@dataclass
class TrainConfig:
    model: str = "transe"
    dimension: int = 100
    learning_rate: float = 0.1
    loss: str = "logistic"
    comparator: str = "dot"
    epochs: int = 100
    negatives_per_positive: int = 10
    seed: int = 0
    shards: int = 1  # >1: lock-free parallel updates, not byte-reproducible

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.loss != "logistic" or self.comparator != "dot":
            raise ValueError("only the logistic loss with a dot comparator is implemented")
        if self.dimension < 1 or self.epochs < 0 or self.negatives_per_positive < 0:
            raise ValueError("dimension must be positive; epochs and negatives non-negative")
        if self.shards < 1:
            raise ValueError("shards must be at least 1")
        if self.model == "complex" and self.dimension % 2:
            raise ValueError("complex embeddings need an even dimension")


@dataclass
class EmbeddingTable:
    model: str
    dimension: int
    nodes: list[str]
    vectors: np.ndarray
    relations: list[str] = field(default_factory=list)
    relation_params: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._index = {n: i for i, n in enumerate(self.nodes)}
        if self.vectors.shape != (len(self.nodes), self.dimension):
            raise ValueError("vector matrix shape does not match nodes x dimension")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding table contains non-finite values")

    def __contains__(self, node: str) -> bool:
        return node in self._index

    def __len__(self) -> int:
        return len(self.nodes)

    def vector(self, node: str) -> np.ndarray:
        return self.vectors[self._index[node]]

    @property
    def node_vectors(self) -> dict[str, np.ndarray]:
        return {n: self.vectors[i] for i, n in enumerate(self.nodes)}

    def relation_vector(self, relation: str) -> np.ndarray:
        return self.relation_params[self.relations.index(relation)]

    # persistence: TSV of vectors plus a JSON sidecar with metadata and relation params

    def save(self, path: str | os.PathLike) -> None:
        path = os.fspath(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for node, row in zip(self.nodes, self.vectors):
                fh.write(node + "\t" + " ".join(repr(float(v)) for v in row) + "\n")
        meta = {
            "model": self.model,
            "dimension": self.dimension,
            "comparator": "dot",
            "relations": self.relations,
            "relation_params": None
            if self.relation_params is None
            else [[repr(float(v)) for v in np.ravel(p)] for p in self.relation_params],
            **self.metadata,
        }
        with open(path + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "EmbeddingTable":
        path = os.fspath(path)
        nodes, rows = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                node, sep, values = line.rstrip("\n").partition("\t")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected node<TAB>values")
                nodes.append(node)
                rows.append([float(v) for v in values.split()])
        meta: dict = {}
        if os.path.exists(path + ".meta.json"):
            with open(path + ".meta.json", encoding="utf-8") as fh:
                meta = json.load(fh)
        dim = len(rows[0]) if rows else int(meta.get("dimension", 0))
        vectors = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
        model = meta.pop("model", "unknown")
        meta.pop("dimension", None)
        meta.pop("comparator", None)
        relations = meta.pop("relations", []) or []
        params = meta.pop("relation_params", None)
        rel_params = None
        if params:
            arr = np.array([[float(v) for v in p] for p in params])
            rel_params = arr.reshape(len(relations), dim, dim) if model == "rescal" else arr
        return cls(model, dim, nodes, vectors, relations, rel_params, meta)


def _init(rng: np.random.Generator, shape: tuple[int, ...], d: int) -> np.ndarray:
    bound = 0.5 / math.sqrt(d)
    return rng.uniform(-bound, bound, size=shape)


def _mean_loss(model: str, E, R, heads, rels, tails, neg_ent, neg_side) -> float:
    code = kernels.MODEL_CODES[model]
    total, count = 0.0, 0
    for p in range(heads.shape[0]):
        h, r, t = heads[p], rels[p], tails[p]
        total += float(logistic_loss(kernels.score_grads(code, E[h], R[r], E[t])[0], 1.0))
        count += 1
        for j in range(neg_ent.shape[1]):
            hh, tt = (neg_ent[p, j], t) if neg_side[p, j] == 0 else (h, neg_ent[p, j])
            total += float(logistic_loss(kernels.score_grads(code, E[hh], R[r], E[tt])[0], -1.0))
            count += 1
    return total / max(count, 1)


def _negatives(rng: np.random.Generator, m: int, n_nodes: int, k: int):
    neg_ent = rng.integers(0, n_nodes, size=(m, k), dtype=np.int64)
    neg_side = rng.integers(0, 2, size=(m, k), dtype=np.int64)
    return neg_ent, neg_side


def train(graph: Graph, config: TrainConfig | None = None, triples: np.ndarray | None = None) -> EmbeddingTable:
    """Train node and relation embeddings on the graph's edges.

    ``triples`` optionally restricts training to an ``(m, 3)`` array of
    (head, relation, tail) indices into ``graph.nodes`` / ``graph.relations``.
    Deterministic for a fixed seed.
    """
    config = config or TrainConfig()
    config.validate()
    if graph.n_nodes == 0 or graph.n_edges == 0:
        raise ValueError("cannot train embeddings on an empty graph")
    if triples is None:
        triples = np.stack([graph.src, graph.rel, graph.dst], axis=1)
    triples = np.asarray(triples, dtype=np.int64)
    heads, rels, tails = triples[:, 0], triples[:, 1], triples[:, 2]
    n, d, k = graph.n_nodes, config.dimension, config.negatives_per_positive

    rng = np.random.default_rng(config.seed)
    E = _init(rng, (n, d), d)
    rshape = (len(graph.relations), d, d) if config.model == "rescal" else (len(graph.relations), d)
    R = _init(rng, rshape, d)

    # fixed evaluation negatives so initial and final losses are comparable
    eval_rng = np.random.default_rng([config.seed, 1])
    eval_neg = _negatives(eval_rng, len(triples), n, k)
    initial_loss = _mean_loss(config.model, E, R, heads, rels, tails, *eval_neg)

    history = []
    per_epoch = len(triples) * (k + 1)
    for epoch in range(config.epochs):
        perm = rng.permutation(len(triples))
        neg_ent, neg_side = _negatives(rng, len(triples), n, k)
        total = kernels.sgd_epoch_sharded(
            config.model, E, R, heads[perm], rels[perm], tails[perm], neg_ent, neg_side,
            config.learning_rate, config.shards,
        )
        mean = total / per_epoch
        if not math.isfinite(mean) or not np.all(np.isfinite(E)):
            raise TrainingDivergedError(
                f"loss diverged at epoch {epoch + 1} (lr={config.learning_rate}); try a lower learning rate"
            )
        history.append(mean)

    final_loss = _mean_loss(config.model, E, R, heads, rels, tails, *eval_neg)
    logger.info("trained %s: loss %.4f -> %.4f", config.model, initial_loss, final_loss)
    meta = {
        **asdict(config),
        "initial_loss": initial_loss,
        "final_loss": final_loss,
        "epoch_loss": history,
    }
    meta.pop("model")
    meta.pop("dimension")
    return EmbeddingTable(config.model, d, list(graph.nodes), E, list(graph.relations), R, meta)


def rank_of(model: str, table: EmbeddingTable, h: int, r: int, t: int, side: str = "tail") -> float:
    """Rank (1 = best) of the true entity among all corruptions of one side.

    Ties count half, so a constant scorer gets the uniform expectation.
    """
    code = kernels.MODEL_CODES[model]
    E, R = table.vectors, table.relation_params
    if side == "tail":
        scores = np.array([kernels.score_grads(code, E[h], R[r], E[c])[0] for c in range(len(E))])
        true = scores[t]
    else:
        scores = np.array([kernels.score_grads(code, E[c], R[r], E[t])[0] for c in range(len(E))])
        true = scores[h]
    better = int(np.sum(scores > true))
    ties = int(np.sum(scores == true)) - 1
    return 1.0 + better + ties / 2.0


# --- text embeddings --------------------------------------------------------

NEIGHBORHOOD_CAP = 20


def node_sentence(graph: Graph, node: str, cap: int = NEIGHBORHOOD_CAP) -> tuple[str, bool]:
    """Template sentence over a node's outgoing edges; flag is True when the label was missing."""
    label = graph.first_label(node)
    flagged = label is None
    if flagged:
        label = node.rstrip("/").split("/")[-1].split(":")[-1].replace("_", " ")
        logger.warning("node %s has no label; using %r", node, label)
    pairs = []
    for e in graph.out_edges(node):
        nbr = graph.first_label(e.node2) or e.node2
        pairs.append((e.relation, e.node2, graph.relation_text(e.relation), nbr))
    pairs.sort(key=lambda p: (p[0], p[1]))
    if not pairs:
        return label, flagged
    clauses = [f"{label} {rel_text} {nbr}" for _, _, rel_text, nbr in pairs[:cap]]
    return ", ".join(clauses) + ".", flagged


def text_embed(graph: Graph, node: str, encoder: TextEncoder, cap: int = NEIGHBORHOOD_CAP) -> np.ndarray:
    if node not in graph:
        raise KeyError(f"node {node!r} not in graph")
    sentence, _ = node_sentence(graph, node, cap)
    return np.asarray(encoder.encode(sentence), dtype=np.float64)


def text_embedding_table(graph: Graph, encoder: TextEncoder, cap: int = NEIGHBORHOOD_CAP) -> EmbeddingTable:
    vectors = np.array([text_embed(graph, n, encoder, cap) for n in graph.nodes]).reshape(
        graph.n_nodes, encoder.dimension
    )
    return EmbeddingTable("text", encoder.dimension, list(graph.nodes), vectors, metadata={"neighborhood_cap": cap})


# --- neighbor search --------------------------------------------------------

def nearest_neighbors(
    table: EmbeddingTable, query, k: int, exclude: Iterable[str] = ()
) -> list[tuple[str, float]]:
    """Top-k nodes by cosine similarity, ties broken by node id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    query = np.asarray(query, dtype=np.float64)
    if not np.any(query):
        raise ValueError("query vector has zero norm")
    sims = kernels.cosine_scores(table.vectors, query)
    excluded = set(exclude)
    name_rank = np.argsort(np.argsort(np.array(table.nodes, dtype=object)))
    order = np.lexsort((name_rank, -sims))
    out = []
    for i in order:
        node = table.nodes[i]
        if node in excluded:
            continue
        out.append((node, float(sims[i])))
        if len(out) == k:
            break
    return out


def label_vector(table: EmbeddingTable, graph: Graph, label: str) -> np.ndarray:
    """Mean vector of all embedded nodes carrying ``label`` (normalised match)."""
    nodes = [n for n in graph.nodes_with_label(label) if n in table]
    if not nodes:
        key = normalize_label(label)
        close = sorted(graph.label_index, key=lambda lab: (-levenshtein_similarity(key, lab), lab))[:5]
        raise KeyError(f"no embedded node carries label {label!r}; nearest labels: {close}")
    return np.mean([table.vector(n) for n in nodes], axis=0)


def embed_nodes(table: EmbeddingTable, nodes: Sequence[str]) -> np.ndarray:
    return np.array([table.vector(n) for n in nodes])
