"""End-to-end pipeline: config loading, validation and the staged run.

Config is a YAML tree. Relative paths resolve against the config file's
directory. Every key is optional except ``sources``::

    output_dir: out
    sources:
      conceptnet: {input: conceptnet.tsv}
      visualgenome: {input: vg.tsv, aux: vg_pos.tsv}
    links:
      lexical: true
      lexical_sources: [AT, CN, RG]
      tables:
        - {path: ili.tsv, left_ns: wn, right_ns: wn}
      framenet_corpus: {annotations: fn_corpus.tsv, lexicon: fn_lexicon.tsv}
      embedding: {query_source: WD, candidate_source: CN, k: 50, threshold: 0.0}
    consolidation:
      priority: [CN, WN, WD, FN, RG, VG, AT]
    analysis: {damping: 0.85, tol: 1.0e-9, max_iter: 100, top: 10}
    embedding: {model: transe, dimension: 100, learning_rate: 0.1, epochs: 100, seed: 0}
    evaluation: {benchmark: bench.tsv, levenshtein_threshold: 0.9}
    grounding: {data: items.jsonl, max_ngram: 3}
"""
from __future__ import annotations

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Iterable

import yaml

from . import analysis, consolidator, embeddings, evaluation, grounding, importers, linker, vocab
from .edge_model import SAME_AS, EdgeTable, read_edge_table, write_edge_table
from .graph import Graph

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class SourceSpec:
    name: str
    input: Path
    aux: Path | None = None


@dataclass
class TableLinkSpec:
    path: Path
    left_ns: str | None = None
    right_ns: str | None = None
    relation: str = SAME_AS


@dataclass
class EmbeddingLinkSpec:
    query_source: str = "WD"
    candidate_source: str = "CN"
    k: int = 50
    threshold: float = 0.0
    dimension: int = 128
    judgments: Path | None = None
    encoder_file: Path | None = None


@dataclass
class LinkSettings:
    lexical: bool = True
    lexical_sources: tuple[str, ...] = ("AT", "CN", "RG")
    tables: list[TableLinkSpec] = field(default_factory=list)
    framenet_corpus: tuple[Path, Path] | None = None
    embedding: EmbeddingLinkSpec | None = None


@dataclass
class AnalysisSettings:
    damping: float = 0.85
    tol: float = 1e-9
    max_iter: int = 100
    top: int = 10


@dataclass
class PipelineConfig:
    sources: list[SourceSpec]
    output_dir: Path = Path("out")
    links: LinkSettings = field(default_factory=LinkSettings)
    priority: tuple[str, ...] = ("CN", "WN", "WD", "FN", "RG", "VG", "AT")
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    train: embeddings.TrainConfig = field(default_factory=embeddings.TrainConfig)
    benchmark: Path | None = None
    eval: evaluation.EvalConfig = field(default_factory=lambda: evaluation.EvalConfig(levenshtein_threshold=0.9))
    grounding_data: Path | None = None
    max_ngram: int = 3

    def input_files(self) -> list[Path]:
        files = [p for s in self.sources for p in (s.input, s.aux) if p is not None]
        files += [t.path for t in self.links.tables]
        if self.links.framenet_corpus:
            files += list(self.links.framenet_corpus)
        emb = self.links.embedding
        if emb is not None:
            files += [p for p in (emb.judgments, emb.encoder_file) if p is not None]
        files += [p for p in (self.benchmark, self.grounding_data) if p is not None]
        return files

    def validate(self) -> None:
        """Check every referenced file exists and every setting is in range."""
        if not self.sources:
            raise ConfigError("no sources configured")
        names = [s.name for s in self.sources]
        for name in names:
            if name not in importers.IMPORTERS:
                raise ConfigError(f"unknown source {name!r}")
        if len(set(names)) != len(names):
            raise ConfigError("each source may be configured once")
        if "wikidata" in names and next(s for s in self.sources if s.name == "wikidata").aux is None:
            raise ConfigError("wikidata source needs an aux property map")
        missing = [str(p) for p in self.input_files() if not p.is_file()]
        if missing:
            raise ConfigError("missing input file(s): " + ", ".join(missing))
        vocab.priority_key(self.priority)
        for tag in self.links.lexical_sources:
            if tag not in vocab.SOURCE_TAGS:
                raise ConfigError(f"unknown source tag {tag!r} in links.lexical_sources")
        emb = self.links.embedding
        if emb is not None:
            if emb.k < 1:
                raise ConfigError("links.embedding.k must be positive")
            for tag in (emb.query_source, emb.candidate_source):
                if tag not in vocab.SOURCE_TAGS:
                    raise ConfigError(f"unknown source tag {tag!r} in links.embedding")
        a = self.analysis
        if not 0.0 < a.damping < 1.0 or a.tol <= 0 or a.max_iter < 1 or a.top < 1:
            raise ConfigError("analysis settings out of range")
        if self.train.model != "text":
            try:
                self.train.validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        t = self.eval.levenshtein_threshold
        if t is not None and not 0.0 <= t <= 1.0:
            raise ConfigError("levenshtein_threshold must lie in [0, 1]")
        if self.eval.gain not in ("graded", "binary"):
            raise ConfigError("evaluation gain must be 'graded' or 'binary'")
        if self.max_ngram < 1:
            raise ConfigError("grounding max_ngram must be positive")


# --- loading ----------------------------------------------------------------

def _path(base: Path, value: Any) -> Path | None:
    if value is None:
        return None
    p = Path(str(value))
    return p if p.is_absolute() else base / p


def _section(raw: dict, key: str) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return value


def _fill(cls, values: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    return cls(**values)


def config_from_dict(raw: dict, base: Path) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    allowed = {"output_dir", "sources", "links", "consolidation", "analysis", "embedding", "evaluation", "grounding"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")

    sources = []
    for name, spec in sorted(_section(raw, "sources").items()):
        spec = {"input": spec} if isinstance(spec, str) else dict(spec or {})
        if "input" not in spec:
            raise ConfigError(f"source {name!r} needs an input path")
        sources.append(SourceSpec(name, _path(base, spec["input"]), _path(base, spec.get("aux"))))

    lk = dict(_section(raw, "links"))
    tables = [
        TableLinkSpec(_path(base, t["path"]), t.get("left_ns"), t.get("right_ns"), t.get("relation", SAME_AS))
        for t in lk.pop("tables", None) or []
    ]
    fn = lk.pop("framenet_corpus", None)
    fn_paths = (_path(base, fn["annotations"]), _path(base, fn["lexicon"])) if fn else None
    emb_raw = lk.pop("embedding", None)
    emb = None
    if emb_raw:
        emb_raw = dict(emb_raw)
        for key in ("judgments", "encoder_file"):
            emb_raw[key] = _path(base, emb_raw.get(key))
        emb = _fill(EmbeddingLinkSpec, emb_raw, "links.embedding")
    if "lexical_sources" in lk:
        lk["lexical_sources"] = tuple(lk["lexical_sources"])
    links = _fill(LinkSettings, {**lk, "tables": tables, "framenet_corpus": fn_paths, "embedding": emb}, "links")

    cons = _section(raw, "consolidation")
    ev = dict(_section(raw, "evaluation"))
    gr = dict(_section(raw, "grounding"))
    bench = _path(base, ev.pop("benchmark", None))
    data = _path(base, gr.pop("data", None))
    max_ngram = gr.pop("max_ngram", 3)
    if gr:
        raise ConfigError(f"unknown key(s) in grounding: {', '.join(sorted(gr))}")
    ev.setdefault("levenshtein_threshold", 0.9)

    cfg = PipelineConfig(
        sources=sources,
        output_dir=_path(base, raw.get("output_dir", "out")),
        links=links,
        priority=tuple(cons.get("priority", PipelineConfig.__dataclass_fields__["priority"].default)),
        analysis=_fill(AnalysisSettings, _section(raw, "analysis"), "analysis"),
        train=_fill(embeddings.TrainConfig, _section(raw, "embedding"), "embedding"),
        benchmark=bench,
        eval=_fill(evaluation.EvalConfig, ev, "evaluation"),
        grounding_data=data,
        max_ngram=int(max_ngram),
    )
    return cfg


def load_config(path: str | os.PathLike, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Read a YAML config; ``overrides`` maps dotted keys (``embedding.epochs``) to values."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = raw
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return config_from_dict(raw, path.parent)


# --- output helpers ---------------------------------------------------------

def write_json(obj: Any, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def write_scores(rows: Iterable[tuple[str, str, float]], path: str | os.PathLike, header=("node", "label", "score")) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_histogram(hist: dict[int, int], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("degree\tcount\n")
        for degree, count in sorted(hist.items()):
            fh.write(f"{degree}\t{count}\n")


# --- stage building blocks (shared with the subcommands) ---------------------

def table_report(star: EdgeTable, cskg: EdgeTable) -> dict[str, dict]:
    """Source-by-metric table: per-source columns over CSKG*, plus CSKG* and CSKG totals."""
    return analysis.source_stats(star, columns={"CSKG*": star, "CSKG": cskg})


def embedding_links(tables: Iterable[EdgeTable], spec: EmbeddingLinkSpec) -> list[linker.MappingLink]:
    """Link nodes of one source to their most similar node of another, using node descriptions."""
    graph = Graph([e for t in tables for e in t])

    def described(tag: str) -> list[tuple[str, str]]:
        return [(n, embeddings.node_sentence(graph, n)[0]) for n in graph.nodes if vocab.node_source(n) == tag]

    encoder = (
        linker.PrecomputedEncoder(spec.encoder_file)
        if spec.encoder_file is not None
        else linker.HashingEncoder(spec.dimension)
    )
    judgments = linker.read_judgments(spec.judgments) if spec.judgments is not None else None
    index = linker.InvertedIndex(described(spec.candidate_source))
    return linker.link_by_embedding(
        described(spec.query_source), index, encoder, spec.k, spec.threshold, judgments
    )


def build_links(tables: list[EdgeTable], settings: LinkSettings, counts: Counter) -> list[linker.MappingLink]:
    every = [e for t in tables for e in t]
    nodes = {n for e in every for n in (e.node1, e.node2)}
    links: list[linker.MappingLink] = []
    if settings.lexical:
        found = linker.link_lexical(every, settings.lexical_sources)
        counts["lexical"] += len(found)
        links += found
    for spec in settings.tables:
        found = linker.link_table(spec.path, spec.left_ns, spec.right_ns, nodes, spec.relation, counts)
        counts["table"] += len(found)
        links += found
    if settings.framenet_corpus:
        found = linker.link_framenet_corpus(*settings.framenet_corpus)
        counts["fn_corpus"] += len(found)
        links += found
    if settings.embedding is not None:
        found = embedding_links(tables, settings.embedding)
        counts["embedding"] += len(found)
        links += found
    return sorted(set(links))


def train_embeddings(graph: Graph, config: embeddings.TrainConfig, encoder_file: Path | None = None):
    if config.model == "text":
        encoder = (
            linker.PrecomputedEncoder(encoder_file) if encoder_file is not None else linker.HashingEncoder(config.dimension)
        )
        return embeddings.text_embedding_table(graph, encoder)
    return embeddings.train(graph, config)


def centrality_outputs(graph: Graph, settings: AnalysisSettings, out: Path) -> dict:
    pr = analysis.pagerank(graph, settings.damping, settings.tol, settings.max_iter)
    hub = analysis.hits(graph, settings.tol, settings.max_iter)
    write_scores(analysis.top_k(pr.scores, graph.n_nodes, graph.labels), out / "pagerank.tsv")
    write_scores(analysis.top_k(hub.hubs, graph.n_nodes, graph.labels), out / "hits_hubs.tsv")
    write_scores(analysis.top_k(hub.authorities, graph.n_nodes, graph.labels), out / "hits_authorities.tsv")

    def top(scores):
        return [{"node": n, "label": lab, "score": s} for n, lab, s in analysis.top_k(scores, settings.top, graph.labels)]

    return {
        "pagerank": {"iterations": pr.iterations, "converged": pr.converged, "top": top(pr.scores)},
        "hits": {
            "iterations": hub.iterations,
            "converged": hub.converged,
            "hubs": top(hub.hubs),
            "authorities": top(hub.authorities),
        },
    }


def load_tables(paths: Iterable[str | os.PathLike]) -> list[EdgeTable]:
    return [read_edge_table(p) for p in paths]


# --- the run ----------------------------------------------------------------

def _stage(name: str, fn: Callable[[], Any]) -> Any:
    logger.info("stage %s: start", name)
    try:
        return fn()
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every configured stage, writing artifacts under ``config.output_dir``.

    Validation happens before anything is written. If a stage fails, the
    artifacts of earlier stages stay on disk and :class:`StageError` names it.
    """
    config.validate()
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "sources").mkdir(exist_ok=True)
    summary: dict[str, Any] = {}

    def do_import():
        tables, skipped = [], {}
        for spec in config.sources:
            counts: Counter = Counter()
            table = importers.import_source(spec.name, spec.input, spec.aux, counts)
            write_edge_table(table, out / "sources" / f"{spec.name}.tsv")
            logger.info("imported %s: %d edges, %d nodes", spec.name, len(table), len(table.nodes()))
            if counts:
                skipped[spec.name] = dict(sorted(counts.items()))
            tables.append(table)
        return tables, skipped

    tables, skipped = _stage("import", do_import)
    summary["import"] = {
        "edges": {s.name: len(t) for s, t in zip(config.sources, tables)},
        "skipped": skipped,
    }

    def do_link():
        counts: Counter = Counter()
        links = build_links(tables, config.links, counts)
        labels = linker.node_labels(e for t in tables for e in t)
        table = linker.links_to_table(links, labels)
        write_edge_table(table, out / "links.tsv")
        logger.info("links: %d (%s)", len(table), dict(counts))
        return table, counts

    link_table, link_counts = _stage("link", do_link)
    summary["link"] = dict(sorted(link_counts.items()))

    def do_consolidate():
        res = consolidator.consolidate(tables, link_table, config.priority)
        write_edge_table(res.cskg_star, out / "cskg_star.tsv")
        write_edge_table(res.cskg, out / "cskg.tsv")
        report = {
            "counts": res.counts(),
            "merged_classes": len(res.plan.merged_classes()),
            "table": table_report(res.cskg_star, res.cskg),
        }
        write_json(report, out / "report.json")
        return res, report

    result, cons_report = _stage("consolidate", do_consolidate)
    summary["consolidate"] = cons_report["counts"]
    graph = Graph(result.cskg, exclude_relations=(SAME_AS,))

    def do_stats():
        stats = analysis.degree_stats(graph)
        write_histogram(stats.in_degree_histogram, out / "degree_in.tsv")
        write_histogram(stats.out_degree_histogram, out / "degree_out.tsv")
        write_json(stats.summary(), out / "stats.json")
        return stats.summary()

    summary["stats"] = _stage("stats", do_stats)

    def do_centrality():
        report = centrality_outputs(graph, config.analysis, out)
        write_json(report, out / "centrality.json")
        return {k: v["converged"] for k, v in report.items()}

    summary["centrality"] = _stage("centrality", do_centrality)

    def do_embed():
        table = train_embeddings(graph, config.train)
        table.save(out / "emb.tsv")
        return table

    emb = _stage("embed", do_embed)
    summary["embed"] = {"model": emb.model, "nodes": len(emb), "final_loss": emb.metadata.get("final_loss")}

    if config.benchmark is not None:
        def do_eval():
            bench = evaluation.AssociationBenchmark.read(config.benchmark)
            report = evaluation.evaluate(emb, graph, bench, config.eval).to_dict()
            report["levenshtein_threshold"] = config.eval.levenshtein_threshold
            write_json(report, out / "eval.json")
            return {"MAP": report["MAP"], "NDCG": report["NDCG"], "evaluated": report["evaluated"]}

        summary["eval-assoc"] = _stage("eval-assoc", do_eval)

    if config.grounding_data is not None:
        def do_ground():
            items = grounding.read_items(config.grounding_data)
            cn_only = Graph([e for e in result.cskg if "CN" in e.source])
            report = {
                "cskg": grounding.count_dataset(graph, items, config.max_ngram),
                "conceptnet_only": grounding.count_dataset(cn_only, items, config.max_ngram),
            }
            write_json(report, out / "grounding.json")
            return report

        summary["ground"] = _stage("ground", do_ground)

    write_json(summary, out / "summary.json")
    return summary
