"""Command-line entry point: one subcommand per pipeline stage plus ``run``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path

from . import __version__, analysis, consolidator, embeddings, evaluation, grounding, importers, kernels, linker, vocab
from .edge_model import EdgeFormatError, write_edge_table, serialize_edge_table
from .graph import Graph
from .pipeline import (
    ConfigError,
    EmbeddingLinkSpec,
    StageError,
    embedding_links,
    load_config,
    load_tables,
    run_pipeline,
    table_report,
    train_embeddings,
    write_histogram,
    write_json,
    write_scores,
)

log = logging.getLogger("kgfuse")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _require(*paths) -> None:
    missing = [str(p) for p in paths if p is not None and not Path(p).is_file()]
    if missing:
        raise ConfigError("missing input file(s): " + ", ".join(missing))


def _graph(path) -> Graph:
    return Graph(load_tables([path])[0])


# --- subcommands --------------------------------------------------------------

def cmd_import(args) -> int:
    _require(args.input, args.aux)
    counts: Counter = Counter()
    table = importers.import_source(args.source, args.input, args.aux, counts)
    write_edge_table(table, args.output)
    print(f"{args.source}: {len(table)} edges, {len(table.nodes())} nodes -> {args.output}")
    for reason, n in sorted(counts.items()):
        print(f"  skipped {n} ({reason})")
    return EXIT_OK


def cmd_link(args) -> int:
    _require(*args.graph)
    tables = load_tables(args.graph)
    every = [e for t in tables for e in t]
    counts: Counter = Counter()
    if args.method == "lexical":
        links = linker.link_lexical(every, args.sources)
    elif args.method == "table":
        if not args.alignment:
            raise ConfigError("--method table needs --alignment")
        _require(args.alignment)
        nodes = {n for e in every for n in (e.node1, e.node2)}
        links = linker.link_table(args.alignment, args.left_ns, args.right_ns, nodes, counts=counts)
    elif args.method == "fn-corpus":
        if not (args.annotations and args.lexicon):
            raise ConfigError("--method fn-corpus needs --annotations and --lexicon")
        _require(args.annotations, args.lexicon)
        links = linker.link_framenet_corpus(args.annotations, args.lexicon)
    else:
        _require(args.judgments, args.encoder_file)
        spec = EmbeddingLinkSpec(
            query_source=args.query_source,
            candidate_source=args.candidate_source,
            k=args.k,
            threshold=args.threshold,
            judgments=args.judgments,
            encoder_file=args.encoder_file,
        )
        links = embedding_links(tables, spec)
    table = linker.links_to_table(links, linker.node_labels(every))
    write_edge_table(table, args.output)
    print(f"{args.method}: {len(table)} links -> {args.output}")
    for reason, n in sorted(counts.items()):
        print(f"  skipped {n} ({reason})")
    return EXIT_OK


def cmd_consolidate(args) -> int:
    _require(*args.inputs, args.links)
    tables = load_tables(args.inputs)
    links = load_tables([args.links])[0] if args.links else ()
    res = consolidator.consolidate(tables, links, args.priority)
    write_edge_table(res.cskg_star, args.out_star)
    write_edge_table(res.cskg, args.out)
    c = res.counts()
    if args.report:
        write_json(
            {"counts": c, "merged_classes": len(res.plan.merged_classes()), "table": table_report(res.cskg_star, res.cskg)},
            args.report,
        )
    print(f"CSKG*: {c['cskg_star']['nodes']} nodes, {c['cskg_star']['edges']} edges")
    print(f"CSKG:  {c['cskg']['nodes']} nodes, {c['cskg']['edges']} edges")
    return EXIT_OK


def cmd_stats(args) -> int:
    _require(args.graph)
    table = load_tables([args.graph])[0]
    stats = analysis.degree_stats(Graph(table))
    report = {"total": stats.summary()}
    if args.by_source:
        report["by_source"] = analysis.source_stats(table)
    if args.report:
        write_json(report, args.report)
    if args.histograms:
        prefix = Path(args.histograms)
        write_histogram(stats.in_degree_histogram, f"{prefix}_in.tsv")
        write_histogram(stats.out_degree_histogram, f"{prefix}_out.tsv")
    s = stats.summary()
    print(
        f"nodes {s['nodes']}  edges {s['edges']}  relations {s['relations']}  "
        f"avg degree {s['avg_degree']:.2f}  std {s['std_degree']:.2f}"
    )
    return EXIT_OK


def cmd_centrality(args) -> int:
    _require(args.graph)
    graph = _graph(args.graph)
    if args.method == "pagerank":
        res = analysis.pagerank(graph, args.damping, args.tol, args.max_iter)
        ranked = {"pagerank": analysis.top_k(res.scores, args.top, graph.labels)}
        meta = {"iterations": res.iterations, "converged": res.converged}
        full = {"pagerank": res.scores}
    else:
        res = analysis.hits(graph, args.tol, args.max_iter)
        ranked = {
            "hubs": analysis.top_k(res.hubs, args.top, graph.labels),
            "authorities": analysis.top_k(res.authorities, args.top, graph.labels),
        }
        meta = {"iterations": res.iterations, "converged": res.converged}
        full = {"hubs": res.hubs, "authorities": res.authorities}
    if not meta["converged"]:
        log.warning("%s did not converge in %d iterations", args.method, args.max_iter)
    if args.report:
        write_json(
            {**meta, "method": args.method, **{k: [{"node": n, "label": l, "score": s} for n, l, s in v] for k, v in ranked.items()}},
            args.report,
        )
    if args.scores:
        for name, scores in full.items():
            path = args.scores if len(full) == 1 else f"{Path(args.scores).with_suffix('')}_{name}.tsv"
            write_scores(analysis.top_k(scores, graph.n_nodes, graph.labels), path)
    for name, rows in ranked.items():
        print(f"# {name}")
        for node, label, score in rows:
            print(f"{score:.6f}\t{node}\t{label}")
    return EXIT_OK


def cmd_embed(args) -> int:
    _require(args.graph, args.encoder_file)
    graph = _graph(args.graph)
    config = embeddings.TrainConfig(
        model=args.model,
        dimension=args.dim,
        learning_rate=args.lr,
        epochs=args.epochs,
        negatives_per_positive=args.negatives,
        seed=args.seed,
        shards=args.shards,
    )
    if args.model != "text":
        config.validate()
    table = train_embeddings(graph, config, args.encoder_file)
    table.save(args.out)
    msg = f"{table.model}: {len(table)} nodes x {table.dimension} -> {args.out}"
    if "final_loss" in table.metadata:
        msg += f" (loss {table.metadata['initial_loss']:.4f} -> {table.metadata['final_loss']:.4f})"
    print(msg)
    return EXIT_OK


def cmd_neighbors(args) -> int:
    _require(args.emb, args.graph)
    table = embeddings.EmbeddingTable.load(args.emb)
    graph = _graph(args.graph) if args.graph else None
    if args.node:
        if args.node not in table:
            raise ConfigError(f"node {args.node!r} is not in the embedding table")
        query, exclude = table.vector(args.node), {args.node}
    else:
        if graph is None:
            raise ConfigError("--label needs --graph to resolve labels")
        query = embeddings.label_vector(table, graph, args.label)
        exclude = set(graph.nodes_with_label(args.label))
    for node, sim in embeddings.nearest_neighbors(table, query, args.k, exclude):
        label = (graph.first_label(node) if graph else None) or ""
        print(f"{sim:.6f}\t{node}\t{label}")
    return EXIT_OK


def cmd_eval_assoc(args) -> int:
    _require(args.emb, args.graph, args.bench)
    table = embeddings.EmbeddingTable.load(args.emb)
    graph = _graph(args.graph)
    bench = evaluation.AssociationBenchmark.read(args.bench)
    config = evaluation.EvalConfig(levenshtein_threshold=args.lev_threshold, gain=args.gain)
    report = evaluation.evaluate(table, graph, bench, config).to_dict()
    report["levenshtein_threshold"] = args.lev_threshold
    if args.report:
        write_json(report, args.report)
    fmt = lambda v: "n/a" if v is None else f"{v:.4f}"  # noqa: E731
    print(f"MAP {fmt(report['MAP'])}  NDCG {fmt(report['NDCG'])}  evaluated {report['evaluated']}  skipped {report['skipped']}")
    return EXIT_OK


def cmd_ground(args) -> int:
    _require(args.graph, args.data, args.stopwords)
    graph = _graph(args.graph)
    items = grounding.read_items(args.data)
    stop = None
    if args.stopwords:
        stop = frozenset(w.lower() for w in Path(args.stopwords).read_text(encoding="utf-8").split())
    counts = {"questions": 0, "triples": 0, "triples_question_union": 0}
    dumped = {}
    for item in items:
        res = grounding.retrieve_evidence(graph, item, args.max_ngram, stopwords=stop)
        counts["questions"] += 1
        counts["triples"] += res.total
        counts["triples_question_union"] += len(res.triples)
        for e in res.triples:
            dumped[e.id] = e
    if args.report:
        write_json(counts, args.report)
    if args.dump_triples:
        Path(args.dump_triples).write_bytes(serialize_edge_table(sorted(dumped.values(), key=lambda e: e.id)))
    print(f"questions {counts['questions']}  triples {counts['triples']}  per-question union {counts['triples_question_union']}")
    return EXIT_OK


def cmd_run(args) -> int:
    overrides = {
        "output_dir": args.out,
        "embedding.model": args.model,
        "embedding.dimension": args.dim,
        "embedding.learning_rate": args.lr,
        "embedding.epochs": args.epochs,
        "embedding.seed": args.seed,
        "evaluation.levenshtein_threshold": args.lev_threshold,
    }
    config = load_config(args.config, overrides)
    summary = run_pipeline(config)
    c = summary["consolidate"]
    print(f"CSKG*: {c['cskg_star']['nodes']} nodes, {c['cskg_star']['edges']} edges")
    print(f"CSKG:  {c['cskg']['nodes']} nodes, {c['cskg']['edges']} edges")
    s = summary["stats"]
    print(f"avg degree {s['avg_degree']:.2f}  std {s['std_degree']:.2f}")
    if "eval-assoc" in summary:
        e = summary["eval-assoc"]
        print(f"MAP {e['MAP']}  NDCG {e['NDCG']}")
    if "ground" in summary:
        g = summary["ground"]
        print(f"grounding triples: CSKG {g['cskg']['triples']}  ConceptNet only {g['conceptnet_only']['triples']}")
    print(f"artifacts in {config.output_dir}")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgfuse", description="Build and analyse a consolidated commonsense graph.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress to stderr")
    p.add_argument("--backend", choices=("numba", "numpy"), help="kernel backend (default: numba when installed)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("import", help="convert one source dump to an edge table")
    s.add_argument("--source", required=True, choices=sorted(importers.IMPORTERS))
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--aux", help="property map (wikidata) or attribute POS lexicon (visualgenome)")
    s.set_defaults(func=cmd_import)

    s = sub.add_parser("link", help="generate mapping links as an edge table")
    s.add_argument("--method", required=True, choices=("lexical", "table", "embedding", "fn-corpus"))
    s.add_argument("--graph", nargs="+", default=[], help="imported edge tables")
    s.add_argument("--output", required=True)
    s.add_argument("--sources", nargs="+", default=["AT", "CN", "RG"], choices=vocab.SOURCE_TAGS)
    s.add_argument("--alignment")
    s.add_argument("--left-ns")
    s.add_argument("--right-ns")
    s.add_argument("--annotations")
    s.add_argument("--lexicon")
    s.add_argument("--query-source", default="WD", choices=vocab.SOURCE_TAGS)
    s.add_argument("--candidate-source", default="CN", choices=vocab.SOURCE_TAGS)
    s.add_argument("--k", type=int, default=50)
    s.add_argument("--threshold", type=float, default=0.0)
    s.add_argument("--judgments", help="TSV of node1, node2, accept|reject")
    s.add_argument("--encoder-file", help="precomputed text<TAB>vector file")
    s.set_defaults(func=cmd_link)

    s = sub.add_parser("consolidate", help="concatenate, deduplicate and merge")
    s.add_argument("--inputs", nargs="+", required=True)
    s.add_argument("--links")
    s.add_argument("--out-star", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.add_argument("--priority", nargs="+", choices=vocab.SOURCE_TAGS)
    s.set_defaults(func=cmd_consolidate)

    s = sub.add_parser("stats", help="node, edge, relation and degree statistics")
    s.add_argument("--graph", required=True)
    s.add_argument("--report")
    s.add_argument("--histograms", help="prefix for <prefix>_in.tsv / <prefix>_out.tsv")
    s.add_argument("--by-source", action="store_true")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("centrality", help="PageRank or HITS")
    s.add_argument("--graph", required=True)
    s.add_argument("--method", choices=("pagerank", "hits"), default="pagerank")
    s.add_argument("--top", type=int, default=10)
    s.add_argument("--damping", type=float, default=0.85)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--report")
    s.add_argument("--scores", help="TSV of all scores")
    s.set_defaults(func=cmd_centrality)

    s = sub.add_parser("embed", help="train graph embeddings or encode node sentences")
    s.add_argument("--graph", required=True)
    s.add_argument("--model", choices=(*embeddings.MODELS, "text"), default="transe")
    s.add_argument("--dim", type=int, default=100)
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--epochs", type=int, default=100)
    s.add_argument("--negatives", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--shards", type=int, default=1, help="parallel lock-free training shards (1 = deterministic)")
    s.add_argument("--encoder-file", help="precomputed sentence vectors for --model text")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("neighbors", help="nearest neighbors by cosine similarity")
    s.add_argument("--emb", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--node")
    g.add_argument("--label")
    s.add_argument("--graph")
    s.add_argument("--k", type=int, default=5)
    s.set_defaults(func=cmd_neighbors)

    s = sub.add_parser("eval-assoc", help="MAP/NDCG on a word-association benchmark")
    s.add_argument("--emb", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--bench", required=True)
    s.add_argument("--lev-threshold", type=float)
    s.add_argument("--gain", choices=("graded", "binary"), default="graded")
    s.add_argument("--report")
    s.set_defaults(func=cmd_eval_assoc)

    s = sub.add_parser("ground", help="count evidence triples for QA items")
    s.add_argument("--graph", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--report")
    s.add_argument("--dump-triples")
    s.add_argument("--max-ngram", type=int, default=3)
    s.add_argument("--stopwords", help="whitespace-separated stopword file replacing the shipped list")
    s.set_defaults(func=cmd_ground)

    s = sub.add_parser("run", help="run the whole pipeline from a YAML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides output_dir)")
    s.add_argument("--model", choices=(*embeddings.MODELS, "text"))
    s.add_argument("--dim", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--lev-threshold", type=float)
    s.set_defaults(func=cmd_run)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, (ConfigError, EdgeFormatError, FileNotFoundError, KeyError, ValueError)):
        return EXIT_INVALID
    return EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.backend:
        kernels.set_backend(args.backend)
    try:
        return args.func(args)
    except Exception as exc:  # report, don't trace
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"kgfuse {args.command}: error: {msg}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
