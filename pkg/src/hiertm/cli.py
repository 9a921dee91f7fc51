"""Command-line entry point for the full train / evaluate / serve pipeline."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import (
    artm,
    corpus as corpus_mod,
    edge_quality,
    flat_quality,
    hier_quality,
    hierarchy as hierarchy_mod,
    map_export,
    spectre as spectre_mod,
)
from .corpus import CorpusError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Ctx:
    """Resolved settings: command-line flags win over config file entries."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.exists():
                raise FileNotFoundError(f"config file not found: {path}")
            with open(path, encoding="utf-8") as handle:
                loaded = yaml.safe_load(handle) or {}
            if not isinstance(loaded, dict):
                raise CorpusError(f"config file must hold a mapping: {path}")
            self.config = loaded

    def get(self, name: str, default=None, required: bool = False):
        value = getattr(self.args, name, None)
        if value in (None, []):
            value = self.config.get(name, default)
        if required and value in (None, []):
            raise UsageError(f"missing required setting --{name.replace('_', '-')}")
        return value


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file; flags override its entries")
    parser.add_argument("--seed", type=int, help="seed applied to every random choice")
    parser.add_argument("--threads", type=int, help="worker cap; results do not depend on it")


def _parse_weights(entries) -> dict[str, float] | None:
    if not entries:
        return None
    if isinstance(entries, dict):
        return {str(k): float(v) for k, v in entries.items()}
    weights = {}
    for entry in entries:
        name, _, value = entry.partition("=")
        if not value:
            raise UsageError(f"modality weight must look like word=1.0, got {entry!r}")
        weights[name] = float(value)
    return weights


def _parse_regularizers(entries) -> tuple:
    if not entries:
        return ()
    specs = []
    for entry in entries:
        if isinstance(entry, dict):
            params = dict(entry.get("params", {}))
            specs.append(
                artm.RegularizerSpec(
                    kind=entry["kind"], tau=float(entry.get("tau", 1.0)), params=params
                )
            )
            continue
        kind, _, rest = entry.partition(":")
        tau = 1.0
        params = {}
        for piece in filter(None, rest.split(",")):
            key, _, value = piece.partition("=")
            if not value:
                raise UsageError(f"bad regularizer parameter {piece!r}")
            if key == "tau":
                tau = float(value)
            else:
                params[key] = float(value)
        specs.append(artm.RegularizerSpec(kind=kind, tau=tau, params=params))
    return tuple(specs)


def _load_collections(ctx: Ctx) -> list[corpus_mod.Collection]:
    paths = ctx.get("corpus", required=True)
    if isinstance(paths, str):
        paths = [paths]
    ids = ctx.get("collection_id") or [Path(p).stem for p in paths]
    if isinstance(ids, str):
        ids = [ids]
    if len(ids) != len(paths):
        raise UsageError("need exactly one --collection-id per --corpus")
    return [corpus_mod.ingest(path, cid) for path, cid in zip(paths, ids)]


def _topic_counts(ctx: Ctx) -> tuple[int, ...]:
    raw = ctx.get("topics", required=True)
    if isinstance(raw, str):
        raw = [int(v) for v in raw.split(",") if v]
    return tuple(int(v) for v in raw)


def _measures(ctx: Ctx, default: tuple[str, ...]) -> tuple[str, ...]:
    raw = ctx.get("measures")
    if not raw:
        return default
    if isinstance(raw, str):
        raw = [m for m in raw.split(",") if m]
    return tuple(raw)


def _hier_config(ctx: Ctx, counts: tuple[int, ...]) -> hierarchy_mod.HierarchyConfig:
    return hierarchy_mod.HierarchyConfig(
        level_topic_counts=counts,
        max_iterations=int(ctx.get("max_iterations", 50)),
        ll_rel_tolerance=float(ctx.get("tolerance", 1e-4)),
        regularizers=_parse_regularizers(ctx.get("regularizer")),
        seed=int(ctx.get("seed", 0)),
        modality_weights=_parse_weights(ctx.get("modality_weight")),
        edge_threshold=float(ctx.get("edge_threshold", 0.5)),
        batch_fraction=float(ctx.get("batch_fraction", 0.1)),
        batches=ctx.get("batches"),
    )


def cmd_ingest(ctx: Ctx) -> int:
    collection = corpus_mod.ingest(
        ctx.get("input", required=True),
        ctx.get("collection_id", required=True),
        format=ctx.get("format", "bow"),
    )
    out_dir = Path(ctx.get("output", required=True))
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_corpus(collection, out_dir / f"{collection.id}.bow")
    lengths = [doc.length for doc in collection.documents]
    stats = {
        "collection_id": collection.id,
        "n_documents": len(collection.documents),
        "vocabulary": {m: len(v) for m, v in collection.vocabulary.items()},
        "mean_document_length": sum(lengths) / len(lengths) if lengths else 0.0,
        "total_tokens": sum(lengths),
    }
    with open(out_dir / f"{collection.id}.stats.json", "w", encoding="utf-8") as handle:
        json.dump(stats, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"ingested {stats['n_documents']} documents into {out_dir}")
    return EXIT_OK


def cmd_train(ctx: Ctx) -> int:
    collections = _load_collections(ctx)
    corpus = corpus_mod.merge(collections)
    config = artm.TrainConfig(
        n_topics=int(ctx.get("n_topics", required=True)),
        max_iterations=int(ctx.get("max_iterations", 50)),
        ll_rel_tolerance=float(ctx.get("tolerance", 1e-4)),
        regularizers=_parse_regularizers(ctx.get("regularizer")),
        seed=int(ctx.get("seed", 0)),
        modality_weights=_parse_weights(ctx.get("modality_weight")),
    )
    model = artm.train(corpus, config)
    out_dir = Path(ctx.get("output", required=True))
    artm.save_model(model, out_dir)
    print(
        f"trained {model.n_topics} topics in {model.n_iterations} iterations, "
        f"final log-likelihood {model.ll_history[-1]:.6g}"
    )
    return EXIT_OK


def cmd_hier(ctx: Ctx) -> int:
    collections = _load_collections(ctx)
    config = _hier_config(ctx, _topic_counts(ctx))
    algo = ctx.get("algo", "concat")
    if algo == "concat":
        built = hierarchy_mod.build_concat(collections, config)
    elif algo == "heterogeneous":
        built = hierarchy_mod.build_heterogeneous(collections[0], collections[1:], config)
    else:
        raise UsageError(f"unknown algo {algo!r}")
    out_dir = Path(ctx.get("output", required=True))
    hierarchy_mod.save_hierarchy(built, out_dir)
    sizes = " -> ".join(str(level.n_topics) for level in built.levels)
    print(f"built {algo} hierarchy ({sizes} topics) with {len(built.edges)} edges")
    return EXIT_OK


def cmd_eval_flat(ctx: Ctx) -> int:
    model = artm.load_model(ctx.get("model", required=True))
    measures = _measures(ctx, flat_quality.MEASURES)
    cooc = probs = embeds = None
    if {"coherence", "coherence_tfidf", "pmi", "npmi", "lcp"} & set(measures):
        corpus = corpus_mod.merge(_load_collections(ctx))
        cooc = corpus_mod.compute_cooc(corpus, threads=ctx.get("threads"))
        probs = corpus_mod.estimate_pw(corpus, cooc)
    if "coherence_embed" in measures:
        embeds = edge_quality.load_embeddings(ctx.get("embeddings", required=True))
    report = flat_quality.score_all_flat(
        model,
        measures=measures,
        cooc=cooc,
        probs=probs,
        embeds=embeds,
        n=int(ctx.get("n_top", 10)),
    )
    prefix = Path(ctx.get("output", required=True))
    flat_quality.write_flat_report(report, prefix)
    print(f"wrote flat quality report for {len(report.values)} topics to {prefix}.tsv/.json")
    return EXIT_OK


def cmd_eval_edges(ctx: Ctx) -> int:
    hier_dir = Path(ctx.get("hierarchy", required=True))
    built = hierarchy_mod.load_hierarchy(hier_dir)
    measures = _measures(ctx, edge_quality.EDGE_MEASURES)
    embeds = cooc = None
    if "embed_sim" in measures:
        embeds = edge_quality.load_embeddings(ctx.get("embeddings", required=True))
    if "cooc_sim" in measures:
        corpus = corpus_mod.merge(_load_collections(ctx))
        cooc = corpus_mod.compute_cooc(corpus, threads=ctx.get("threads"))
    table = edge_quality.score_all(
        built, measures=measures, embeds=embeds, cooc=cooc, n=int(ctx.get("n_top", 10))
    )
    prefix = Path(ctx.get("output") or hier_dir / "edge_scores")
    edge_quality.write_edge_scores(table, prefix)
    print(f"scored {len(table.rows)} candidate edges to {prefix}.tsv/.json")
    return EXIT_OK


def cmd_eval_hier(ctx: Ctx) -> int:
    table = edge_quality.load_edge_scores(ctx.get("scores", required=True))
    measure = ctx.get("measure", required=True)
    style = ctx.get("style", "averaging")
    prefix = Path(ctx.get("output", required=True))
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if style == "averaging":
        curve = hier_quality.avg_quality_curve(table, measure)
        hier_quality.write_curve(curve, prefix.with_suffix(".csv"))
        print(f"wrote averaging curve ({len(curve)} thresholds) to {prefix}.csv")
    elif style == "ranking":
        ks = ctx.get("k")
        if ks is None:
            ks = list(range(1, min(20, len(table.rows)) + 1))
        elif isinstance(ks, (int, str)):
            ks = [int(ks)]
        else:
            ks = [int(v) for v in ks]
        report = hier_quality.ranking_report(table, measure, ks)
        hier_quality.write_ranking_report(report, prefix)
        print(f"wrote ranking report for k in {ks[0]}..{ks[-1]} to {prefix}.tsv/.json")
    else:
        raise UsageError(f"unknown style {style!r}")
    return EXIT_OK


def cmd_assess(ctx: Ctx) -> int:
    votes = hier_quality.read_votes(ctx.get("votes", required=True))
    labels, histogram = hier_quality.aggregate_votes(votes)
    prefix = Path(ctx.get("output", required=True))
    prefix.parent.mkdir(parents=True, exist_ok=True)
    hier_quality.write_labels(labels, prefix.with_suffix(".labels.csv"))
    label_map = {(p, c): v for p, c, v in labels}
    result: dict = {"agreement_histogram": {str(k): v for k, v in sorted(histogram.items())}}
    scores_path = ctx.get("scores")
    if scores_path:
        table = edge_quality.load_edge_scores(scores_path)
        aucs = {}
        for measure in table.measures():
            paired = [
                (row.scores[measure], label_map[(row.parent, row.child)])
                for row in table.rows_for(measure)
                if (row.parent, row.child) in label_map
            ]
            if len({label for _, label in paired}) == 2:
                aucs[measure] = hier_quality.roc_auc(
                    [s for s, _ in paired], [l for _, l in paired]
                )
        result["roc_auc"] = aucs
    with open(prefix.with_suffix(".json"), "w", encoding="utf-8") as handle:
        json.dump(result, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"aggregated {len(labels)} labeled edges to {prefix}.labels.csv/.json")
    return EXIT_OK


def cmd_prune(ctx: Ctx) -> int:
    hier_dir = Path(ctx.get("hierarchy", required=True))
    scores_path = ctx.get("scores") or hier_dir / "edge_scores.json"
    table = edge_quality.load_edge_scores(scores_path)
    measure = ctx.get("measure", required=True)
    k = int(ctx.get("k", required=True))
    edges = hierarchy_mod.top_k_edges(table, k, measure)
    scores_by_edge = {(r.parent, r.child): r.scores for r in table.rows}
    out_path = Path(ctx.get("output") or hier_dir / "edges.json")
    hierarchy_mod.write_edges(edges, out_path, scores=scores_by_edge)
    print(f"kept {len(edges)} edges by {measure} in {out_path}")
    return EXIT_OK


def cmd_spectre(ctx: Ctx) -> int:
    hier_dir = Path(ctx.get("hierarchy", required=True))
    built = hierarchy_mod.load_hierarchy(hier_dir)
    level = int(ctx.get("level", 0))
    model = built.levels[level]
    metric = ctx.get("metric", "hellinger")
    mode = ctx.get("mode", "auto")
    if mode == "auto":
        mode = "exact" if model.n_topics <= spectre_mod.EXACT_LIMIT else "heuristic"
    distances = spectre_mod.topic_distances(model, metric)
    result = spectre_mod.solve_spectre(distances, mode=mode)
    out_path = Path(ctx.get("output") or hier_dir / "spectre.json")
    spectre_mod.save_spectre(result, model.topic_ids, metric, out_path)
    print(f"spectre over {model.n_topics} topics, weight {result.weight:.6g}, in {out_path}")
    return EXIT_OK


def cmd_export_map(ctx: Ctx) -> int:
    hier_dir = Path(ctx.get("hierarchy", required=True))
    built = hierarchy_mod.load_hierarchy(hier_dir)
    corpus = corpus_mod.merge(_load_collections(ctx))
    spectre_path = Path(ctx.get("spectre") or hier_dir / "spectre.json")
    result, _metric = spectre_mod.load_spectre(spectre_path, built.levels[0].topic_ids)
    export = map_export.export_map(
        built, result, corpus, docs_per_topic=int(ctx.get("docs_per_topic", 100))
    )
    out_path = Path(ctx.get("output") or hier_dir / "map.json")
    map_export.save_map(export, out_path)
    print(f"exported map with {len(export['topics'])} topics to {out_path}")
    return EXIT_OK


def cmd_serve(ctx: Ctx) -> int:
    from . import serve as serve_mod

    state = serve_mod.load_state(
        Path(ctx.get("model_dir", required=True)),
        corpus_paths=ctx.get("corpus"),
        collection_ids=ctx.get("collection_id"),
        sidecar_path=ctx.get("sidecar"),
    )
    serve_mod.run_server(
        state,
        host=ctx.get("host", "127.0.0.1"),
        port=int(ctx.get("port", 8000)),
    )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="hiertm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a corpus file")
    _add_common(p)
    p.add_argument("--input")
    p.add_argument("--collection-id", dest="collection_id")
    p.add_argument("--format", choices=["bow"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train one flat topic model")
    _add_common(p)
    p.add_argument("--corpus", action="append")
    p.add_argument("--collection-id", dest="collection_id", action="append")
    p.add_argument("--n-topics", dest="n_topics", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--modality-weight", dest="modality_weight", action="append")
    p.add_argument("--regularizer", action="append")
    p.add_argument("--output")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hier", help="build a multi-level hierarchy")
    _add_common(p)
    p.add_argument("--corpus", action="append")
    p.add_argument("--collection-id", dest="collection_id", action="append")
    p.add_argument("--algo", choices=["concat", "heterogeneous"])
    p.add_argument("--topics", help="comma-separated level sizes, e.g. 5,12")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--modality-weight", dest="modality_weight", action="append")
    p.add_argument("--regularizer", action="append")
    p.add_argument("--edge-threshold", dest="edge_threshold", type=float)
    p.add_argument("--batch-fraction", dest="batch_fraction", type=float)
    p.add_argument("--batches", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_hier)

    p = sub.add_parser("eval-flat", help="flat topic quality measures")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--corpus", action="append")
    p.add_argument("--collection-id", dest="collection_id", action="append")
    p.add_argument("--embeddings")
    p.add_argument("--measures")
    p.add_argument("--n-top", dest="n_top", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_flat)

    p = sub.add_parser("eval-edges", help="score parent-child edges")
    _add_common(p)
    p.add_argument("--hierarchy")
    p.add_argument("--measures")
    p.add_argument("--embeddings")
    p.add_argument("--corpus", action="append", help="co-occurrence corpus files")
    p.add_argument("--collection-id", dest="collection_id", action="append")
    p.add_argument("--n-top", dest="n_top", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_edges)

    p = sub.add_parser("eval-hier", help="aggregate edge scores into hierarchy quality")
    _add_common(p)
    p.add_argument("--scores")
    p.add_argument("--style", choices=["averaging", "ranking"])
    p.add_argument("--measure")
    p.add_argument("--k", action="append", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_hier)

    p = sub.add_parser("assess", help="aggregate assessor votes and compute ROC-AUC")
    _add_common(p)
    p.add_argument("--votes")
    p.add_argument("--scores")
    p.add_argument("--output")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("prune", help="keep only the top-k edges by a measure")
    _add_common(p)
    p.add_argument("--hierarchy")
    p.add_argument("--scores")
    p.add_argument("--measure")
    p.add_argument("--k", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("spectre", help="order top-level topics along a linear spectre")
    _add_common(p)
    p.add_argument("--hierarchy")
    p.add_argument("--metric", choices=list(spectre_mod.DISTANCE_METRICS))
    p.add_argument("--mode", choices=["auto", "exact", "heuristic"])
    p.add_argument("--level", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_spectre)

    p = sub.add_parser("export-map", help="assemble the servable topic map")
    _add_common(p)
    p.add_argument("--hierarchy")
    p.add_argument("--corpus", action="append")
    p.add_argument("--collection-id", dest="collection_id", action="append")
    p.add_argument("--spectre")
    p.add_argument("--docs-per-topic", dest="docs_per_topic", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_export_map)

    p = sub.add_parser("serve", help="serve the exported map over HTTP")
    _add_common(p)
    p.add_argument("--model-dir", dest="model_dir")
    p.add_argument("--corpus", action="append")
    p.add_argument("--collection-id", dest="collection_id", action="append")
    p.add_argument("--sidecar")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(Ctx(args))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError, json.JSONDecodeError, yaml.YAMLError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
