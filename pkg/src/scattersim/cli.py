"""Batch command-line front end for the retrieval pipeline.

One canonical config file drives everything; per-command flags override
it and the merged config is archived next to each artifact.  Exit codes:
0 ok, 1 usage error, 2 data/fingerprint error, 3 numeric failure.
Structured logs go to standard error; data goes to files or standard
output only.
"""

import argparse
import concurrent.futures
import json
import logging
import os
import sys

import numpy as np

from .audio import read_wav
from .config import FEATURE_KINDS, RunConfig
from .corpus import Corpus, expand_clusters, split_corpus
from .features import (FeatureStore, Gaussianizer, apply_gaussianizer,
                       build_store, fit_gaussianizer)
from .metric import MetricMatrix, metric_distance, train_lmnn
from .mfcc import mfcc, mfcc_gram, mfcc_gram_paths, mfcc_paths
from .perceptual import (Annotation, annotation_to_graph, build_hypergraph,
                         ClusterGraph, partition_hypergraph)
from .retrieval import evaluate, knn_query
from .scattering import (rate_scale_slice, rate_scale_to_csv,
                         scattering_vector, separable_scattering)
from .synth import DEFAULT_PROTOTYPES, Prototype, make_synthetic_corpus

log = logging.getLogger("scattersim")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _DataError(ValueError):
    """Invalid or mismatched on-disk artifacts."""


def path_label(p):
    """Stable string descriptor for a scattering path."""
    return "o%d:lam=%.8g:alpha=%.8g:beta=%.8g" % (p.order, p.lam,
                                                  p.alpha, p.beta)


def feature_row(clip, analysis):
    """(path labels, feature vector) for one clip under one config."""
    kind = analysis.feature_kind
    if analysis.peak_normalize:
        clip = clip.peak_normalized()
    if kind == "jtfs":
        feats = scattering_vector(clip, analysis)
    elif kind == "separable":
        feats = separable_scattering(clip, analysis)
    elif kind == "mfcc":
        return mfcc_paths(), mfcc(clip, clip.clip_id).mean_vector()
    elif kind == "mfcc-gram":
        return mfcc_gram_paths(), mfcc_gram(mfcc(clip, clip.clip_id))
    else:
        raise _DataError("unknown feature kind %r" % kind)
    return [path_label(p) for p in feats.paths], feats.values


def _extract_one(job):
    clip_id, path, analysis = job
    clip = read_wav(path, target_rate=analysis.sample_rate,
                    clip_id=clip_id)
    return clip_id, feature_row(clip, analysis)


def _load_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "features", None):
        overrides["feature_kind"] = args.features
    if getattr(args, "time_ms", None) is not None:
        overrides["time_constant"] = args.time_ms / 1000.0
    if getattr(args, "quality", None) is not None:
        overrides["quality_factor"] = args.quality
    if getattr(args, "sample_rate", None) is not None:
        overrides["sample_rate"] = args.sample_rate
    if getattr(args, "rate_max", None) is not None:
        overrides["rate_max"] = args.rate_max
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _archive_config(cfg, artifact_path):
    cfg.save(str(artifact_path) + ".cfg")


def _check_fingerprints(**named):
    items = [(k, v) for k, v in named.items() if v]
    for (ka, va), (kb, vb) in zip(items, items[1:]):
        if va != vb:
            raise _DataError(
                "fingerprint mismatch: %s=%s vs %s=%s" % (ka, va, kb, vb))


def cmd_extract(args):
    cfg = _load_config(args)
    corpus = Corpus.load_manifest(args.manifest)
    jobs = [(e.clip_id, e.path, cfg.analysis) for e in corpus.entries]
    if not jobs:
        raise _DataError("empty corpus manifest")
    log.info("extracting %d clips (%s features, %d workers)",
             len(jobs), cfg.analysis.feature_kind, args.jobs)
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]
    paths = results[0][1][0]
    rows = {}
    for clip_id, (p, vec) in results:
        if p != paths:
            raise _DataError("inconsistent path layout for %r" % clip_id)
        rows[clip_id] = vec
    store = build_store(rows, paths, cfg.fingerprint())
    store.save(args.output)
    _archive_config(cfg, args.output)
    log.info("wrote %s (%d x %d)", args.output, len(rows), len(paths))
    return EXIT_OK


def cmd_gaussianize(args):
    train = FeatureStore.load(args.train_store)
    gauss = fit_gaussianizer(train, epsilon=args.epsilon)
    gauss.save(args.output)
    log.info("fitted gaussianizer on %s", args.train_store)
    for pair in args.apply or []:
        src, _, dst = pair.partition(":")
        if not dst:
            raise _DataError("--apply needs IN:OUT, got %r" % pair)
        store = FeatureStore.load(src)
        apply_gaussianizer(store, gauss).save(dst)
        log.info("transformed %s -> %s", src, dst)
    return EXIT_OK


def cmd_consensus(args):
    cfg = _load_config(args)
    files = sorted(os.listdir(args.annotations))
    graphs = []
    for name in files:
        if not name.endswith(".json"):
            continue
        with open(os.path.join(args.annotations, name)) as fh:
            graphs.append(annotation_to_graph(Annotation.from_json(
                fh.read())))
    if not graphs:
        raise _DataError("no annotation files in %s" % args.annotations)
    h = build_hypergraph(graphs)
    c0 = args.c0 or max(g.n_clusters for g in graphs)
    graph, info = partition_hypergraph(h, c0, seed=cfg.seed)
    graph.save(args.output, provenance={
        "c0": c0, "seed": cfg.seed, "objective": info["objective"],
        "subjects": len(graphs)})
    log.info("consensus over %d subjects, C0=%d, J=%.6g",
             len(graphs), c0, info["objective"])
    return EXIT_OK


def cmd_expand(args):
    graph = ClusterGraph.load(args.graph)
    corpus = Corpus.load_manifest(args.manifest)
    expand_clusters(graph, corpus).save(args.output)
    return EXIT_OK


def cmd_split(args):
    graph = ClusterGraph.load(args.graph)
    train, test = split_corpus(graph, args.fraction, seed=args.seed or 0)
    train.save(args.train_out)
    test.save(args.test_out)
    log.info("split %d clips into %d train / %d test",
             len(graph.vertices), len(train.vertices),
             len(test.vertices))
    return EXIT_OK


def cmd_train(args):
    cfg = _load_config(args)
    store = FeatureStore.load(args.store)
    graph = ClusterGraph.load(args.graph)
    metric = train_lmnn(store, graph, cfg.lmnn,
                        fingerprint=store.fingerprint)
    metric.save(args.output)
    _archive_config(cfg, args.output)
    log.info("trained L: %d iterations, loss %.6g -> %.6g",
             metric.provenance["iterations"],
             metric.provenance["initial_loss"],
             metric.provenance["final_loss"])
    return EXIT_OK


def _load_metric(path, store):
    if path is None:
        return MetricMatrix(matrix=np.eye(store.values.shape[1]),
                            fingerprint=store.fingerprint,
                            provenance={"identity": True})
    metric = MetricMatrix.load(path)
    _check_fingerprints(store=store.fingerprint,
                        metric=metric.fingerprint)
    if metric.dim != store.values.shape[1]:
        raise _DataError("metric dimension %d != store dimension %d"
                         % (metric.dim, store.values.shape[1]))
    return metric


def cmd_evaluate(args):
    store = FeatureStore.load(args.store)
    metric = _load_metric(args.metric, store)
    graphs = {}
    for spec_arg in args.graph:
        name, _, path = spec_arg.partition(":")
        if not path:
            name, path = os.path.splitext(os.path.basename(spec_arg))[0], \
                spec_arg
        graphs[name] = ClusterGraph.load(path)
    report = evaluate(store, metric.matrix, graphs, args.r,
                      provenance={"fingerprint": store.fingerprint,
                                  "metric": args.metric or "identity"})
    with open(args.output, "w") as fh:
        fh.write(report.to_json() + "\n")
    if args.csv:
        report.save_csv(args.csv)
    log.info("AP@%d = %.4f +- %.4f", args.r, report.ap, report.std)
    return EXIT_OK


def cmd_query(args):
    cfg = _load_config(args)
    store = FeatureStore.load(args.store)
    metric = _load_metric(args.metric, store)
    if args.query.lower().endswith(".wav"):
        if not args.gaussianizer:
            raise _DataError("querying by WAV needs --gaussianizer")
        gauss = Gaussianizer.load(args.gaussianizer)
        _check_fingerprints(store=store.fingerprint,
                            gaussianizer=gauss.fingerprint,
                            config=cfg.fingerprint())
        clip = read_wav(args.query,
                        target_rate=cfg.analysis.sample_rate,
                        clip_id="query")
        paths, vec = feature_row(clip, cfg.analysis)
        probe = build_store({"query": vec}, paths, gauss.fingerprint)
        row = apply_gaussianizer(probe, gauss).row("query")
        result = knn_query(store, metric.matrix, row, args.r)
    else:
        result = knn_query(store, metric.matrix, args.query, args.r)
    payload = {"query": result.query_id or args.query,
               "results": [{"id": cid, "distance": d}
                           for cid, d in result.results]}
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_rate_scale(args):
    cfg = _load_config(args)
    clip = read_wav(args.wav, target_rate=cfg.analysis.sample_rate,
                    clip_id=os.path.basename(args.wav))
    csv_text = rate_scale_to_csv(rate_scale_slice(clip, cfg.analysis))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_synth(args):
    if args.protoset == "am-pair":
        protos = (Prototype("am-slow", carrier=440.0, am_rate=4.0),
                  Prototype("am-fast", carrier=440.0, am_rate=16.0))
    else:
        protos = DEFAULT_PROTOTYPES
    corpus, graph = make_synthetic_corpus(
        args.out_dir, prototypes=protos, per_cluster=args.per_cluster,
        seed=args.seed or 0, duration=args.duration)
    log.info("wrote %d clips in %d clusters under %s",
             len(corpus.entries), graph.n_clusters, args.out_dir)
    return EXIT_OK


def cmd_serve(args):
    from .service import create_app
    import uvicorn
    config_path = args.config or os.environ.get("SCATTER_SIM_CONFIG")
    app = create_app(args.data_dir, config_path=config_path)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("error: %s\n" % message)
        raise SystemExit(EXIT_USAGE)


def _add_config_flags(p, features=False):
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, default=None)
    if features:
        p.add_argument("--features", choices=FEATURE_KINDS)
        p.add_argument("--T", dest="time_ms", type=float, default=None,
                       help="averaging scale in milliseconds")
        p.add_argument("--Q", dest="quality", type=int, default=None)
        p.add_argument("--sample-rate", type=int, default=None)
        p.add_argument("--rate-max", type=float, default=None)


def build_parser():
    parser = _Parser(prog="scattersim",
                     description="timbre-similarity retrieval pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("extract", help="corpus manifest -> feature store")
    _add_config_flags(p, features=True)
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("gaussianize",
                       help="fit compression/standardization on a store")
    p.add_argument("train_store")
    p.add_argument("-o", "--output", required=True,
                   help="gaussianizer file")
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--apply", action="append", metavar="IN:OUT",
                   help="also transform store IN into OUT")
    p.set_defaults(func=cmd_gaussianize)

    p = sub.add_parser("consensus",
                       help="annotation JSON dir -> consensus graph")
    _add_config_flags(p)
    p.add_argument("annotations")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--c0", type=int, default=None)
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("expand",
                       help="stimulus graph + manifest -> clip graph")
    p.add_argument("graph")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("graph")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="store + graph -> metric matrix")
    _add_config_flags(p)
    p.add_argument("store")
    p.add_argument("graph")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="store + metric -> AP report")
    p.add_argument("store")
    p.add_argument("--metric", default=None,
                   help="metric file; identity when omitted")
    p.add_argument("--graph", action="append", required=True,
                   metavar="[SUBJECT:]PATH")
    p.add_argument("--r", type=int, default=5)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("query", help="ranked retrieval for id or WAV")
    _add_config_flags(p, features=True)
    p.add_argument("store")
    p.add_argument("query", help="stored clip id or .wav path")
    p.add_argument("--metric", default=None)
    p.add_argument("--gaussianizer", default=None)
    p.add_argument("--r", type=int, default=5)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("rate-scale",
                       help="clip -> rate/scale heatmap CSV")
    _add_config_flags(p, features=True)
    p.add_argument("wav")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_rate_scale)

    p = sub.add_parser("synth", help="write a synthetic test corpus")
    p.add_argument("out_dir")
    p.add_argument("--per-cluster", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--protoset", choices=["default", "am-pair"],
                   default="default")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the annotation/query service")
    p.add_argument("data_dir")
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    logging.basicConfig(stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except (_DataError, FileNotFoundError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
