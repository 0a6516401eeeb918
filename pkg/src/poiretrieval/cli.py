"""Command-line entry point.

Exit codes: 0 success, 2 usage error (bad flags, unreadable input),
3 data validation error, 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
import warnings
from pathlib import Path

from . import augmentation, evaluation, features, reranking, retrieval, spatial
from .errors import ConvergenceError, DataValidationError
from .features import FeatureSet

log = logging.getLogger("poiretrieval")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def stage(name):
    try:
        yield
    except StageError:
        raise
    except (DataValidationError, ConvergenceError, OSError) as exc:
        raise StageError(name, exc) from exc


def _load(path, fmt, what):
    with stage(f"load {what} ({path})"):
        return features.load_features(path, fmt)


def _save(fs: FeatureSet, path, fmt):
    with stage(f"write {path}"):
        features.save_features(fs, path, fmt)


def cmd_pca_fit(args):
    X = _load(args.features, args.format, "PCA corpus")
    with stage("pca_fit"):
        model = augmentation.fit_normalized(X, args.k)
    with stage(f"write {args.out}"):
        model.save(args.out)
    log.info("fitted PCA d=%d k=%d on %d vectors", model.d, model.k, len(X))


def cmd_augment(args):
    X = _load(args.features, args.format, "features")
    with stage(f"load PCA model ({args.model})"):
        model = augmentation.PcaModel.load(args.model)
    with stage("augment"):
        out = augmentation.augment_set(X, model, not args.no_whiten, args.epsilon)
    _save(out, args.out, args.out_format)


def cmd_patch_plan(args):
    with stage("patch_plan"):
        text = spatial.patch_plan(args.levels).to_tsv()
    _write_text(text, args.out)


def cmd_rank(args):
    refs = _load(args.features, args.format, "references")
    queries = _load(args.queries, args.format, "queries")
    with stage("rank_l2"):
        lists = retrieval.rank_all(queries, refs, 0, args.exclude_self, args.workers)
    _write_ranked(lists, args.out)


def cmd_qe_rank(args):
    refs = _load(args.features, args.format, "references")
    queries = _load(args.queries, args.format, "queries")
    with stage("rank_with_qe"):
        lists = retrieval.rank_all(queries, refs, args.qe_top, args.exclude_self, args.workers)
    _write_ranked(lists, args.out)


def cmd_spatial_rank(args):
    refs = _load(args.features, args.format, "reference patches")
    queries = _load(args.queries, args.format, "query patches")
    with stage("group reference patches"):
        ref_sets = spatial.group_patches(refs, args.hr)
    with stage("group query patches"):
        query_sets = spatial.group_patches(queries, args.hq)
    with stage("spatial_rank"):
        lists = spatial.spatial_rank_all(query_sets, ref_sets, args.exclude_self, args.workers)
    _write_ranked(lists, args.out)


def _rerank_config(args):
    overrides = {"C": args.C, "neg_ratio": args.neg_ratio, "folds": args.folds,
                 "seed_pool_size": args.seed_pool, "keep_top": args.keep_top,
                 "rng_seed": args.seed}
    with stage("rerank config"):
        if args.config:
            return reranking.RerankConfig.from_file(args.config, **overrides)
        return reranking.RerankConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_rerank(args):
    cfg = _rerank_config(args)
    pool = _load(args.candidates, args.format, "candidate features")
    negatives = _load(args.neg_pool, args.format, "negative pool")
    with stage(f"read manifest ({args.manifest})"):
        manifest = reranking.read_rerank_manifest(args.manifest)
    lists = []
    for concept, entries in manifest.items():
        with stage(f"rerank concept {concept!r}"):
            if args.mode == "weak":
                pos = [i for i, label in entries if label == "pos"]
                rest = [i for i, label in entries if label != "pos"]
                ranked = reranking.rerank_weak(pool.subset(rest), pool.subset(pos), negatives,
                                               cfg, concept)
            else:
                cands = pool.subset([i for i, _ in entries])
                ranked = reranking.rerank_auto(cands, negatives, cfg, concept, args.workers)
        lists.append(ranked)
    _write_ranked(lists, args.out)


def cmd_select(args):
    cfg = _rerank_config(args)
    with stage(f"read ranked lists ({args.ranked})"):
        lists = retrieval.read_ranked_lists(args.ranked)
    lines = []
    for ranked in lists:
        keep = set(reranking.select_top_k(ranked, cfg.keep_top))
        for item_id, score, rank in ranked.entries():
            if item_id in keep:
                lines.append(f"{ranked.query_id}\t{rank}\t{item_id}\t{score:.9g}\n")
    _write_text("".join(lines), args.out)


def cmd_eval(args):
    with stage(f"read run ({args.run})"):
        lists = retrieval.read_ranked_lists(args.run)
    if args.gt:
        with stage(f"parse ground truth ({args.gt})"):
            gt = evaluation.parse_groundtruth(args.gt)
    else:
        with stage(f"build ground truth from {args.concepts}"):
            gt = evaluation.build_same_concept_gt(
                evaluation.read_concept_manifest(args.concepts), [r.query_id for r in lists])
    with stage("evaluate"):
        report = evaluation.evaluate(lists, gt, args.ap_mode)
    _write_text(report.to_tsv(), args.out)


def cmd_validate(args):
    with stage(f"load features ({args.features})"):
        fs = features.load_features(args.features, args.format, strict=False)
    issues = features.validate(fs)
    text = "".join(features.format_issue(i) + "\n" for i in issues)
    _write_text(text, args.out)
    errors = sum(i.severity == "error" for i in issues)
    if errors:
        raise StageError("validate", DataValidationError(f"{errors} invalid component(s) in {args.features}"))


def _write_text(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with stage(f"write {out}"):
        Path(out).write_text(text, encoding="utf-8")


def _write_ranked(lists, out):
    with stage(f"write {out}"):
        retrieval.write_ranked_lists(lists, out)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poiretrieval", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=fn)
        return p

    def fmt(p):
        p.add_argument("--format", choices=features.FORMATS,
                       help="input feature format (default: from extension, .tsv or binary)")

    def ranking(p):
        fmt(p)
        p.add_argument("--features", required=True, help="reference feature file")
        p.add_argument("--queries", required=True, help="query feature file")
        p.add_argument("--out", required=True, help="ranked-list TSV to write")
        p.add_argument("--exclude-self", action="store_true",
                       help="drop a reference whose id equals the query id")
        p.add_argument("--workers", type=_positive_int, default=1)

    p = add("pca-fit", cmd_pca_fit, "fit a PCA model on l2-normalized features")
    fmt(p)
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=_positive_int, required=True, help="number of components kept")
    p.add_argument("--out", required=True, help="PCA model JSON")

    p = add("augment", cmd_augment, "l2 -> PCA -> whiten -> l2 every vector of a file")
    fmt(p)
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True, help="PCA model JSON from pca-fit")
    p.add_argument("--out", required=True)
    p.add_argument("--out-format", choices=features.FORMATS)
    p.add_argument("--no-whiten", action="store_true")
    p.add_argument("--epsilon", type=float, default=augmentation.DEFAULT_EPSILON,
                   help="added to eigenvalues before whitening (default %(default)g)")

    p = add("patch-plan", cmd_patch_plan, "emit the multi-scale patch geometry as TSV")
    p.add_argument("--levels", type=_positive_int, required=True)
    p.add_argument("--out", help="output file (default stdout)")

    ranking(add("rank", cmd_rank, "exhaustive Euclidean ranking"))

    p = add("qe-rank", cmd_qe_rank, "ranking with average query expansion")
    ranking(p)
    p.add_argument("--qe-top", type=_non_negative_int, default=retrieval.DEFAULT_QE_TOP,
                   help="first-pass results averaged into the query (default %(default)s)")

    p = add("spatial-rank", cmd_spatial_rank, "multi-scale patch matching")
    ranking(p)
    p.add_argument("--hq", type=_positive_int, required=True, help="query patch levels")
    p.add_argument("--hr", type=_positive_int, required=True, help="reference patch levels")

    def rerank_flags(p):
        p.add_argument("--config", help="JSON file with RerankConfig fields; flags override it")
        p.add_argument("--C", type=float)
        p.add_argument("--neg-ratio", type=_positive_int)
        p.add_argument("--folds", type=_positive_int)
        p.add_argument("--seed-pool", type=_positive_int)
        p.add_argument("--keep-top", type=_positive_int)
        p.add_argument("--seed", type=int, help="RNG seed for all sampling")

    p = add("rerank", cmd_rerank, "SVM reranking of per-concept candidate pools")
    fmt(p)
    p.add_argument("--candidates", required=True, help="features of every manifest item")
    p.add_argument("--neg-pool", required=True, help="features of the negative pool")
    p.add_argument("--manifest", required=True, help="TSV concept-id, item-id, [pos|unlabeled]")
    p.add_argument("--mode", choices=("auto", "weak"), default="auto")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive_int, default=1)
    rerank_flags(p)

    p = add("select", cmd_select, "keep the top-ranked items of each concept")
    p.add_argument("--ranked", required=True, help="rerank output TSV")
    p.add_argument("--out", help="output file (default stdout)")
    rerank_flags(p)

    p = add("eval", cmd_eval, "per-query AP and mAP of a run")
    p.add_argument("--run", required=True, help="ranked-list TSV")
    gt = p.add_mutually_exclusive_group(required=True)
    gt.add_argument("--gt", help="ground-truth JSON")
    gt.add_argument("--concepts", help="concept manifest TSV; relevant = same concept")
    p.add_argument("--ap-mode", choices=evaluation.AP_MODES, default="noninterp")
    p.add_argument("--out", help="report TSV (default stdout)")

    p = add("validate", cmd_validate, "report non-finite components and zero vectors")
    fmt(p)
    p.add_argument("--features", required=True)
    p.add_argument("--out", help="report file (default stdout)")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except StageError as exc:
        cause = exc.cause
        print(f"poiretrieval {args.command}: error in {exc}", file=sys.stderr)
        if isinstance(cause, ConvergenceError):
            return EXIT_CONVERGENCE
        if isinstance(cause, OSError):
            return EXIT_USAGE
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
