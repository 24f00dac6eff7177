"""Command-line entry point: validate, features, evaluate, gap, export, synth."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from forumrank import forum, gapstats, ingest, synth
from forumrank.model import ForumRankError, StructureError
from forumrank.policy import PolicySyntaxError, select_policies
from forumrank.textfeat import FEATURE_COLUMNS, FeatureConfig, score_corpus

log = logging.getLogger("forumrank")

EXIT_OK, EXIT_WARN, EXIT_ERROR = 0, 1, 2


@dataclass
class RunConfig:
    corpus: str
    out: str
    seed: int
    policies: str = "all"
    features: list[str] = field(default_factory=lambda: list(forum.FORUM_FEATURES))
    n_list: list[Optional[int]] = field(default_factory=lambda: [10, None])
    jobs: int = 1


def _parse_n_list(text: str) -> list[Optional[int]]:
    out: list[Optional[int]] = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        if part in ("full", "n", "all"):
            out.append(None)
            continue
        try:
            n = int(part)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad n value {part!r}") from None
        if n < 1:
            raise argparse.ArgumentTypeError("n must be >= 1")
        out.append(n)
    if not out:
        raise argparse.ArgumentTypeError("empty n list")
    return out


def _parse_features(text: str) -> list[str]:
    names = [f.strip() for f in text.split(",") if f.strip()]
    unknown = [f for f in names if f not in FEATURE_COLUMNS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown features {unknown}; choose from {', '.join(FEATURE_COLUMNS)}")
    return names


def _write_rows(path: Path, rows: Sequence[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _load(corpus: str) -> tuple[ingest.CorpusManifest, ingest.LoadResult]:
    manifest = ingest.CorpusManifest.from_path(corpus)
    return manifest, ingest.load_corpus(manifest)


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig.from_file(args.feature_config) if getattr(args, "feature_config", None) else FeatureConfig()


def _outdir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_validate(args) -> int:
    try:
        _, result = _load(args.corpus)
    except (StructureError, ingest.CorpusFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    for line in result.summary.lines():
        print(line)
    if result.warnings:
        for w in result.warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(f"warnings: {len(result.warnings)}")
        return EXIT_WARN
    return EXIT_OK


def cmd_features(args) -> int:
    _, result = _load(args.corpus)
    if not result.discussions:
        raise ForumRankError("corpus has no discussions")
    out = _outdir(args.out)
    feats = score_corpus(result.discussions, _feature_config(args), require_sentiment=not args.no_sentiment)
    _write_rows(out / "features.csv", list(feats.rows()), ["discussion_id", "comment_id", *FEATURE_COLUMNS])
    meta = {"offsets": feats.offsets, "readability_floor": feats.readability_floor, "feature_config": feats.config_fingerprint}
    (out / "feature_metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"scored {result.summary.n_comments} comments -> {out / 'features.csv'}")
    return EXIT_OK


def run_evaluate(cfg: RunConfig, feature_config: Optional[FeatureConfig] = None) -> forum.Evaluation:
    """Full pipeline: load, score features, evaluate every policy, write CSVs to ``cfg.out``."""
    manifest, result = _load(cfg.corpus)
    if not result.discussions:
        raise ForumRankError("corpus has no discussions")
    policies = select_policies(cfg.policies, manifest.score_columns)
    feats = score_corpus(result.discussions, feature_config or FeatureConfig())
    table = feats.forum_table(cfg.features)
    evaluation = forum.evaluate_all(result.discussions, table, policies, cfg.features, cfg.n_list, cfg.seed, cfg.jobs)
    out = _outdir(cfg.out)
    evaluation.write_csv(out / "forum_results.csv")
    _write_rows(out / "forum_summary.csv", forum.summarise(evaluation.results), forum.SUMMARY_COLUMNS)
    meta = {
        "run_config": {**asdict(cfg), "n_list": ["full" if n is None else n for n in cfg.n_list]},
        "policies": [p.policy_id for p in policies],
        "offsets": feats.offsets,
        "skipped_discussions": evaluation.skipped_discussions,
    }
    (out / "run_metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return evaluation


def cmd_evaluate(args) -> int:
    cfg = RunConfig(args.corpus, args.out, args.seed, args.policies, args.features, args.n, args.jobs)
    try:
        select_policies(cfg.policies, ingest.CorpusManifest.from_path(cfg.corpus).score_columns)
    except PolicySyntaxError as e:
        args.parser.error(str(e))
    evaluation = run_evaluate(cfg, _feature_config(args))
    rows = len(evaluation.results)
    print(f"{rows} FORUM rows -> {Path(cfg.out) / 'forum_results.csv'}")
    if evaluation.skipped_discussions:
        print(f"skipped single-comment discussions: {evaluation.skipped_discussions}")
    return EXIT_OK


def cmd_gap(args) -> int:
    _, result = _load(args.corpus)
    out = _outdir(args.out)
    pinned = [d for d in result.discussions if d.pinned.any()]
    if not pinned:
        print("notice: no discussions with pinned comments; gap report is empty")
    rows = gapstats.gap_table(pinned, args.seed)
    _write_rows(out / "gap_per_discussion.csv", [r.__dict__ for r in rows], ["discussion_id", "vote_key", "p", "jaccard", "overlap"])
    _write_rows(
        out / "gap_summary.csv",
        gapstats.gap_summary(rows),
        ["vote_key", "discussions", "mean_jaccard", "mean_overlap", "gap_jaccard", "gap_overlap"],
    )
    if result.discussions:
        stats = gapstats.pin_time_stats(result.discussions)
        _write_rows(out / "pin_time_summary.csv", [asdict(stats)], list(asdict(stats)))
    if args.coefficients:
        coefs = gapstats.load_coefficients(args.coefficients)
        report = gapstats.coefficient_report(coefs)
        _write_rows(
            out / "coefficient_report.csv",
            report,
            ["feature", "beta_pick", "beta_up", "beta_down", "rvp", "comment_gap", "exp_rvp", "exp_comment_gap"],
        )
    else:
        print("notice: no coefficient file; computed overlap statistics only")
    if args.forum_coefficients:
        terms = gapstats.load_forum_coefficients(args.forum_coefficients)
        _write_rows(out / "forum_delta_report.csv", gapstats.forum_delta_report(terms), ["term", "beta", "delta_phi"])
    for s in gapstats.gap_summary(rows):
        print(f"{s['vote_key']}: mean jaccard {s['mean_jaccard']:.3f}, mean overlap {s['mean_overlap']:.3f} over {s['discussions']} discussions")
    return EXIT_OK


def cmd_export(args) -> int:
    _, result = _load(args.corpus)
    out = _outdir(args.out)
    feats = score_corpus(result.discussions, _feature_config(args), require_sentiment=not args.no_sentiment)
    header = ingest.export_regression_table(result.discussions, feats, out / "regression_table.csv")
    print(f"{result.summary.n_comments} rows x {len(header)} columns -> {out / 'regression_table.csv'}")
    if args.forum_results:
        with open(args.forum_results, newline="", encoding="utf-8") as fh:
            n = ingest.export_forum_table(csv.DictReader(fh), out / "forum_table.csv")
        print(f"{n} FORUM rows -> {out / 'forum_table.csv'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(n_comments=args.comments, seed=args.seed, pinned_fraction=args.pinned_fraction)
    discussions = synth.generate_corpus(cfg, args.discussions, args.size_sigma)
    manifest = ingest.write_corpus(discussions, args.out, cfg.external_columns, args.seed)
    summary = ingest.summarise_corpus(discussions)
    for line in summary.lines():
        print(line)
    print(f"corpus -> {manifest.articles.parent}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forumrank", description="Evaluate comment ranking policies with FORUM")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def corpus_arg(p):
        p.add_argument("corpus", help="corpus directory (articles.jsonl, comments.jsonl) or manifest.json")

    p = sub.add_parser("validate", help="check a corpus and print summary statistics")
    corpus_arg(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("features", help="score text features per comment")
    corpus_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--feature-config", help="JSON file with FeatureConfig fields")
    p.add_argument("--no-sentiment", action="store_true", help="allow comments without sentiment_pos/neg")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("evaluate", help="FORUM scores for every (discussion, policy, feature, n)")
    corpus_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--policies", default="all", help="'all' or comma-separated e.g. revchrono+pinned+trees")
    p.add_argument("--features", type=_parse_features, default=list(forum.FORUM_FEATURES))
    p.add_argument("--n", type=_parse_n_list, default=[10, None], help="comma-separated n values; 'full' = N-1")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--feature-config")
    p.set_defaults(func=cmd_evaluate, parser=p)

    p = sub.add_parser("gap", help="editors' pick vs vote overlap, RVP / comment gap, pin timing")
    corpus_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--coefficients", help="CSV with feature, beta_pick, beta_up, beta_down")
    p.add_argument("--forum-coefficients", help="CSV with term, beta (beta-regression coefficients)")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("export", help="model-ready tables for external regression tools")
    corpus_arg(p)
    p.add_argument("--out", required=True)
    p.add_argument("--forum-results", help="forum_results.csv to convert into a phi' table")
    p.add_argument("--feature-config")
    p.add_argument("--no-sentiment", action="store_true")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--discussions", type=int, default=50)
    p.add_argument("--comments", type=int, default=200, help="comments per discussion (median when --size-sigma > 0)")
    p.add_argument("--size-sigma", type=float, default=0.0)
    p.add_argument("--pinned-fraction", type=float, default=0.005)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ForumRankError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
