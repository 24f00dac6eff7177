"""Load line-delimited JSON corpora into validated discussions and export tables."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from forumrank.model import Article, Comment, Discussion, ForumRankError, StructureError, build_discussion

log = logging.getLogger(__name__)

COMMENT_FIELDS = (
    "discussion_id",
    "comment_id",
    "parent_id",
    "timestamp",
    "upvotes",
    "downvotes",
    "pinned",
    "author_id",
    "author_followers",
    "text",
    "precomputed",
)
ARTICLE_FIELDS = ("article_id", "discussion_id", "published_at", "genre", "title", "body_text")

# Explanatory columns with long tails, log1p-transformed before standardising.
LOG_COLUMNS = (
    "author_followers",
    "level_in_tree",
    "size_of_tree",
    "height_of_tree",
    "hours_since_article",
    "num_punctuation",
    "num_replies",
    "num_upvotes",
    "num_downvotes",
    "num_comments_in_discussion",
    "mean_upvotes_in_discussion",
    "mean_downvotes_in_discussion",
)


class CorpusFormatError(ForumRankError, ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class StandardisationError(ForumRankError, ValueError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} has zero variance and cannot be standardised")
        self.column = column


@dataclass
class CorpusManifest:
    articles: Path
    comments: Path
    external_columns: list[str] = field(default_factory=list)
    optional_columns: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_path(cls, path) -> CorpusManifest:
        """Accept a manifest JSON file or a directory holding articles.jsonl/comments.jsonl."""
        p = Path(path)
        if p.is_dir():
            if (p / "manifest.json").exists():
                return cls.from_path(p / "manifest.json")
            return cls(p / "articles.jsonl", p / "comments.jsonl")
        with open(p, encoding="utf-8") as fh:
            raw = json.load(fh)
        base = p.parent
        return cls(
            articles=base / raw["articles"],
            comments=base / raw["comments"],
            external_columns=list(raw.get("external_columns", [])),
            optional_columns={k: float(v) for k, v in raw.get("optional_columns", {}).items()},
            seed=int(raw.get("seed", 0)),
        )

    def to_dict(self, relative_to: Optional[Path] = None) -> dict:
        def rel(p: Path) -> str:
            return os.path.relpath(p, relative_to) if relative_to else str(p)

        return {
            "articles": rel(self.articles),
            "comments": rel(self.comments),
            "external_columns": list(self.external_columns),
            "optional_columns": dict(self.optional_columns),
            "seed": self.seed,
        }

    @property
    def score_columns(self) -> list[str]:
        return list(self.external_columns) + [c for c in self.optional_columns if c not in self.external_columns]


@dataclass
class CorpusSummary:
    n_discussions: int
    n_comments: int
    root_share: float
    pinned_share: float

    def lines(self) -> list[str]:
        return [
            f"discussions: {self.n_discussions}",
            f"comments: {self.n_comments}",
            f"root comments: {100 * self.root_share:.1f}%",
            f"pinned comments: {100 * self.pinned_share:.2f}%",
        ]


@dataclass
class LoadResult:
    discussions: list[Discussion]
    summary: CorpusSummary
    warnings: list[str] = field(default_factory=list)


def summarise_corpus(discussions: Sequence[Discussion]) -> CorpusSummary:
    n = sum(d.n for d in discussions)
    roots = sum(len(d.roots) for d in discussions)
    pinned = sum(int(d.pinned.sum()) for d in discussions)
    return CorpusSummary(len(discussions), n, roots / n if n else 0.0, pinned / n if n else 0.0)


def _read_jsonl(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(path, lineno, f"malformed JSON ({e.msg})") from None
            if not isinstance(rec, dict):
                raise CorpusFormatError(path, lineno, "record is not a JSON object")
            yield lineno, rec


def _require(rec: dict, name: str, path, lineno: int):
    if name not in rec:
        raise CorpusFormatError(path, lineno, f"missing field {name!r}")
    return rec[name]


def _as_int(value, name: str, path, lineno: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
        raise CorpusFormatError(path, lineno, f"field {name!r} must be an integer")
    return int(value)


def _parse_article(rec: dict, path, lineno: int) -> Article:
    return Article(
        article_id=str(_require(rec, "article_id", path, lineno)),
        discussion_id=str(_require(rec, "discussion_id", path, lineno)),
        published_at=_as_int(_require(rec, "published_at", path, lineno), "published_at", path, lineno),
        genre=str(rec.get("genre", "")),
        body_text=str(rec.get("body_text", "")),
        title=str(rec.get("title", "")),
    )


def load_corpus(manifest: CorpusManifest) -> LoadResult:
    """Read articles and comments, group by discussion and validate each forest.

    Comments for unknown discussions and deleted placeholders are skipped;
    replies to missing parents become roots.  Each such event adds a
    warning.  Malformed lines raise :class:`CorpusFormatError`; invalid trees
    raise :class:`StructureError`.
    """
    warnings: list[str] = []
    articles: dict[str, Article] = {}
    for lineno, rec in _read_jsonl(manifest.articles):
        art = _parse_article(rec, manifest.articles, lineno)
        if art.discussion_id in articles:
            raise CorpusFormatError(manifest.articles, lineno, f"duplicate discussion {art.discussion_id}")
        articles[art.discussion_id] = art

    grouped: dict[str, list[tuple[int, dict]]] = defaultdict(list)
    for lineno, rec in _read_jsonl(manifest.comments):
        did = str(_require(rec, "discussion_id", manifest.comments, lineno))
        if did not in articles:
            warnings.append(f"{manifest.comments}:{lineno}: unknown discussion {did}; comment skipped")
            continue
        if rec.get("deleted"):
            continue
        grouped[did].append((lineno, rec))

    discussions = []
    for did, art in articles.items():
        recs = grouped.get(did, [])
        if not recs:
            log.info("discussion %s has no comments; skipped", did)
            continue
        comments = _parse_comments(recs, manifest, warnings)
        d = build_discussion(comments, art)
        first = int(d.timestamps.min())
        if art.published_at > first:
            warnings.append(f"discussion {did}: article published after its first comment")
        discussions.append(d)

    summary = summarise_corpus(discussions)
    for w in warnings:
        log.warning(w)
    return LoadResult(discussions, summary, warnings)


def _parse_comments(recs: list[tuple[int, dict]], manifest: CorpusManifest, warnings: list[str]) -> list[Comment]:
    path = manifest.comments
    ids = set()
    for lineno, rec in recs:
        ids.add(str(_require(rec, "comment_id", path, lineno)))
    out = []
    for lineno, rec in recs:
        cid = str(rec["comment_id"])
        parent = rec.get("parent_id")
        parent = None if parent in (None, "") else str(parent)
        if parent is not None and parent not in ids:
            warnings.append(f"{path}:{lineno}: comment {cid} replies to missing {parent}; re-attached as root")
            parent = None
        pre = rec.get("precomputed") or {}
        if not isinstance(pre, dict):
            raise CorpusFormatError(path, lineno, "precomputed must be an object")
        pre = {str(k): float(v) for k, v in pre.items() if v is not None}
        for col in manifest.external_columns:
            if col not in pre:
                if col in manifest.optional_columns:
                    pre[col] = manifest.optional_columns[col]
                else:
                    raise CorpusFormatError(path, lineno, f"comment {cid} lacks external score {col!r}")
        for col, default in manifest.optional_columns.items():
            pre.setdefault(col, default)
        pinned = rec.get("pinned", False)
        if not isinstance(pinned, bool):
            raise CorpusFormatError(path, lineno, "pinned must be a boolean")
        try:
            out.append(
                Comment(
                    comment_id=cid,
                    discussion_id=str(rec["discussion_id"]),
                    parent_id=parent,
                    timestamp=_as_int(_require(rec, "timestamp", path, lineno), "timestamp", path, lineno),
                    upvotes=_as_int(rec.get("upvotes", 0), "upvotes", path, lineno),
                    downvotes=_as_int(rec.get("downvotes", 0), "downvotes", path, lineno),
                    pinned=pinned,
                    author_id=str(rec.get("author_id", "")),
                    author_followers=_as_int(rec.get("author_followers", 0), "author_followers", path, lineno),
                    text=str(rec.get("text", "")),
                    precomputed=pre,
                )
            )
        except StructureError:
            raise
        except ValueError as e:
            raise CorpusFormatError(path, lineno, str(e)) from None
    return out


def comment_record(c: Comment) -> dict:
    return {
        "discussion_id": c.discussion_id,
        "comment_id": c.comment_id,
        "parent_id": c.parent_id,
        "timestamp": c.timestamp,
        "upvotes": c.upvotes,
        "downvotes": c.downvotes,
        "pinned": c.pinned,
        "author_id": c.author_id,
        "author_followers": c.author_followers,
        "text": c.text,
        "precomputed": dict(c.precomputed),
    }


def article_record(a: Article) -> dict:
    return {
        "article_id": a.article_id,
        "discussion_id": a.discussion_id,
        "published_at": a.published_at,
        "genre": a.genre,
        "title": a.title,
        "body_text": a.body_text,
    }


def write_corpus(
    discussions: Iterable[Discussion],
    directory,
    external_columns: Sequence[str] = (),
    seed: int = 0,
) -> CorpusManifest:
    """Write articles.jsonl, comments.jsonl and manifest.json into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    manifest = CorpusManifest(out / "articles.jsonl", out / "comments.jsonl", list(external_columns), {}, seed)
    with open(manifest.articles, "w", encoding="utf-8") as fa, open(manifest.comments, "w", encoding="utf-8") as fc:
        for d in discussions:
            fa.write(json.dumps(article_record(d.article), ensure_ascii=False) + "\n")
            for c in d.comments:
                fc.write(json.dumps(comment_record(c), ensure_ascii=False) + "\n")
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(relative_to=out), fh, indent=2)
        fh.write("\n")
    return manifest


def log1p_column(values) -> np.ndarray:
    return np.log1p(np.asarray(values, dtype=float))


def standardise(values, name: str = "") -> np.ndarray:
    """Z-score with the sample standard deviation; constant columns are an error."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise StandardisationError(name)
    sd = float(np.std(v, ddof=1))
    if not math.isfinite(sd) or sd == 0.0:
        raise StandardisationError(name)
    return (v - v.mean()) / sd


def comment_covariates(discussions: Sequence[Discussion], features) -> tuple[list[str], dict[str, np.ndarray], dict[str, list]]:
    """Raw per-comment covariates: (column names, numeric columns, id/label columns)."""
    from forumrank.textfeat import FEATURE_COLUMNS

    num: dict[str, list] = defaultdict(list)
    labels: dict[str, list] = defaultdict(list)
    for d in discussions:
        ids = features.comment_ids[d.discussion_id]
        if ids != d.comment_ids:
            raise ValueError(f"feature table does not match discussion {d.discussion_id}")
        cols = features.columns[d.discussion_id]
        up_mean, down_mean = float(d.upvotes.mean()), float(d.downvotes.mean())
        for i, c in enumerate(d.comments):
            labels["discussion_id"].append(d.discussion_id)
            labels["comment_id"].append(c.comment_id)
            labels["genre"].append(d.article.genre)
            r = int(d.root_of[i])
            num["upvotes"].append(c.upvotes)
            num["downvotes"].append(c.downvotes)
            num["editors_pick"].append(int(c.pinned))
            for name in FEATURE_COLUMNS:
                num[name].append(float(cols[name][i]))
            num["author_followers"].append(c.author_followers)
            num["is_root"].append(int(c.parent_id is None))
            num["is_leaf"].append(int(not d.children[i]))
            num["level_in_tree"].append(int(d.level[i]))
            num["size_of_tree"].append(d.tree_size[r])
            num["height_of_tree"].append(d.tree_height[r])
            num["hours_since_article"].append(max(0.0, (c.timestamp - d.article.published_at) / 3600.0))
            num["num_replies"].append(int(d.num_replies[i]))
            num["num_upvotes"].append(c.upvotes)
            num["num_downvotes"].append(c.downvotes)
            num["num_comments_in_discussion"].append(d.n)
            num["mean_upvotes_in_discussion"].append(up_mean)
            num["mean_downvotes_in_discussion"].append(down_mean)
    arrays = {k: np.asarray(v, dtype=float) for k, v in num.items()}
    return list(arrays), arrays, dict(labels)


OUTCOME_COLUMNS = ("upvotes", "downvotes", "editors_pick")
BINARY_COLUMNS = ("is_root", "is_leaf", "uses_second_person")


def export_regression_table(
    discussions: Sequence[Discussion],
    features,
    path,
    log_columns: Sequence[str] = LOG_COLUMNS,
    standardise_columns: Optional[Sequence[str]] = None,
) -> list[str]:
    """Write one CSV row per comment with model-ready explanatory columns.

    Outcomes (upvotes, downvotes, editors_pick) and binary indicators are
    written raw.  Columns in ``log_columns`` are log1p-transformed, then every
    other numeric column is z-standardised.  Returns the header.
    """
    names, cols, labels = comment_covariates(discussions, features)
    if standardise_columns is None:
        standardise_columns = [n for n in names if n not in OUTCOME_COLUMNS and n not in BINARY_COLUMNS]
    out = dict(cols)
    for name in log_columns:
        out[name] = log1p_column(out[name])
    for name in standardise_columns:
        out[name] = standardise(out[name], name)
    header = ["discussion_id", "comment_id", "genre"] + names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(labels.get("comment_id", []))):
            row = [labels["discussion_id"][i], labels["comment_id"][i], labels["genre"][i]]
            for n in names:
                v = out[n][i]
                row.append(str(int(v)) if n in OUTCOME_COLUMNS or n in BINARY_COLUMNS else repr(float(v)))
            w.writerow(row)
    return header


FORUM_TABLE_COLUMNS = (
    "discussion_id",
    "policy_id",
    "primary_ordering",
    "pinned",
    "reply_structure",
    "feature",
    "n",
    "phi",
    "phi_unit",
)


def export_forum_table(rows: Iterable[Mapping[str, str]], path) -> int:
    """Write FORUM results with one column per policy element, for beta regression on phi'.

    ``rows`` are result records as written to forum_results.csv; skipped
    rows are dropped.  Returns the number of rows written.
    """
    from forumrank.policy import parse_policy

    written = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORUM_TABLE_COLUMNS)
        for r in rows:
            if r.get("skipped_flag") == "1":
                continue
            p = parse_policy(r["policy_id"])
            w.writerow([
                r["discussion_id"],
                r["policy_id"],
                p.ordering_id,
                int(p.pin_mode.value == "pinned"),
                p.reply_mode.value,
                r["feature"],
                r["n"],
                r["phi"],
                r["phi_unit"],
            ])
            written += 1
    return written
