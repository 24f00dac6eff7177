"""News-comment-gap statistics: pick/vote overlap, RVP, comment gap and pin timing."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from forumrank.model import Discussion, ForumRankError
from forumrank.policy import derive_rng, rank_by_key


class VoteKey(enum.Enum):
    UPVOTES = "upvotes"
    RELATIVE_VOTES = "relvotes"


class NoPinnedCommentsError(ForumRankError, ValueError):
    pass


@dataclass(frozen=True)
class GapRow:
    discussion_id: str
    vote_key: str
    p: int
    jaccard: float
    overlap: float


def top_voted(discussion: Discussion, vote_key: VoteKey, p: int, seed: int = 0) -> np.ndarray:
    """Indices of the ``p`` highest-voted comments, ties split by a seeded shuffle."""
    if vote_key is VoteKey.UPVOTES:
        key = discussion.upvotes.astype(float)
    else:
        key = (discussion.upvotes - discussion.downvotes).astype(float)
    rng = derive_rng(seed, discussion.discussion_id, "gap", vote_key.value)
    return rank_by_key(key, rng)[:p]


def jaccard_gap(discussion: Discussion, vote_key: VoteKey = VoteKey.UPVOTES, seed: int = 0) -> GapRow:
    """Similarity between the p pinned comments and the p top-voted comments.

    Reports both |A & B| / |A | B| (Jaccard) and |A & B| / p (overlap).
    """
    pinned = set(np.flatnonzero(discussion.pinned).tolist())
    p = len(pinned)
    if p == 0:
        raise NoPinnedCommentsError(f"discussion {discussion.discussion_id} has no pinned comments")
    top = set(top_voted(discussion, vote_key, p, seed).tolist())
    inter = len(pinned & top)
    union = len(pinned | top)
    return GapRow(discussion.discussion_id, vote_key.value, p, inter / union, inter / p)


def gap_table(discussions: Iterable[Discussion], seed: int = 0) -> list[GapRow]:
    rows = []
    for d in discussions:
        if not d.pinned.any():
            continue
        for key in VoteKey:
            rows.append(jaccard_gap(d, key, seed))
    return rows


def gap_summary(rows: Sequence[GapRow]) -> list[dict]:
    out = []
    for key in VoteKey:
        sel = [r for r in rows if r.vote_key == key.value]
        if not sel:
            continue
        jac = float(np.mean([r.jaccard for r in sel]))
        ovl = float(np.mean([r.overlap for r in sel]))
        out.append({
            "vote_key": key.value,
            "discussions": len(sel),
            "mean_jaccard": jac,
            "mean_overlap": ovl,
            "gap_jaccard": 1.0 - jac,
            "gap_overlap": 1.0 - ovl,
        })
    return out


def rvp(beta_up: float, beta_down: float) -> float:
    """Relative voting preference: upvote minus downvote log-rate coefficient."""
    return beta_up - beta_down


def comment_gap(beta_pick: float, rvp_value: float) -> float:
    """Editors' pick log-odds coefficient minus the relative voting preference."""
    return beta_pick - rvp_value


def coeff_to_forum_delta(beta: float) -> float:
    """Change in FORUM implied by a beta-regression coefficient: (e^b - 1) / (e^b + 1)."""
    if not math.isfinite(beta):
        raise ValueError(f"coefficient must be finite, got {beta}")
    return math.tanh(beta / 2.0)


@dataclass(frozen=True)
class Coefficient:
    feature: str
    beta_pick: Optional[float]
    beta_up: float
    beta_down: float

    @property
    def rvp(self) -> float:
        return rvp(self.beta_up, self.beta_down)

    @property
    def comment_gap(self) -> Optional[float]:
        return None if self.beta_pick is None else comment_gap(self.beta_pick, self.rvp)


def _parse_beta(text: str, column: str, feature: str, optional: bool) -> Optional[float]:
    t = (text or "").strip().rstrip("*")
    if t in ("", "-", "NA", "nan") and optional:
        return None
    try:
        v = float(t)
    except ValueError:
        raise ValueError(f"feature {feature!r}: bad {column} value {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"feature {feature!r}: non-finite {column}")
    return v


def load_coefficients(path) -> list[Coefficient]:
    """Read a CSV with columns feature, beta_pick, beta_up, beta_down.

    A blank or ``-`` beta_pick marks a feature without an editors' pick
    coefficient; its comment gap is left empty.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"feature", "beta_pick", "beta_up", "beta_down"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for row in reader:
            f = row["feature"].strip()
            out.append(Coefficient(
                f,
                _parse_beta(row["beta_pick"], "beta_pick", f, optional=True),
                _parse_beta(row["beta_up"], "beta_up", f, optional=False),
                _parse_beta(row["beta_down"], "beta_down", f, optional=False),
            ))
    return out


def coefficient_report(coefs: Iterable[Coefficient]) -> list[dict]:
    rows = []
    for c in coefs:
        cg = c.comment_gap
        rows.append({
            "feature": c.feature,
            "beta_pick": "" if c.beta_pick is None else repr(c.beta_pick),
            "beta_up": repr(c.beta_up),
            "beta_down": repr(c.beta_down),
            "rvp": repr(c.rvp),
            "comment_gap": "" if cg is None else repr(cg),
            "exp_rvp": repr(math.exp(c.rvp)),
            "exp_comment_gap": "" if cg is None else repr(math.exp(cg)),
        })
    return rows


def load_forum_coefficients(path) -> list[tuple[str, float]]:
    """Read beta-regression terms from a CSV with columns term, beta."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"term", "beta"} <= set(reader.fieldnames or []):
            raise ValueError(f"{path}: expected columns term, beta")
        return [(r["term"].strip(), float(r["beta"])) for r in reader]


def forum_delta_report(terms: Iterable[tuple[str, float]]) -> list[dict]:
    return [{"term": t, "beta": repr(b), "delta_phi": repr(coeff_to_forum_delta(b))} for t, b in terms]


@dataclass(frozen=True)
class PinTimeSummary:
    n_pinned: int
    n_other: int
    median_minutes_pinned: float
    median_minutes_other: float
    median_percentile_pinned: float
    median_percentile_other: float


def time_percentiles(discussion: Discussion) -> tuple[np.ndarray, np.ndarray]:
    """Minutes after the first comment and time-rank percentile (0 = first, 100 = last).

    Percentile is (rank - 1) / (N - 1) with average ranks for equal
    timestamps; a single-comment discussion gets 0.
    """
    t = discussion.timestamps.astype(float)
    minutes = (t - t.min()) / 60.0
    if discussion.n == 1:
        return minutes, np.zeros(1)
    ranks = rankdata(t, method="average")
    return minutes, 100.0 * (ranks - 1.0) / (discussion.n - 1)


def pin_time_rows(discussions: Iterable[Discussion]) -> list[dict]:
    rows = []
    for d in discussions:
        minutes, pct = time_percentiles(d)
        for i, c in enumerate(d.comments):
            rows.append({
                "discussion_id": d.discussion_id,
                "comment_id": c.comment_id,
                "pinned": int(c.pinned),
                "minutes_after_first": float(minutes[i]),
                "time_percentile": float(pct[i]),
            })
    return rows


def pin_time_stats(discussions: Iterable[Discussion]) -> PinTimeSummary:
    rows = pin_time_rows(discussions)

    def med(key: str, pinned: int) -> float:
        vals = [r[key] for r in rows if r["pinned"] == pinned]
        return float(np.median(vals)) if vals else math.nan

    return PinTimeSummary(
        n_pinned=sum(r["pinned"] for r in rows),
        n_other=sum(1 - r["pinned"] for r in rows),
        median_minutes_pinned=med("minutes_after_first", 1),
        median_minutes_other=med("minutes_after_first", 0),
        median_percentile_pinned=med("time_percentile", 1),
        median_percentile_other=med("time_percentile", 0),
    )
