"""FORUM: feature-oriented ranking utility of a display ordering.

For an ordering o of N comments with non-negative feature scores s, the
cumulative curve is t_i = s(o_1) + ... + s(o_i).  It is compared with the
best (descending), worst (ascending) and random (i * T / N) curves:

    d_pr = t_i - t_i^r,   d_br = t_i^b - t_i^r,   d_rw = t_i^r - t_i^w

    gamma_i = d_pr / d_br   if d_pr >= 0
              d_pr / d_rw   otherwise

and the score over the first n positions is the mean of gamma_1..gamma_n.
gamma_N is always 0/0, so a whole discussion is scored with n = N - 1.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from forumrank.model import Discussion, ForumRankError, PolicyDescriptor
from forumrank.policy import DisplayOrdering, build_ordering

log = logging.getLogger(__name__)

# Denominators at or below this fraction of the discussion total count as zero.
ZERO_TOL = 1e-12
# Slack allowed on |d_pr| <= d_br / d_rw before it is treated as a bug.
BOUND_TOL = 1e-9

FORUM_FEATURES = ("sentiment_compound", "lexical_diversity", "readability", "topical_similarity")
RESULT_COLUMNS = ("discussion_id", "policy_id", "feature", "n", "phi", "phi_unit", "skipped_flag")


class NegativeScoreError(ForumRankError, ValueError):
    pass


class ForumDomainError(ForumRankError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CumulativeCurve:
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def total(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True, eq=False)
class Baselines:
    best: CumulativeCurve
    worst: CumulativeCurve
    random: CumulativeCurve

    @property
    def n(self) -> int:
        return self.random.n

    @property
    def total(self) -> float:
        return self.random.total


def _check_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or len(s) == 0:
        raise ValueError("scores must be a non-empty 1-d sequence")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    if (s < 0).any():
        raise NegativeScoreError("negative feature score; offset the feature to be non-negative first")
    return s


def cumulative_curve(scores, order: Optional[Sequence[int]] = None) -> CumulativeCurve:
    """Running sum of ``scores`` taken in ``order`` (identity when omitted)."""
    s = _check_scores(scores)
    if order is not None:
        s = s[np.asarray(order, dtype=np.int64)]
    return CumulativeCurve(np.cumsum(s))


def baseline_curves(scores) -> Baselines:
    s = _check_scores(scores)
    ascending = np.sort(s)
    n = len(s)
    total = math.fsum(s)
    best = np.cumsum(ascending[::-1])
    worst = np.cumsum(ascending)
    best[-1] = worst[-1] = total
    random = np.arange(1, n + 1) * (total / n)
    random[-1] = total
    return Baselines(CumulativeCurve(best), CumulativeCurve(worst), CumulativeCurve(random))


@dataclass(frozen=True, eq=False)
class Deltas:
    """Per-position deltas to the random baseline for i = 1..n."""

    policy_random: np.ndarray
    best_random: np.ndarray
    random_worst: np.ndarray

    @property
    def heaviside(self) -> np.ndarray:
        return self.policy_random >= 0


def deltas(curve: CumulativeCurve, baselines: Baselines, n: Optional[int] = None) -> Deltas:
    if curve.n != baselines.n:
        raise ValueError(f"curve has {curve.n} positions, baselines have {baselines.n}")
    n = baselines.n - 1 if n is None else n
    r = baselines.random.values[:n]
    d = Deltas(
        curve.values[:n] - r,
        baselines.best.values[:n] - r,
        r - baselines.worst.values[:n],
    )
    scale = max(abs(baselines.total), np.finfo(float).tiny)
    slack = BOUND_TOL * scale
    over = d.policy_random > d.best_random + slack
    under = -d.policy_random > d.random_worst + slack
    if over.any() or under.any():
        i = int(np.flatnonzero(over | under)[0]) + 1
        raise ForumDomainError(f"policy curve leaves the best/worst envelope at position {i}")
    return d


def gammas(curve: CumulativeCurve, baselines: Baselines, n: Optional[int] = None) -> np.ndarray:
    """Normalised policy deltas gamma_1..gamma_n (n defaults to N - 1)."""
    N = baselines.n
    n = N - 1 if n is None else n
    if n < 0 or n > N - 1:
        raise ForumDomainError(f"gamma is only defined for positions 1..{N - 1}, asked for {n}")
    d = deltas(curve, baselines, n)
    denom = np.where(d.heaviside, d.best_random, d.random_worst)
    zero = denom <= ZERO_TOL * max(abs(baselines.total), np.finfo(float).tiny)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(zero, 0.0, d.policy_random / np.where(zero, 1.0, denom))
    return np.clip(g, -1.0, 1.0)


def gamma(curve: CumulativeCurve, baselines: Baselines, i: int) -> float:
    """gamma_i for a single 1-based position ``i``."""
    if not 1 <= i <= baselines.n - 1:
        raise ForumDomainError(f"gamma_{i} undefined for N = {baselines.n}")
    return float(gammas(curve, baselines, i)[i - 1])


def interpolate_hidden(visible, n_total: int, total: float) -> CumulativeCurve:
    """Extend a visible-prefix curve by a straight line up to ``total`` at position N."""
    v = np.asarray(visible.values if isinstance(visible, CumulativeCurve) else visible, dtype=float)
    V = len(v)
    if V >= n_total:
        raise ForumDomainError(f"nothing hidden: {V} visible of {n_total}")
    start = v[-1] if V else 0.0
    if start > total + BOUND_TOL * max(abs(total), 1.0):
        raise ForumDomainError("visible cumulative score exceeds the discussion total")
    steps = np.arange(1, n_total - V + 1)
    tail = start + steps * ((total - start) / (n_total - V))
    tail[-1] = total
    return CumulativeCurve(np.concatenate([v, tail]))


def phi_unit(phi: float) -> float:
    """Map a FORUM score from [-1, 1] to [0, 1]."""
    if not -1.0 - 1e-12 <= phi <= 1.0 + 1e-12:
        raise ValueError(f"FORUM score {phi} outside [-1, 1]")
    return min(1.0, max(0.0, (phi + 1.0) / 2.0))


def display_curve(display: DisplayOrdering, scores) -> CumulativeCurve:
    """Policy curve for ``display``, interpolating across hidden replies."""
    s = _check_scores(scores)
    if display.visible_count >= len(s):
        return cumulative_curve(s, display.order)
    visible = np.cumsum(s[display.visible])
    return interpolate_hidden(visible, len(s), math.fsum(s))


@dataclass(frozen=True)
class ForumResult:
    discussion_id: str
    policy_id: str
    feature: str
    n: int
    phi: float
    phi_unit: float
    n_label: str = ""
    skipped: bool = False
    gammas: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def row(self) -> dict[str, str]:
        return {
            "discussion_id": self.discussion_id,
            "policy_id": self.policy_id,
            "feature": self.feature,
            "n": self.n_label or str(self.n),
            "phi": "" if self.skipped else repr(self.phi),
            "phi_unit": "" if self.skipped else repr(self.phi_unit),
            "skipped_flag": "1" if self.skipped else "0",
        }


def _n_label(n: Optional[int]) -> str:
    return "full" if n is None else str(n)


def _effective_n(n: Optional[int], N: int) -> int:
    if n is None:
        return N - 1
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > N - 1:
        log.debug("clamping n=%d to N-1=%d", n, N - 1)
    return min(n, N - 1)


def forum_score(
    discussion: Discussion | str,
    display: DisplayOrdering,
    scores,
    n: Optional[int] = None,
    *,
    feature: str = "",
    baselines: Optional[Baselines] = None,
) -> ForumResult:
    """FORUM score of ``display`` over its first ``n`` positions.

    ``n=None`` scores the whole discussion (n = N - 1); larger ``n`` is
    clamped to N - 1.  Single-comment discussions are returned with
    ``skipped=True`` because there is nothing to rank.
    """
    did = discussion if isinstance(discussion, str) else discussion.discussion_id
    pid = display.policy.policy_id if display.policy is not None else ""
    s = _check_scores(scores)
    N = len(s)
    if N < 2:
        log.warning("discussion %s has a single comment; skipped", did)
        return ForumResult(did, pid, feature, 0, math.nan, math.nan, _n_label(n), skipped=True)
    k = _effective_n(n, N)
    baselines = baselines or baseline_curves(s)
    g = gammas(display_curve(display, s), baselines, k)
    phi = float(np.mean(g))
    return ForumResult(did, pid, feature, k, phi, phi_unit(phi), _n_label(n), gammas=g)


def _evaluate_discussion(
    discussion: Discussion,
    scores: Mapping[str, np.ndarray],
    policies: Sequence[PolicyDescriptor],
    features: Sequence[str],
    n_list: Sequence[Optional[int]],
    seed: int,
) -> list[ForumResult]:
    did = discussion.discussion_id
    N = discussion.n
    if N < 2:
        return [
            ForumResult(did, p.policy_id, f, 0, math.nan, math.nan, _n_label(n), skipped=True)
            for p in policies
            for f in features
            for n in n_list
        ]
    checked = {f: _check_scores(scores[f]) for f in features}
    base = {f: baseline_curves(s) for f, s in checked.items()}
    ks = [_effective_n(n, N) for n in n_list]
    out = []
    for policy in policies:
        display = build_ordering(discussion, policy, seed)
        for f in features:
            g = gammas(display_curve(display, checked[f]), base[f], N - 1)
            prefix = np.cumsum(g)
            for n, k in zip(n_list, ks):
                phi = float(prefix[k - 1] / k)
                out.append(ForumResult(did, policy.policy_id, f, k, phi, phi_unit(phi), _n_label(n)))
    return out


@dataclass
class Evaluation:
    results: list[ForumResult]
    skipped_discussions: int = 0

    def write_csv(self, path) -> None:
        write_results_csv(self.results, path)


def evaluate_all(
    discussions: Sequence[Discussion],
    scores: Mapping[str, Mapping[str, np.ndarray]],
    policies: Sequence[PolicyDescriptor],
    features: Sequence[str] = FORUM_FEATURES,
    n_list: Sequence[Optional[int]] = (10, None),
    seed: int = 0,
    jobs: int = 1,
) -> Evaluation:
    """One result per (discussion, policy, feature, n).

    ``scores`` maps discussion_id -> feature -> non-negative score array
    aligned with ``Discussion.comments``.  ``None`` in ``n_list`` means the
    full discussion.  Output order is discussion, policy, feature, n
    regardless of ``jobs``.
    """
    args = [(d, {f: scores[d.discussion_id][f] for f in features}, policies, features, n_list, seed) for d in discussions]
    if jobs > 1 and len(discussions) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_evaluate_discussion, *zip(*args), chunksize=max(1, len(args) // (4 * jobs))))
    else:
        chunks = [_evaluate_discussion(*a) for a in args]
    skipped = sum(1 for d in discussions if d.n < 2)
    if skipped:
        log.warning("%d single-comment discussion(s) skipped", skipped)
    return Evaluation([r for chunk in chunks for r in chunk], skipped)


def write_results_csv(results: Iterable[ForumResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(r.row())


SUMMARY_COLUMNS = ("policy_id", "feature", "n", "count", "mean", "q1", "median", "q3", "min", "max")


def summarise(results: Iterable[ForumResult]) -> list[dict[str, str]]:
    """Mean and quartiles of phi per (policy, feature, n), skipping skipped rows."""
    groups: dict[tuple[str, str, str], list[float]] = {}
    for r in results:
        if r.skipped:
            continue
        groups.setdefault((r.policy_id, r.feature, r.n_label or str(r.n)), []).append(r.phi)
    rows = []
    for (pid, feat, n), vals in groups.items():
        a = np.asarray(vals)
        q1, med, q3 = np.quantile(a, [0.25, 0.5, 0.75])
        rows.append({
            "policy_id": pid,
            "feature": feat,
            "n": n,
            "count": str(len(a)),
            "mean": repr(float(a.mean())),
            "q1": repr(float(q1)),
            "median": repr(float(med)),
            "q3": repr(float(q3)),
            "min": repr(float(a.min())),
            "max": repr(float(a.max())),
        })
    return rows
