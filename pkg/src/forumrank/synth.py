"""Deterministic synthetic discussions for tests, Monte-Carlo baselines and benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from forumrank.model import Article, Comment, Discussion, build_discussion
from forumrank.policy import derive_rng
from forumrank.textfeat import CorpusFeatures, FeatureConfig, score_corpus

EXTERNAL_COLUMNS = ("pred_upvotes_nbr", "pred_upvotes_xgb", "pred_picks_lr", "pred_picks_xgb")

_ONSETS = ("b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "w", "z", "sch", "st", "br", "kr", "pf")
_NUCLEI = ("a", "e", "i", "o", "u", "ä", "ö", "ü", "ei", "au", "ie", "eu")
_CODAS = ("", "", "n", "r", "s", "t", "ch", "ng", "l", "m")
_GENRES = ("Inland", "International", "Wirtschaft", "Kultur", "Sport", "Wissenschaft", "Meinung")


@dataclass(frozen=True)
class SynthConfig:
    n_comments: int = 200
    root_fraction: float = 0.316
    reply_depth_p: float = 0.55  # geometric parameter for reply depth below a root
    mean_upvotes: float = 5.4
    mean_downvotes: float = 1.4
    vote_dispersion: float = 1.0  # negative-binomial size; smaller = longer tail
    pinned_fraction: float = 0.005
    mean_gap_seconds: float = 90.0
    short_comment_fraction: float = 0.08
    vocabulary_size: int = 400
    external_columns: tuple[str, ...] = EXTERNAL_COLUMNS
    seed: int = 0
    discussion_id: str = "synth-0"

    def __post_init__(self):
        for name in ("root_fraction", "pinned_fraction", "short_comment_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_comments < 1:
            raise ValueError("n_comments must be >= 1")
        if not 0.0 < self.reply_depth_p <= 1.0:
            raise ValueError("reply_depth_p must lie in (0, 1]")
        if self.vote_dispersion <= 0:
            raise ValueError("vote_dispersion must be positive")


class SyntheticDiscussion(NamedTuple):
    discussion: Discussion
    features: CorpusFeatures


def _vocabulary(rng: np.random.Generator, size: int) -> list[str]:
    words = set()
    while len(words) < size:
        n_syl = int(rng.choice([1, 1, 2, 2, 2, 3, 3, 4, 5]))
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _NUCLEI[rng.integers(len(_NUCLEI))] + _CODAS[rng.integers(len(_CODAS))]
            for _ in range(n_syl)
        )
        words.add(w)
    return sorted(words)


def _negbin(rng: np.random.Generator, mean: float, size: float, n: int) -> np.ndarray:
    if mean <= 0:
        return np.zeros(n, dtype=np.int64)
    return rng.negative_binomial(size, size / (size + mean), n)


def _sentence(rng: np.random.Generator, words: list[str], topic: list[str], relevance: float) -> str:
    k = int(rng.integers(3, 13))
    picks = [topic[rng.integers(len(topic))] if rng.random() < relevance else words[rng.integers(len(words))] for _ in range(k)]
    if rng.random() < 0.15:
        picks.insert(int(rng.integers(len(picks) + 1)), "Sie" if rng.random() < 0.5 else "Du")
    if rng.random() < 0.3:
        j = int(rng.integers(1, len(picks)))
        picks[j - 1] += ","
    s = " ".join(picks)
    end = rng.choice([".", ".", ".", "?", "!", "!!!", "..."])
    return s[0].upper() + s[1:] + end


def _comment_text(rng, words, topic, config: SynthConfig) -> str:
    if rng.random() < config.short_comment_fraction:
        return " ".join(words[rng.integers(len(words))] for _ in range(int(rng.integers(0, 3))))
    relevance = float(rng.beta(1.5, 4.0))
    return " ".join(_sentence(rng, words, topic, relevance) for _ in range(int(rng.integers(1, 5))))


def generate_comments(config: SynthConfig) -> tuple[list[Comment], Article]:
    rng = derive_rng(config.seed, config.discussion_id, "synth")
    n = config.n_comments
    words = _vocabulary(rng, config.vocabulary_size)
    topic = [words[i] for i in rng.choice(len(words), size=min(40, len(words)), replace=False)]
    body = " ".join(_sentence(rng, words, topic, 0.7) for _ in range(12))

    published = 1_664_582_400 + int(rng.integers(0, 60 * 86400))
    gaps = rng.exponential(config.mean_gap_seconds, n).astype(np.int64) + 1
    times = published + np.cumsum(gaps)

    # chance of a new root so that the expected root share is root_fraction
    q = 0.0 if n == 1 else min(1.0, max(0.0, (config.root_fraction * n - 1) / (n - 1)))
    parent = np.full(n, -1, dtype=np.int64)
    children: list[list[int]] = [[] for _ in range(n)]
    roots = [0]
    for i in range(1, n):
        if rng.random() < q:
            roots.append(i)
            continue
        node = roots[int(rng.integers(len(roots)))]
        for _ in range(int(rng.geometric(config.reply_depth_p)) - 1):
            if not children[node]:
                break
            node = children[node][int(rng.integers(len(children[node])))]
        parent[i] = node
        children[node].append(i)

    up = _negbin(rng, config.mean_upvotes, config.vote_dispersion, n)
    down = _negbin(rng, config.mean_downvotes, config.vote_dispersion, n)
    pin_p = min(1.0, config.pinned_fraction / config.root_fraction) if config.root_fraction > 0 else 0.0
    pinned = (parent == -1) & (rng.random(n) < pin_p)
    followers = _negbin(rng, 40.0, 0.5, n)
    sentiment = rng.dirichlet((1.2, 1.5, 2.0), n)

    ext_noise = rng.normal(0.0, 1.0, (len(config.external_columns), n))
    log_up = np.log1p(up)
    comments = []
    for i in range(n):
        pre = {"sentiment_pos": float(sentiment[i, 0]), "sentiment_neg": float(sentiment[i, 1])}
        for k, col in enumerate(config.external_columns):
            if "pick" in col:
                z = 0.8 * log_up[i] - 0.3 * np.log1p(down[i]) + 2.5 * pinned[i] + 0.6 * ext_noise[k, i] - 3.0
                pre[col] = float(1.0 / (1.0 + np.exp(-z)))
            else:
                pre[col] = float(np.exp(log_up[i] + 0.4 * ext_noise[k, i]))
        comments.append(
            Comment(
                comment_id=f"{config.discussion_id}-c{i:05d}",
                discussion_id=config.discussion_id,
                parent_id=None if parent[i] < 0 else f"{config.discussion_id}-c{parent[i]:05d}",
                timestamp=int(times[i]),
                upvotes=int(up[i]),
                downvotes=int(down[i]),
                pinned=bool(pinned[i]),
                author_id=f"u{int(rng.integers(0, max(2, n // 3)))}",
                author_followers=int(followers[i]),
                text=_comment_text(rng, words, topic, config),
                precomputed=pre,
            )
        )
    article = Article(
        article_id=f"a-{config.discussion_id}",
        discussion_id=config.discussion_id,
        published_at=int(published),
        genre=_GENRES[int(rng.integers(len(_GENRES)))],
        body_text=body,
        title=" ".join(topic[:5]).title(),
    )
    return comments, article


def generate_discussion(config: SynthConfig, feature_config: Optional[FeatureConfig] = None) -> SyntheticDiscussion:
    """One synthetic discussion plus its feature scores (IDF fitted on itself)."""
    comments, article = generate_comments(config)
    d = build_discussion(comments, article)
    return SyntheticDiscussion(d, score_corpus([d], feature_config or FeatureConfig()))


def generate_corpus(config: SynthConfig, n_discussions: int, size_sigma: float = 0.0) -> list[Discussion]:
    """``n_discussions`` independent discussions with derived seeds.

    With ``size_sigma > 0`` discussion sizes are log-normal around
    ``config.n_comments``; otherwise every discussion has that size.
    """
    rng = derive_rng(config.seed, "corpus-sizes")
    out = []
    for k in range(n_discussions):
        n = config.n_comments
        if size_sigma > 0:
            n = max(1, int(round(config.n_comments * float(rng.lognormal(0.0, size_sigma)))))
        sub = replace(config, n_comments=n, discussion_id=f"d{k:05d}")
        comments, article = generate_comments(sub)
        out.append(build_discussion(comments, article))
    return out
