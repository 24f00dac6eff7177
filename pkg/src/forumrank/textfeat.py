"""Per-comment text features: lexical diversity, readability, topical similarity and counts."""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from forumrank.model import Article, Comment, Discussion, ForumRankError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_VOWELS = set("aeiouyäöü")
# vowel pairs pronounced as a single German syllable nucleus
_DIPHTHONGS = ("äu", "ei", "ie", "au", "eu", "ai", "ey", "ay", "aa", "ee", "oo")

FEATURE_COLUMNS = (
    "sentiment_compound",
    "lexical_diversity",
    "readability",
    "topical_similarity",
    "num_punctuation",
    "num_sentences",
    "uses_second_person",
)

SMOG_SLOPE = 1.043
SMOG_INTERCEPT = 3.1291


class MissingSentimentError(ForumRankError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class FeatureConfig:
    polysyllable_threshold: int = 3
    sentence_terminators: str = ".!?"
    second_person: tuple[str, ...] = ("Du", "Sie")
    punctuation: str = "!?.,;:-\"'()…"
    min_tokens: int = 3
    min_sentences: int = 1
    offset_mode: str = "global"

    def __post_init__(self):
        if self.polysyllable_threshold < 1 or self.min_tokens < 1 or self.min_sentences < 1:
            raise ValueError("feature thresholds must be >= 1")
        if self.offset_mode not in ("global", "none"):
            raise ValueError(f"unknown offset mode {self.offset_mode!r}")
        object.__setattr__(self, "second_person", tuple(self.second_person))

    @classmethod
    def from_file(cls, path) -> FeatureConfig:
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


DEFAULT_CONFIG = FeatureConfig()


def tokenize(text: str, lower: bool = True, config: FeatureConfig = DEFAULT_CONFIG) -> tuple[list[str], int]:
    """Split ``text`` into letter/digit tokens and count its sentences.

    A sentence is a run of text ending at one or more terminator characters
    (or at the end of the text) that contains at least one token.  Text made
    only of punctuation still counts as one sentence.
    """
    tokens = _TOKEN_RE.findall(text)
    if lower:
        tokens = [t.lower() for t in tokens]
    if not text.strip():
        return tokens, 0
    term = re.escape(config.sentence_terminators)
    pieces = re.split(f"[{term}]+", text)
    sentences = sum(1 for p in pieces if _TOKEN_RE.search(p))
    return tokens, max(sentences, 1)


def count_syllables(word: str) -> int:
    """Vowel-nucleus syllable estimate with German diphthongs counted once."""
    w = word.lower()
    count = 0
    i = 0
    while i < len(w):
        if w[i] in _VOWELS:
            count += 1
            i += 2 if w[i : i + 2] in _DIPHTHONGS else 1
        else:
            i += 1
    return count


def cttr(text: str, config: FeatureConfig = DEFAULT_CONFIG) -> float:
    """Carroll's corrected type-token ratio V / sqrt(2T); 0 for short texts."""
    tokens, _ = tokenize(text, config=config)
    if len(tokens) < config.min_tokens:
        return 0.0
    return len(set(tokens)) / math.sqrt(2 * len(tokens))


def smog_grade(polysyllables: int, sentences: int) -> float:
    return SMOG_SLOPE * math.sqrt(polysyllables * 30.0 / sentences) + SMOG_INTERCEPT


def smog(text: str, config: FeatureConfig = DEFAULT_CONFIG, missing: float = math.nan) -> float:
    """SMOG readability grade, or ``missing`` when the text is too short to score.

    Missing values are later imputed with the corpus minimum by
    :func:`score_corpus`.
    """
    tokens, sentences = tokenize(text, lower=False, config=config)
    if len(tokens) < config.min_tokens or sentences < config.min_sentences:
        return missing
    poly = sum(1 for t in tokens if count_syllables(t) >= config.polysyllable_threshold)
    return smog_grade(poly, sentences)


@dataclass(frozen=True)
class IdfModel:
    idf: Mapping[str, float]
    n_documents: int
    fingerprint: str = ""

    def weight(self, term: str) -> float:
        """IDF of ``term``; unseen terms get the weight of a term with df = 0."""
        w = self.idf.get(term)
        if w is None:
            return math.log(1 + self.n_documents) + 1.0
        return w


def fit_idf(documents: Iterable[str], config: FeatureConfig = DEFAULT_CONFIG) -> IdfModel:
    """Smoothed IDF: ln((1 + D) / (1 + df)) + 1."""
    df: Counter[str] = Counter()
    D = 0
    for doc in documents:
        D += 1
        df.update(set(tokenize(doc, config=config)[0]))
    if D == 0:
        raise ValueError("cannot fit IDF on an empty corpus")
    idf = {t: math.log((1 + D) / (1 + c)) + 1.0 for t, c in sorted(df.items())}
    return IdfModel(idf, D, config.fingerprint())


def _tfidf_vector(tokens: Sequence[str], idf: IdfModel) -> dict[str, float]:
    return {t: c * idf.weight(t) for t, c in Counter(tokens).items()}


def tfidf_cosine(
    comment_text: str,
    article_text: str,
    idf: IdfModel,
    config: FeatureConfig = DEFAULT_CONFIG,
    min_tokens: Optional[int] = None,
) -> float:
    """Cosine of raw-count tf x idf vectors; 0 when either text is too short."""
    k = config.min_tokens if min_tokens is None else min_tokens
    a, _ = tokenize(comment_text, config=config)
    b, _ = tokenize(article_text, config=config)
    if len(a) < k or len(b) < k or not a or not b:
        return 0.0
    va, vb = _tfidf_vector(a, idf), _tfidf_vector(b, idf)
    if len(va) > len(vb):
        va, vb = vb, va
    dot = math.fsum(w * vb[t] for t, w in va.items() if t in vb)
    na = math.sqrt(math.fsum(w * w for w in va.values()))
    nb = math.sqrt(math.fsum(w * w for w in vb.values()))
    if na == 0 or nb == 0:
        return 0.0
    return min(1.0, max(0.0, dot / (na * nb)))


@dataclass(frozen=True)
class FeatureScores:
    comment_id: str
    sentiment_compound: float
    lexical_diversity: float
    readability: float  # NaN until imputed
    topical_similarity: float
    num_punctuation: int
    num_sentences: int
    uses_second_person: bool


def score_comment(
    comment: Comment,
    article: Article,
    idf: IdfModel,
    config: FeatureConfig = DEFAULT_CONFIG,
    require_sentiment: bool = True,
) -> FeatureScores:
    text = comment.text
    pre = comment.precomputed
    if "sentiment_pos" in pre and "sentiment_neg" in pre:
        compound = float(pre["sentiment_pos"]) - float(pre["sentiment_neg"])
    elif require_sentiment:
        raise MissingSentimentError(f"comment {comment.comment_id} lacks sentiment_pos/sentiment_neg")
    else:
        compound = math.nan
    raw_tokens, sentences = tokenize(text, lower=False, config=config)
    second = set(config.second_person)
    return FeatureScores(
        comment_id=comment.comment_id,
        sentiment_compound=compound,
        lexical_diversity=cttr(text, config),
        readability=smog(text, config),
        topical_similarity=tfidf_cosine(text, article.body_text, idf, config),
        num_punctuation=sum(1 for ch in text if ch in config.punctuation),
        num_sentences=sentences,
        uses_second_person=any(t in second for t in raw_tokens),
    )


def offset_nonnegative(values) -> tuple[np.ndarray, float]:
    """Shift ``values`` up by -min when the minimum is negative."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("offset_nonnegative needs at least one value")
    lo = float(np.nanmin(v))
    offset = -lo if lo < 0 else 0.0
    return v + offset, offset


@dataclass
class CorpusFeatures:
    """Feature columns per discussion, aligned with ``Discussion.comments``."""

    columns: dict[str, dict[str, np.ndarray]]
    comment_ids: dict[str, list[str]]
    offsets: dict[str, float] = field(default_factory=dict)
    readability_floor: float = math.nan
    config_fingerprint: str = ""

    def raw(self, discussion_id: str, feature: str) -> np.ndarray:
        return self.columns[discussion_id][feature]

    def forum_scores(self, discussion_id: str, feature: str) -> np.ndarray:
        """Offset (non-negative) scores for use as FORUM targets."""
        return self.columns[discussion_id][feature] + self.offsets.get(feature, 0.0)

    def forum_table(self, features: Sequence[str]) -> dict[str, dict[str, np.ndarray]]:
        return {did: {f: self.forum_scores(did, f) for f in features} for did in self.columns}

    def rows(self) -> Iterable[dict]:
        for did, cols in self.columns.items():
            for i, cid in enumerate(self.comment_ids[did]):
                row = {"discussion_id": did, "comment_id": cid}
                for name in FEATURE_COLUMNS:
                    v = cols[name][i]
                    row[name] = bool(v) if name == "uses_second_person" else (int(v) if name.startswith("num_") else float(v))
                yield row


FORUM_TARGETS = ("sentiment_compound", "lexical_diversity", "readability", "topical_similarity")


def score_corpus(
    discussions: Sequence[Discussion],
    config: FeatureConfig = DEFAULT_CONFIG,
    idf: Optional[IdfModel] = None,
    require_sentiment: bool = True,
) -> CorpusFeatures:
    """Score every comment, impute readability gaps and compute global offsets.

    The IDF model defaults to one fitted on all comments and article bodies.
    """
    if idf is None:
        docs = [c.text for d in discussions for c in d.comments] + [d.article.body_text for d in discussions]
        idf = fit_idf(docs, config)
    columns: dict[str, dict[str, np.ndarray]] = {}
    ids: dict[str, list[str]] = {}
    for d in discussions:
        scored = [score_comment(c, d.article, idf, config, require_sentiment) for c in d.comments]
        columns[d.discussion_id] = {
            name: np.array([getattr(s, name) for s in scored], dtype=bool if name == "uses_second_person" else float)
            for name in FEATURE_COLUMNS
        }
        ids[d.discussion_id] = [c.comment_id for c in d.comments]

    readable = [cols["readability"] for cols in columns.values()]
    all_read = np.concatenate(readable) if readable else np.empty(0)
    finite = all_read[~np.isnan(all_read)]
    floor = float(finite.min()) if finite.size else SMOG_INTERCEPT
    for cols in columns.values():
        r = cols["readability"]
        cols["readability"] = np.where(np.isnan(r), floor, r)

    offsets: dict[str, float] = {}
    if config.offset_mode == "global":
        for name in FORUM_TARGETS:
            vals = np.concatenate([cols[name] for cols in columns.values()]) if columns else np.empty(0)
            vals = vals[~np.isnan(vals)]
            offsets[name] = offset_nonnegative(vals)[1] if vals.size else 0.0
    return CorpusFeatures(columns, ids, offsets, floor, config.fingerprint())
