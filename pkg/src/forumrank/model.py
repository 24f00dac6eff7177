"""Core domain types: comments, articles, reply forests and policy descriptors."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


class ForumRankError(Exception):
    """Base class for errors raised by this package."""


class StructureError(ForumRankError, ValueError):
    """A discussion's reply links do not form a valid forest."""

    def __init__(self, message: str, comment_id: Optional[str] = None):
        super().__init__(message)
        self.comment_id = comment_id


class EmptyDiscussionError(StructureError):
    pass


class MissingColumnError(ForumRankError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


@dataclass(frozen=True)
class Comment:
    comment_id: str
    discussion_id: str
    parent_id: Optional[str]
    timestamp: int
    upvotes: int = 0
    downvotes: int = 0
    pinned: bool = False
    author_id: str = ""
    author_followers: int = 0
    text: str = ""
    precomputed: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"comment {self.comment_id}: negative timestamp")
        for name in ("upvotes", "downvotes", "author_followers"):
            if getattr(self, name) < 0:
                raise ValueError(f"comment {self.comment_id}: negative {name}")
        if self.pinned and self.parent_id is not None:
            raise StructureError(
                f"comment {self.comment_id} is pinned but is not a root comment",
                self.comment_id,
            )

    @property
    def is_root(self) -> bool:
        return self.parent_id is None


@dataclass(frozen=True)
class Article:
    article_id: str
    discussion_id: str
    published_at: int
    genre: str = ""
    body_text: str = ""
    title: str = ""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Discussion:
    """A validated reply forest for one article.

    Comments are stored in canonical chronological order (timestamp, then
    comment_id); every integer index used elsewhere in the package refers
    to a position in ``comments``.
    """

    discussion_id: str
    article: Article
    comments: tuple[Comment, ...]
    index: Mapping[str, int]
    parent: np.ndarray  # -1 for roots
    children: tuple[tuple[int, ...], ...]
    roots: np.ndarray
    root_of: np.ndarray
    level: np.ndarray  # root = 1
    num_replies: np.ndarray  # direct + indirect
    subtrees: Mapping[int, np.ndarray]  # root -> depth-first chronological block
    tree_size: Mapping[int, int]
    tree_height: Mapping[int, int]
    timestamps: np.ndarray
    upvotes: np.ndarray
    downvotes: np.ndarray
    pinned: np.ndarray

    def __len__(self) -> int:
        return len(self.comments)

    @property
    def n(self) -> int:
        return len(self.comments)

    @property
    def comment_ids(self) -> list[str]:
        return [c.comment_id for c in self.comments]

    def ids_of(self, indices: Sequence[int]) -> list[str]:
        return [self.comments[i].comment_id for i in indices]

    def external_scores(self, column: str) -> np.ndarray:
        """Return the precomputed column ``column`` for every comment."""
        out = np.empty(self.n, dtype=float)
        for i, c in enumerate(self.comments):
            try:
                out[i] = float(c.precomputed[column])
            except KeyError:
                raise MissingColumnError(
                    f"comment {c.comment_id} has no precomputed column {column!r}"
                ) from None
        return out


def build_discussion(comments: Sequence[Comment], article: Article) -> Discussion:
    """Validate ``comments`` as a reply forest and precompute tree structure.

    Raises :class:`EmptyDiscussionError` for an empty list and
    :class:`StructureError` for mixed discussion ids, duplicate ids,
    dangling parents, cycles or pinned replies.
    """
    if not comments:
        raise EmptyDiscussionError(f"discussion {article.discussion_id} has no comments")
    did = article.discussion_id
    seen: set[str] = set()
    for c in comments:
        if c.discussion_id != did:
            raise StructureError(
                f"comment {c.comment_id} belongs to discussion {c.discussion_id}, not {did}",
                c.comment_id,
            )
        if c.comment_id in seen:
            raise StructureError(f"duplicate comment id {c.comment_id}", c.comment_id)
        seen.add(c.comment_id)

    ordered = tuple(sorted(comments, key=lambda c: (c.timestamp, c.comment_id)))
    index = {c.comment_id: i for i, c in enumerate(ordered)}
    n = len(ordered)

    parent = np.full(n, -1, dtype=np.int64)
    for i, c in enumerate(ordered):
        if c.parent_id is None:
            continue
        if c.parent_id == c.comment_id:
            raise StructureError(f"comment {c.comment_id} replies to itself (cycle)", c.comment_id)
        if c.parent_id not in index:
            raise StructureError(
                f"comment {c.comment_id} replies to unknown comment {c.parent_id}",
                c.comment_id,
            )
        parent[i] = index[c.parent_id]

    # Cycle detection: walk each node upward; 1 = on current path, 2 = settled.
    state = np.zeros(n, dtype=np.int8)
    for start in range(n):
        path = []
        node = start
        while node != -1 and state[node] == 0:
            state[node] = 1
            path.append(node)
            node = parent[node]
        if node != -1 and state[node] == 1:
            raise StructureError(
                f"reply cycle through comment {ordered[node].comment_id}",
                ordered[node].comment_id,
            )
        for p in path:
            state[p] = 2

    kids: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        if parent[i] >= 0:
            kids[parent[i]].append(i)  # ascending index == chronological
    children = tuple(tuple(k) for k in kids)
    roots = np.flatnonzero(parent == -1)

    root_of = np.empty(n, dtype=np.int64)
    level = np.empty(n, dtype=np.int64)
    num_replies = np.zeros(n, dtype=np.int64)
    subtrees: dict[int, np.ndarray] = {}
    tree_size: dict[int, int] = {}
    tree_height: dict[int, int] = {}
    for r in roots:
        r = int(r)
        block = []
        stack = [r]
        level[r] = 1
        while stack:
            node = stack.pop()
            block.append(node)
            root_of[node] = r
            for ch in reversed(children[node]):
                level[ch] = level[node] + 1
                stack.append(ch)
        block_arr = np.asarray(block, dtype=np.int64)
        subtrees[r] = _frozen(block_arr)
        tree_size[r] = len(block)
        tree_height[r] = int(level[block_arr].max())
        # descendants counted bottom-up in reverse pre-order
        for node in reversed(block):
            if parent[node] >= 0:
                num_replies[parent[node]] += num_replies[node] + 1

    return Discussion(
        discussion_id=did,
        article=article,
        comments=ordered,
        index=index,
        parent=_frozen(parent),
        children=children,
        roots=_frozen(roots),
        root_of=_frozen(root_of),
        level=_frozen(level),
        num_replies=_frozen(num_replies),
        subtrees=subtrees,
        tree_size=tree_size,
        tree_height=tree_height,
        timestamps=_frozen(np.array([c.timestamp for c in ordered], dtype=np.int64)),
        upvotes=_frozen(np.array([c.upvotes for c in ordered], dtype=np.int64)),
        downvotes=_frozen(np.array([c.downvotes for c in ordered], dtype=np.int64)),
        pinned=_frozen(np.array([c.pinned for c in ordered], dtype=bool)),
    )


class Ordering(enum.Enum):
    RANDOM = "random"
    UPVOTES = "upvotes"
    RELATIVE_VOTES = "relvotes"
    DOWNVOTES = "downvotes"
    REV_DOWNVOTES = "revdownvotes"
    CHRONOLOGICAL = "chrono"
    REV_CHRONOLOGICAL = "revchrono"
    EXTERNAL_SCORE = "score"


BUILTIN_ORDERINGS = (
    Ordering.RANDOM,
    Ordering.UPVOTES,
    Ordering.RELATIVE_VOTES,
    Ordering.DOWNVOTES,
    Ordering.REV_DOWNVOTES,
    Ordering.CHRONOLOGICAL,
    Ordering.REV_CHRONOLOGICAL,
)


class PinMode(enum.Enum):
    PINNED = "pinned"
    UNPINNED = "unpinned"


class ReplyMode(enum.Enum):
    HIDDEN = "hidden"
    TREES = "trees"
    LOOSE = "loose"


@dataclass(frozen=True)
class PolicyDescriptor:
    """One ranking policy: primary ordering x pin mode x reply structure."""

    ordering: Ordering
    pin_mode: PinMode
    reply_mode: ReplyMode
    column: Optional[str] = None
    salt: int = 0

    def __post_init__(self):
        if (self.ordering is Ordering.EXTERNAL_SCORE) != (self.column is not None):
            raise ValueError("a column name is required for, and only for, external-score orderings")

    @property
    def ordering_id(self) -> str:
        if self.ordering is Ordering.EXTERNAL_SCORE:
            return f"{self.ordering.value}:{self.column}"
        return self.ordering.value

    @property
    def policy_id(self) -> str:
        return f"{self.ordering_id}+{self.pin_mode.value}+{self.reply_mode.value}"

    def __str__(self) -> str:
        return self.policy_id
