"""Turn a discussion plus a policy descriptor into a concrete display ordering."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from forumrank.model import (
    BUILTIN_ORDERINGS,
    Discussion,
    MissingColumnError,
    Ordering,
    PinMode,
    PolicyDescriptor,
    ReplyMode,
)

DEFAULT_POLICY = "revchrono+pinned+trees"

_ORDERING_ALIASES = {
    "random": Ordering.RANDOM,
    "upvotes": Ordering.UPVOTES,
    "relvotes": Ordering.RELATIVE_VOTES,
    "relativevotes": Ordering.RELATIVE_VOTES,
    "downvotes": Ordering.DOWNVOTES,
    "revdownvotes": Ordering.REV_DOWNVOTES,
    "chrono": Ordering.CHRONOLOGICAL,
    "chronological": Ordering.CHRONOLOGICAL,
    "revchrono": Ordering.REV_CHRONOLOGICAL,
    "revchronological": Ordering.REV_CHRONOLOGICAL,
    "score": Ordering.EXTERNAL_SCORE,
    "external": Ordering.EXTERNAL_SCORE,
}


class PolicySyntaxError(ValueError):
    pass


def derive_rng(seed: int, *keys: str) -> np.random.Generator:
    """Independent generator for (seed, keys...), stable across processes."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for key in keys:
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        words.append(int.from_bytes(digest[:8], "little"))
    return np.random.default_rng(np.random.SeedSequence(words))


def policy_rng(seed: int, discussion_id: str, policy: PolicyDescriptor) -> np.random.Generator:
    return derive_rng(seed, discussion_id, policy.policy_id, str(policy.salt))


@dataclass(frozen=True, eq=False)
class DisplayOrdering:
    """Positions o_1..o_N as comment indices; only the first ``visible_count`` are shown.

    In hidden-reply mode the replies are kept after ``visible_count`` in
    chronological order so the ordering is always a full permutation.
    """

    order: np.ndarray
    visible_count: int
    reply_mode: ReplyMode
    policy: Optional[PolicyDescriptor] = None
    seed: Optional[int] = None

    @property
    def visible(self) -> np.ndarray:
        return self.order[: self.visible_count]

    @property
    def hidden(self) -> np.ndarray:
        return self.order[self.visible_count :]

    def comment_ids(self, discussion: Discussion) -> list[str]:
        return discussion.ids_of(self.order)


def sort_key(discussion: Discussion, ordering: Ordering, column: Optional[str] = None) -> np.ndarray:
    """Key such that *descending* key order is the requested display order."""
    if ordering is Ordering.RANDOM:
        return np.zeros(discussion.n)
    if ordering is Ordering.UPVOTES:
        return discussion.upvotes.astype(float)
    if ordering is Ordering.RELATIVE_VOTES:
        return (discussion.upvotes - discussion.downvotes).astype(float)
    if ordering is Ordering.DOWNVOTES:
        return discussion.downvotes.astype(float)
    if ordering is Ordering.REV_DOWNVOTES:
        return -discussion.downvotes.astype(float)
    if ordering is Ordering.CHRONOLOGICAL:
        return -discussion.timestamps.astype(float)
    if ordering is Ordering.REV_CHRONOLOGICAL:
        return discussion.timestamps.astype(float)
    if ordering is Ordering.EXTERNAL_SCORE:
        if column is None:
            raise MissingColumnError("external-score ordering needs a column name")
        return discussion.external_scores(column)
    raise ValueError(f"unknown ordering {ordering}")


def rank_by_key(key: np.ndarray, rng: np.random.Generator, subset: Optional[np.ndarray] = None) -> np.ndarray:
    """Indices sorted by descending ``key``; equal keys are placed in random order."""
    idx = np.arange(len(key)) if subset is None else np.asarray(subset, dtype=np.int64)
    tiebreak = rng.permutation(len(idx))
    # lexsort: last key is primary
    perm = np.lexsort((tiebreak, -key[idx]))
    return idx[perm]


def order_primary(
    discussion: Discussion,
    ordering: Ordering,
    rng: np.random.Generator,
    column: Optional[str] = None,
    subset: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Rank comments (or only ``subset``) by the primary ordering."""
    return rank_by_key(sort_key(discussion, ordering, column), rng, subset)


def apply_reply_structure(discussion: Discussion, ranked: Sequence[int], reply_mode: ReplyMode) -> DisplayOrdering:
    ranked = np.asarray(ranked, dtype=np.int64)
    if reply_mode is ReplyMode.LOOSE:
        return DisplayOrdering(ranked, len(ranked), reply_mode)
    is_root = discussion.parent[ranked] == -1
    root_order = ranked[is_root]
    if reply_mode is ReplyMode.HIDDEN:
        replies = np.flatnonzero(discussion.parent != -1)
        return DisplayOrdering(np.concatenate([root_order, replies]), len(root_order), reply_mode)
    if reply_mode is ReplyMode.TREES:
        blocks = [discussion.subtrees[int(r)] for r in root_order]
        order = np.concatenate(blocks) if blocks else np.empty(0, dtype=np.int64)
        return DisplayOrdering(order, len(order), reply_mode)
    raise ValueError(f"unknown reply mode {reply_mode}")


def apply_pinning(discussion: Discussion, display: DisplayOrdering, pin_mode: PinMode) -> DisplayOrdering:
    """Move pinned roots (with their reply blocks in tree mode) to the top, stably."""
    if pin_mode is PinMode.UNPINNED or not discussion.pinned.any():
        return display
    visible = display.visible
    if display.reply_mode is ReplyMode.TREES:
        moves = discussion.pinned[discussion.root_of[visible]]
    else:
        moves = discussion.pinned[visible]
    reordered = np.concatenate([visible[moves], visible[~moves], display.hidden])
    return DisplayOrdering(reordered, display.visible_count, display.reply_mode, display.policy, display.seed)


def build_ordering(discussion: Discussion, policy: PolicyDescriptor, seed: int) -> DisplayOrdering:
    """Full display ordering of ``discussion`` under ``policy``, deterministic per seed."""
    rng = policy_rng(seed, discussion.discussion_id, policy)
    subset = None if policy.reply_mode is ReplyMode.LOOSE else discussion.roots
    ranked = order_primary(discussion, policy.ordering, rng, policy.column, subset)
    display = apply_reply_structure(discussion, ranked, policy.reply_mode)
    display = apply_pinning(discussion, display, policy.pin_mode)
    return DisplayOrdering(display.order, display.visible_count, display.reply_mode, policy, seed)


def enumerate_policies(external_columns: Sequence[str] = ()) -> list[PolicyDescriptor]:
    """Cross product of primary orderings, pin modes and reply modes.

    With four external score columns this is 11 x 2 x 3 = 66 policies.
    """
    if len(set(external_columns)) != len(external_columns):
        raise ValueError(f"duplicate external score columns: {list(external_columns)}")
    primaries: list[tuple[Ordering, Optional[str]]] = [(o, None) for o in BUILTIN_ORDERINGS]
    primaries += [(Ordering.EXTERNAL_SCORE, c) for c in external_columns]
    return [
        PolicyDescriptor(o, pin, reply, column)
        for o, column in primaries
        for pin in (PinMode.PINNED, PinMode.UNPINNED)
        for reply in (ReplyMode.HIDDEN, ReplyMode.TREES, ReplyMode.LOOSE)
    ]


def parse_policy(expr: str) -> PolicyDescriptor:
    """Parse ``<ordering>[:<column>]+<pinned|unpinned>+<hidden|trees|loose>``."""
    parts = expr.strip().split("+")
    if len(parts) != 3:
        raise PolicySyntaxError(f"bad policy {expr!r}: expected <ordering>[:<column>]+<pin>+<replies>")
    head, pin, reply = (p.strip() for p in parts)
    name, _, column = head.partition(":")
    try:
        ordering = _ORDERING_ALIASES[name.lower()]
        pin_mode = PinMode(pin.lower())
        reply_mode = ReplyMode(reply.lower())
    except (KeyError, ValueError):
        raise PolicySyntaxError(f"bad policy {expr!r}") from None
    if (ordering is Ordering.EXTERNAL_SCORE) != bool(column):
        raise PolicySyntaxError(f"bad policy {expr!r}: column given for wrong ordering or missing")
    return PolicyDescriptor(ordering, pin_mode, reply_mode, column or None)


def select_policies(expr: str | Iterable[str], external_columns: Sequence[str] = ()) -> list[PolicyDescriptor]:
    """Resolve a filter like ``"all"`` or ``"upvotes+pinned+trees,random+unpinned+loose"``."""
    exprs = [s for s in (expr.split(",") if isinstance(expr, str) else expr) if s.strip()]
    if any(e.strip().lower() == "all" for e in exprs):
        return enumerate_policies(external_columns)
    policies = [parse_policy(e) for e in exprs]
    if not policies:
        raise PolicySyntaxError("no policies selected")
    return policies
