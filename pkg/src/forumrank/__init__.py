"""Evaluate comment-ranking policies on threaded news discussions.

The core metric is FORUM (feature-oriented ranking utility): how early a
ranking policy surfaces comments that score highly on a given feature,
normalised between the best (+1), random (0) and worst (-1) orderings.
"""

from forumrank.forum import ForumResult, evaluate_all, forum_score, phi_unit
from forumrank.model import (
    Article,
    Comment,
    Discussion,
    Ordering,
    PinMode,
    PolicyDescriptor,
    ReplyMode,
    build_discussion,
)
from forumrank.policy import build_ordering, enumerate_policies, parse_policy

__version__ = "0.1.0"

__all__ = [
    "Article",
    "Comment",
    "Discussion",
    "ForumResult",
    "Ordering",
    "PinMode",
    "PolicyDescriptor",
    "ReplyMode",
    "build_discussion",
    "build_ordering",
    "enumerate_policies",
    "evaluate_all",
    "forum_score",
    "parse_policy",
    "phi_unit",
]
