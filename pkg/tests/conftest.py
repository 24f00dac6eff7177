from __future__ import annotations

from pathlib import Path

import pytest

from forumrank.model import Article, Comment, build_discussion

DATA = Path(__file__).parent / "data"


def make_comment(cid, parent=None, t=0, up=0, down=0, pinned=False, text="", did="d1", **pre):
    return Comment(
        comment_id=cid,
        discussion_id=did,
        parent_id=parent,
        timestamp=t,
        upvotes=up,
        downvotes=down,
        pinned=pinned,
        text=text,
        precomputed=pre,
    )


def make_article(did="d1", body="", published_at=0):
    return Article(article_id=f"a-{did}", discussion_id=did, published_at=published_at, body_text=body)


def make_discussion(comments, did="d1", body=""):
    return build_discussion(comments, make_article(did, body))


@pytest.fixture
def abc():
    """A (root), B (reply to A), C (root); C posted last."""
    return make_discussion([
        make_comment("A", t=10, up=5),
        make_comment("B", parent="A", t=20, up=2),
        make_comment("C", t=30, up=9),
    ])


@pytest.fixture
def data_dir():
    return DATA


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
