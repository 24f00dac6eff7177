import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import make_comment, make_discussion
from forumrank.forum import (
    ForumDomainError,
    NegativeScoreError,
    baseline_curves,
    cumulative_curve,
    deltas,
    evaluate_all,
    forum_score,
    gamma,
    gammas,
    interpolate_hidden,
    phi_unit,
    summarise,
)
from forumrank.policy import DisplayOrdering, build_ordering, enumerate_policies, parse_policy
from forumrank.model import ReplyMode
from oracles import brute_gammas, brute_phi, brute_phi_interpolated

S312 = [3.0, 1.0, 2.0]


def loose(order):
    order = np.asarray(order)
    return DisplayOrdering(order, len(order), ReplyMode.LOOSE)


def phi_of(scores, order, n=None):
    return forum_score("d", loose(order), scores, n).phi


class TestCurves:
    def test_cumulative(self):
        assert list(cumulative_curve(S312).values) == [3, 4, 6]
        assert list(cumulative_curve([5]).values) == [5]
        assert list(cumulative_curve(S312, [0, 2, 1]).values) == [3, 5, 6]

    def test_negative_rejected(self):
        with pytest.raises(NegativeScoreError):
            cumulative_curve([1, -0.5])

    def test_baselines(self):
        b = baseline_curves(S312)
        assert list(b.best.values) == [3, 5, 6]
        assert list(b.worst.values) == [1, 3, 6]
        assert list(b.random.values) == [2, 4, 6]

    def test_baselines_equal_scores(self):
        b = baseline_curves([2, 2, 2])
        for c in (b.best, b.worst, b.random):
            assert list(c.values) == [2, 4, 6]

    def test_single(self):
        b = baseline_curves([4.5])
        assert [list(c.values) for c in (b.best, b.worst, b.random)] == [[4.5]] * 3


class TestGamma:
    b = baseline_curves(S312)
    chrono = cumulative_curve(S312)

    def test_first_position(self):
        assert gamma(self.chrono, self.b, 1) == 1.0

    def test_second_position(self):
        assert gamma(self.chrono, self.b, 2) == 0.0

    def test_worst(self):
        worst = cumulative_curve(S312, [1, 2, 0])
        assert gamma(worst, self.b, 1) == -1.0

    def test_last_position_undefined(self):
        with pytest.raises(ForumDomainError):
            gamma(self.chrono, self.b, 3)

    def test_deltas_expose_heaviside(self):
        d = deltas(self.chrono, self.b)
        assert list(d.policy_random) == [1, 0]
        assert list(d.heaviside) == [True, True]

    def test_all_equal_scores_give_zero(self):
        s = [0.1] * 7
        assert np.all(gammas(cumulative_curve(s), baseline_curves(s)) == 0.0)

    def test_all_zero_scores(self):
        s = [0.0] * 4
        assert np.all(gammas(cumulative_curve(s), baseline_curves(s)) == 0.0)


class TestForumScore:
    def test_chronological_example(self):
        r = forum_score("d", loose([0, 1, 2]), S312)
        assert r.n == 2
        assert r.phi == pytest.approx(0.5)
        assert r.phi_unit == pytest.approx(0.75)
        assert list(r.gammas) == [1.0, 0.0]

    def test_extremes(self):
        assert phi_of(S312, [0, 2, 1]) == 1.0
        assert phi_of(S312, [1, 2, 0]) == -1.0

    def test_n_clamped(self):
        r = forum_score("d", loose([0, 1, 2]), S312, n=10)
        assert r.n == 2 and r.n_label == "10"
        assert r.phi == pytest.approx(0.5)

    def test_single_comment_skipped(self):
        r = forum_score("d", loose([0]), [1.0])
        assert r.skipped and math.isnan(r.phi)
        assert r.row()["skipped_flag"] == "1"

    def test_bad_n(self):
        with pytest.raises(ValueError):
            forum_score("d", loose([0, 1, 2]), S312, n=0)


class TestInterpolation:
    def test_example(self):
        assert list(interpolate_hidden([3.0], 3, 6.0).values) == [3.0, 4.5, 6.0]

    def test_single_endpoint(self):
        assert list(interpolate_hidden([1.0, 5.0], 3, 6.0).values) == [1.0, 5.0, 6.0]

    def test_flat_tail(self):
        assert list(interpolate_hidden([2.0, 6.0], 5, 6.0).values) == [2.0, 6.0, 6.0, 6.0, 6.0]

    def test_nothing_hidden(self):
        with pytest.raises(ForumDomainError):
            interpolate_hidden([1.0, 2.0], 2, 2.0)

    def test_hidden_mode_matches_oracle(self, abc):
        scores = np.array([3.0, 1.0, 2.0])  # A, B, C in canonical order
        disp = build_ordering(abc, parse_policy("upvotes+unpinned+hidden"), 0)
        assert abc.ids_of(disp.visible) == ["C", "A"]
        r = forum_score(abc, disp, scores)
        assert r.phi == pytest.approx(brute_phi_interpolated(scores[disp.visible], scores), abs=1e-12)
        assert -1 <= r.phi <= 1


class TestPhiUnit:
    @pytest.mark.parametrize("phi, expected", [(0, 0.5), (1, 1.0), (-1, 0.0), (0.5, 0.75)])
    def test_values(self, phi, expected):
        assert phi_unit(phi) == expected

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            phi_unit(1.5)


scores_st = st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=25)


@given(scores_st, st.randoms(use_true_random=False))
@settings(max_examples=300, deadline=None)
def test_bounds(scores, rnd):
    order = list(range(len(scores)))
    rnd.shuffle(order)
    b = baseline_curves(scores)
    curve = cumulative_curve(scores, order)
    d = deltas(curve, b)
    slack = 1e-9 * max(sum(scores), 1e-300)
    assert np.all(d.policy_random <= d.best_random + slack)
    assert np.all(-d.policy_random <= d.random_worst + slack)
    g = gammas(curve, b)
    assert np.all(np.abs(g) <= 1.0)


@given(st.lists(st.integers(0, 1000), min_size=2, max_size=40))
@settings(max_examples=200, deadline=None)
def test_best_and_worst_extremes(ints):
    s = np.array(ints, dtype=float)
    assume(len(set(ints)) >= 2)
    desc = np.argsort(-s, kind="stable")
    assert phi_of(s, desc) == pytest.approx(1.0, abs=1e-9)
    assert phi_of(s, desc[::-1]) == pytest.approx(-1.0, abs=1e-9)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=30, unique=True), st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_reverse_inverts(scores, rnd):
    order = list(range(len(scores)))
    rnd.shuffle(order)
    assert phi_of(scores, order[::-1]) == pytest.approx(-phi_of(scores, order), abs=1e-9)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=30), st.floats(0, 50), st.randoms(use_true_random=False))
@settings(max_examples=200, deadline=None)
def test_translation_covariance(scores, c, rnd):
    order = list(range(len(scores)))
    rnd.shuffle(order)
    s = np.array(scores)
    g0 = gammas(cumulative_curve(s, order), baseline_curves(s))
    g1 = gammas(cumulative_curve(s + c, order), baseline_curves(s + c))
    # shift only perturbs rounding; equal-score plateaus may flip between 0 and tiny values
    spread = s.max() - s.min()
    assume(spread > 1e-3)
    np.testing.assert_allclose(g1, g0, atol=1e-6)


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_exhaustive_oracle_equivalence(N):
    rng = np.random.default_rng(N)
    scores = rng.uniform(0, 5, N)
    for perm in itertools.permutations(range(N)):
        for n in range(1, N):
            got = phi_of(scores, perm, n)
            assert got == pytest.approx(brute_phi(scores[list(perm)], n), abs=1e-12)


def test_oracle_equivalence_with_ties():
    scores = np.array([2.0, 2.0, 0.0, 1.0, 2.0])
    for perm in itertools.permutations(range(5)):
        assert phi_of(scores, perm) == pytest.approx(brute_phi(scores[list(perm)]), abs=1e-12)


def test_expected_gamma_not_zero_for_skewed_scores():
    # {0, 0, 1}: first slot holds the 1 with prob 1/3 (gamma +1), else gamma -1
    s = [0.0, 0.0, 1.0]
    g1 = [brute_gammas([s[i] for i in p])[0] for p in itertools.permutations(range(3))]
    assert sum(g1, Fraction(0)) / len(g1) == Fraction(-1, 3)
    # full-discussion FORUM is still unbiased: reversal pairs cancel
    full = [brute_phi([s[i] for i in p]) for p in itertools.permutations(range(3))]
    assert sum(full) == pytest.approx(0.0, abs=1e-15)


def test_expected_gamma_zero_for_symmetric_scores():
    half = [0.5, 1.25, 3.0]
    s = half + [4.0 - x for x in half]  # symmetric about 2
    perms = list(itertools.permutations(range(len(s))))
    for i in range(len(s) - 1):
        mean = sum(brute_gammas([s[k] for k in p])[i] for p in perms) / len(perms)
        assert mean == 0


def test_random_expectation_monte_carlo():
    rng = np.random.default_rng(11)
    half = rng.uniform(0, 1, 10)
    s = np.concatenate([half, 1 - half])
    b = baseline_curves(s)
    g = np.array([gammas(cumulative_curve(s, rng.permutation(len(s))), b) for _ in range(10_000)])
    mean, se = g.mean(axis=0), g.std(axis=0, ddof=1) / np.sqrt(len(g))
    assert np.all(np.abs(mean) <= 3 * se + 1e-12)


class TestEvaluateAll:
    @pytest.fixture
    def corpus(self):
        from forumrank.synth import SynthConfig, generate_corpus
        from forumrank.textfeat import score_corpus

        ds = generate_corpus(SynthConfig(n_comments=30, seed=3), 2)
        return ds, score_corpus(ds).forum_table(["sentiment_compound", "lexical_diversity", "readability", "topical_similarity"])

    def test_row_count(self, corpus):
        ds, table = corpus
        pols = enumerate_policies(["pred_upvotes_nbr", "pred_upvotes_xgb", "pred_picks_lr", "pred_picks_xgb"])
        ev = evaluate_all(ds, table, pols, seed=1)
        assert len(ev.results) == 2 * 66 * 4 * 2
        assert all(-1 <= r.phi <= 1 for r in ev.results)

    def test_matches_forum_score(self, corpus):
        ds, table = corpus
        pol = parse_policy("upvotes+pinned+hidden")
        ev = evaluate_all(ds[:1], table, [pol], ["readability"], [10, None], seed=4)
        disp = build_ordering(ds[0], pol, 4)
        for r, n in zip(ev.results, [10, None]):
            assert r.phi == pytest.approx(forum_score(ds[0], disp, table[ds[0].discussion_id]["readability"], n).phi, abs=1e-15)

    def test_parallel_equals_serial(self, corpus):
        ds, table = corpus
        pols = enumerate_policies([])[:6]
        a = evaluate_all(ds, table, pols, seed=2)
        b = evaluate_all(ds, table, pols, seed=2, jobs=2)
        assert [r.row() for r in a.results] == [r.row() for r in b.results]

    def test_single_comment_discussion_flagged(self):
        d = make_discussion([make_comment("A", sentiment_pos=0.5, sentiment_neg=0.1)])
        ev = evaluate_all([d], {"d1": {"readability": np.array([4.0])}}, [parse_policy("random+unpinned+loose")], ["readability"])
        assert ev.skipped_discussions == 1
        assert all(r.skipped for r in ev.results)
        assert summarise(ev.results) == []

    def test_random_policy_mean_near_zero(self, corpus):
        from forumrank.synth import SynthConfig, generate_corpus
        from forumrank.textfeat import score_corpus

        d = generate_corpus(SynthConfig(n_comments=50, seed=9), 1)
        table = score_corpus(d).forum_table(["sentiment_compound", "lexical_diversity", "readability", "topical_similarity"])
        pol = parse_policy("random+unpinned+loose")
        for feat in table[d[0].discussion_id]:
            phis = [evaluate_all(d, table, [pol], [feat], [None], seed=s).results[0].phi for s in range(1000)]
            assert abs(np.mean(phis)) <= 0.05

    def test_reverse_policies_negate(self):
        rng = np.random.default_rng(5)
        downs = rng.permutation(200)[:40]
        d = make_discussion([make_comment(f"c{i:02d}", t=i, down=int(v)) for i, v in enumerate(downs)])
        table = {"d1": {"f": rng.uniform(0, 3, 40)}}
        pols = [parse_policy("downvotes+unpinned+loose"), parse_policy("revdownvotes+unpinned+loose")]
        fwd, rev = evaluate_all([d], table, pols, ["f"], [None], seed=0).results
        assert fwd.phi == pytest.approx(-rev.phi, abs=1e-9)
