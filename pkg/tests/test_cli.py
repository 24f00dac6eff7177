import csv
import json

import pytest

from forumrank.cli import main
from test_ingest import article, comment, corpus


@pytest.fixture(scope="module")
def synth_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--out", str(out), "--seed", "3", "--discussions", "3", "--comments", "25",
                 "--pinned-fraction", "0.1"]) == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestValidate:
    def test_clean(self, tmp_path, capsys):
        corpus(tmp_path, [comment("A"), comment("B", parent="A", t=1)])
        assert main(["validate", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "discussions: 1" in out and "comments: 2" in out

    def test_orphan_warns(self, tmp_path, capsys):
        corpus(tmp_path, [comment("A"), comment("B", parent="nope", t=1)])
        assert main(["validate", str(tmp_path)]) == 1
        assert "warnings: 1" in capsys.readouterr().out

    def test_cycle_errors(self, tmp_path):
        corpus(tmp_path, [comment("R"), comment("A", parent="B", t=1), comment("B", parent="A", t=2)])
        assert main(["validate", str(tmp_path)]) == 2

    def test_malformed_errors(self, tmp_path, capsys):
        corpus(tmp_path, ["{{"])
        assert main(["validate", str(tmp_path)]) == 2
        assert "comments.jsonl:1" in capsys.readouterr().err


class TestEvaluate:
    def test_all_policies(self, synth_corpus, tmp_path):
        assert main(["evaluate", str(synth_corpus), "--out", str(tmp_path), "--seed", "1"]) == 0
        meta = json.loads((tmp_path / "run_metadata.json").read_text())
        assert len(meta["policies"]) == 66
        rows = read_csv(tmp_path / "forum_results.csv")
        assert len(rows) == 3 * 66 * 4 * 2
        assert list(rows[0]) == ["discussion_id", "policy_id", "feature", "n", "phi", "phi_unit", "skipped_flag"]
        summary = read_csv(tmp_path / "forum_summary.csv")
        assert len(summary) == 66 * 4 * 2

    def test_default_expression(self, synth_corpus, tmp_path):
        args = ["evaluate", str(synth_corpus), "--out", str(tmp_path), "--seed", "1",
                "--policies", "revchrono+pinned+trees", "--features", "readability", "--n", "full"]
        assert main(args) == 0
        rows = read_csv(tmp_path / "forum_results.csv")
        assert {r["policy_id"] for r in rows} == {"revchrono+pinned+trees"}
        assert len(rows) == 3

    def test_unknown_policy_usage_error(self, synth_corpus, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["evaluate", str(synth_corpus), "--out", str(tmp_path), "--seed", "1", "--policies", "best+pinned+trees"])
        assert e.value.code == 2

    def test_seed_required(self, synth_corpus, tmp_path):
        with pytest.raises(SystemExit):
            main(["evaluate", str(synth_corpus), "--out", str(tmp_path)])

    def test_empty_corpus(self, tmp_path, capsys):
        corpus(tmp_path, [], [article()])
        assert main(["evaluate", str(tmp_path), "--out", str(tmp_path / "o"), "--seed", "1"]) == 2
        assert "no discussions" in capsys.readouterr().err

    def test_byte_identical(self, synth_corpus, tmp_path):
        for name in ("a", "b"):
            assert main(["evaluate", str(synth_corpus), "--out", str(tmp_path / name), "--seed", "9",
                         "--policies", "random+unpinned+loose,upvotes+pinned+hidden"]) == 0
        for f in ("forum_results.csv", "forum_summary.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


class TestGap:
    def test_known_fixture(self, tmp_path, data_dir, capsys):
        ups = {"A": 1, "B": 9, "C": 7, "D": 0}
        corpus(tmp_path, [comment(c, t=i, up=ups[c], pinned=c in "AB") for i, c in enumerate("ABCD")])
        out = tmp_path / "o"
        assert main(["gap", str(tmp_path), "--out", str(out), "--seed", "0",
                     "--coefficients", str(data_dir / "vote_pick_coefficients.csv")]) == 0
        rows = read_csv(out / "gap_per_discussion.csv")
        assert [(r["vote_key"], float(r["jaccard"]), float(r["overlap"])) for r in rows] == [
            ("upvotes", 1 / 3, 0.5), ("relvotes", 1 / 3, 0.5)]
        report = {r["feature"]: r for r in read_csv(out / "coefficient_report.csv")}
        expected = {r["feature"]: r for r in read_csv(data_dir / "rvp_gap_expected.csv")}
        for f, e in expected.items():
            assert float(report[f]["rvp"]) == pytest.approx(float(e["rvp"]), abs=0.002)
            if e["comment_gap"] not in ("", "-"):
                assert float(report[f]["comment_gap"]) == pytest.approx(float(e["comment_gap"]), abs=0.002)

    def test_without_coefficients(self, tmp_path, capsys):
        corpus(tmp_path, [comment("A", pinned=True, up=3), comment("B", t=1)])
        assert main(["gap", str(tmp_path), "--out", str(tmp_path / "o"), "--seed", "0"]) == 0
        assert "no coefficient file" in capsys.readouterr().out
        assert (tmp_path / "o" / "gap_summary.csv").exists()
        assert not (tmp_path / "o" / "coefficient_report.csv").exists()

    def test_no_pinned_notice(self, tmp_path, capsys):
        corpus(tmp_path, [comment("A"), comment("B", t=1)])
        assert main(["gap", str(tmp_path), "--out", str(tmp_path / "o"), "--seed", "0"]) == 0
        assert "no discussions with pinned comments" in capsys.readouterr().out
        assert read_csv(tmp_path / "o" / "gap_per_discussion.csv") == []

    def test_forum_coefficients(self, tmp_path):
        corpus(tmp_path, [comment("A", pinned=True)])
        (tmp_path / "beta.csv").write_text("term,beta\nupvotes,0.890\nrelvotes,0.773\n")
        assert main(["gap", str(tmp_path), "--out", str(tmp_path / "o"), "--seed", "0",
                     "--forum-coefficients", str(tmp_path / "beta.csv")]) == 0
        rows = read_csv(tmp_path / "o" / "forum_delta_report.csv")
        assert [round(float(r["delta_phi"]), 3) for r in rows] == [0.418, 0.368]


def test_features_and_export(synth_corpus, tmp_path):
    assert main(["features", str(synth_corpus), "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "features.csv")) > 0
    assert main(["evaluate", str(synth_corpus), "--out", str(tmp_path), "--seed", "2",
                 "--policies", "chrono+unpinned+trees"]) == 0
    assert main(["export", str(synth_corpus), "--out", str(tmp_path),
                 "--forum-results", str(tmp_path / "forum_results.csv")]) == 0
    reg = read_csv(tmp_path / "regression_table.csv")
    assert len(reg) == len(read_csv(tmp_path / "features.csv"))
    ft = read_csv(tmp_path / "forum_table.csv")
    assert len(ft) == 3 * 4 * 2
    assert all(0.0 <= float(r["phi_unit"]) <= 1.0 for r in ft)


def test_synth_writes_ingestible_corpus(synth_corpus, capsys):
    assert main(["validate", str(synth_corpus)]) == 0
    assert (synth_corpus / "manifest.json").exists()
