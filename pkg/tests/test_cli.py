import csv
import hashlib
import json
import math

import pytest

from citelens.cli import fmt_number, read_config, run

from conftest import G1_DIR

G1 = ["--input", str(G1_DIR)]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fmt_number():
    assert fmt_number(2) == "2"
    assert fmt_number(0.5) == "0.5"
    assert fmt_number(2.0) == "2"
    assert fmt_number(1 / 3) == repr(1 / 3)
    assert fmt_number(float("nan")) == ""
    assert fmt_number(None) == ""
    assert fmt_number(1e-7) == "1e-07"
    assert float(fmt_number(0.1 + 0.2)) == 0.1 + 0.2


def test_cascade_g1(tmp_path):
    out = tmp_path / "c"
    code = run(["cascade", *G1, "--horizon", "2004-01", "--latency-months", "24", "--exposure-months", "12",
                "--infection-months", "24", "--out", str(out)])
    assert code == 0
    rows = _rows(out / "cascade.csv")
    assert list(rows[0]) == ["doc_id", "t1", "R", "IC", "E_C", "D_total", "D_mean", "I"]
    b = next(r for r in rows if r["doc_id"] == "B")
    assert b == {"doc_id": "B", "t1": "2000-01", "R": "0", "IC": "2", "E_C": "2", "D_total": "1",
                 "D_mean": "0.5", "I": "2"}
    manifest = json.loads((out / "manifest.json").read_text())
    for key in ("command", "config_hash", "inputs", "version", "seed", "started", "finished"):
        assert key in manifest
    for path, digest in manifest["inputs"].items():
        assert hashlib.sha256(open(path, "rb").read()).hexdigest() == digest
    assert sorted(p.name for p in out.iterdir()) == ["cascade.csv", "cascade.meta.json", "manifest.json"]


def test_missing_d_mean_is_empty(tmp_path):
    out = tmp_path / "c"
    assert run(["cascade", *G1, "--horizon", "2010-01", "--out", str(out)]) == 0
    h = next(r for r in _rows(out / "cascade.csv") if r["doc_id"] == "H")
    assert h["IC"] == "0" and h["D_mean"] == ""


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    out = tmp_path / "c"
    assert run(["cascade", *G1, "--bogus", "--out", str(out)]) == 1
    assert "unrecognized arguments" in capsys.readouterr().err
    assert not out.exists()
    assert run([]) == 1
    assert run(["cascade", *G1, "--latency-months", "0", "--out", str(out)]) == 1
    assert run(["cascade", "--out", str(out)]) == 1
    assert not out.exists()


def test_missing_id_fail_policy(tmp_path, capsys):
    cits = tmp_path / "citations.csv"
    cits.write_text("citing_id,cited_id\nR1,B\nR1,GHOST\n")
    out = tmp_path / "o"
    code = run(["ingest", "--documents", str(G1_DIR / "documents.csv"), "--citations", str(cits),
                "--on-anomaly", "fail", "--out", str(out)])
    assert code == 2
    assert "R1 -> GHOST" in capsys.readouterr().err
    assert not out.exists()
    assert not any(p.name.startswith(".o.") for p in tmp_path.iterdir())
    # the default policy drops and reports it instead
    assert run(["ingest", "--documents", str(G1_DIR / "documents.csv"), "--citations", str(cits),
                "--out", str(out)]) == 0
    report = json.loads((out / "ingest_report.json").read_text())
    assert report["unknown_id_edges"] == 1 and report["n_edges"] == 1


def test_malformed_row_names_line(tmp_path, capsys):
    docs = tmp_path / "documents.csv"
    docs.write_text("doc_id,pub_date\nA,2000-01\nB,not-a-date\n")
    (tmp_path / "citations.csv").write_text("citing_id,cited_id\n")
    assert run(["ingest", "--input", str(tmp_path), "--out", str(tmp_path / "o")]) == 2
    assert f"{docs}:3:" in capsys.readouterr().err


def test_refuses_overwrite_without_force(tmp_path):
    out = tmp_path / "c"
    args = ["cascade", *G1, "--horizon", "2004-01", "--out", str(out)]
    assert run(args) == 0
    (out / "stray.txt").write_text("x")
    assert run(args) == 1
    assert (out / "stray.txt").exists()
    assert run(args + ["--force"]) == 0
    assert not (out / "stray.txt").exists()
    assert len(list(out.glob("manifest.json"))) == 1


def test_ingest_canonical_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["ingest", *G1, "--out", str(a)]) == 0
    assert run(["ingest", "--input", str(a), "--on-anomaly", "fail", "--out", str(b)]) == 0
    for name in ("documents.csv", "citations.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "documents.csv").read_text().splitlines()[:3] == ["doc_id,pub_date", "X,1999-08", "B,2000-01"]


def test_stats_outputs(tmp_path):
    out = tmp_path / "s"
    assert run(["stats", *G1, "--cohort-month", "2000-01", "--normalize-age", "--end-month", "2004-01",
                "--out", str(out)]) == 0
    rows = _rows(out / "time_since_last_citation.csv")
    assert list(rows[0]) == ["bin_lo", "bin_hi", "value"]
    since = {r["bin_lo"]: r["value"] for r in rows}
    assert since["8"] == "2"
    side = json.loads((out / "citation_age_2000-01.meta.json").read_text())
    assert side["normalization"] == "per_total_citations"
    age = _rows(out / "citation_age_2000-01.csv")
    assert age[0]["value"] == ""  # no citations made in month 0
    fit = json.loads((out / "citation_counts_log2.meta.json").read_text())["fit"]
    assert "error" in fit or "exponent" in fit


@pytest.mark.parametrize("analysis", ["visibility", "novelty", "popularity", "halo", "divided"])
def test_bias_analyses(tmp_path, analysis):
    sim = tmp_path / "sim"
    assert run(["simulate", "--set", "months=80", "--set", "docs_per_month=30", "--set", "refs_per_doc=6",
                "--set", "copy_prob=0.5", "--set", "recency_exponent=1", "--seed", "4", "--out", str(sim)]) == 0
    out = tmp_path / analysis
    code = run(["bias", "--input", str(sim), "--analysis", analysis, "--latency-months", "6",
                "--latencies", "6,12,18", "--out", str(out)])
    assert code == 0
    stats = json.loads((out / "stats.json").read_text())
    assert stats["units"] == "nats" and stats["binning"] == "log2_bins"
    if analysis in ("popularity", "divided"):
        assert set(stats["mi"]) >= {"MI", "CMI", "II", "n"}
    if analysis == "visibility":
        assert -1 <= stats["visibility"]["r_ec"] <= 1
    if analysis == "novelty":
        assert [r["latency_months"] for r in _rows(out / "novelty.csv")] == ["6", "12", "18"]
    for entry in stats.get("curves", []):
        rows = _rows(out / (entry["file"] + ".csv"))
        assert rows and all(int(r["n"]) >= 1 for r in rows)


def test_bias_analysis_error_is_data_error(tmp_path, capsys):
    # G1 has too few rows for a regression
    code = run(["bias", *G1, "--horizon", "2004-01", "--analysis", "visibility", "--out", str(tmp_path / "v")])
    assert code == 2
    assert "at least 3 rows" in capsys.readouterr().err


def test_simulate_config_and_json(tmp_path):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text("# generator\nmonths = 12\ndocs_per_month = 5\nrefs_per_doc = 2  # k\nseed = 1\n")
    out = tmp_path / "s"
    assert run(["simulate", "--config", str(cfg), "--set", "seed=7", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["generator"]["months"] == 12
    assert len(_rows(out / "documents.csv")) == 60
    assert run(["simulate", "--config", str(cfg), "--set", "colour=red", "--out", str(tmp_path / "t")]) == 1
    j = tmp_path / "j"
    assert run(["cascade", "--input", str(out), "--format", "json", "--latency-months", "2",
                "--exposure-months", "1", "--infection-months", "2", "--out", str(j)]) == 0
    records = json.loads((j / "cascade.json").read_text())
    assert set(records[0]) == {"doc_id", "t1", "R", "IC", "E_C", "D_total", "D_mean", "I"}
    assert all(r["D_mean"] is None or not math.isnan(r["D_mean"]) for r in records)


def test_read_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("months 12\n")
    with pytest.raises(Exception, match="bad.cfg:1"):
        read_config(bad)


@pytest.mark.parametrize("threads", ["1", "2", "5"])
def test_outputs_independent_of_threads(tmp_path, threads):
    base = ["--set", "months=60", "--set", "docs_per_month=25", "--set", "refs_per_doc=5",
            "--set", "copy_prob=0.3", "--seed", "11"]
    ref, other = tmp_path / "ref", tmp_path / "other"
    assert run(["simulate", *base, "--threads", "1", "--out", str(ref / "sim")]) == 0
    assert run(["simulate", *base, "--threads", threads, "--out", str(other / "sim")]) == 0
    for sub in ("ref", "other"):
        t = "1" if sub == "ref" else threads
        assert run(["cascade", "--input", str(tmp_path / sub / "sim"), "--latency-months", "12",
                    "--threads", t, "--out", str(tmp_path / sub / "cas")]) == 0
    for rel in ("sim/documents.csv", "sim/citations.csv", "cas/cascade.csv"):
        assert (ref / rel).read_bytes() == (other / rel).read_bytes()
