import subprocess
import sys

import pandas as pd
import pytest

from edgefactor.cli import main
from edgefactor.matcher import read_matches


def _inputs(d):
    return ["--vocab", str(d / "vocab.tsv"), "--categories", str(d / "categories.tsv"),
            "--corpus", str(d / "corpus.jsonl")]


def _all_inputs(d):
    return _inputs(d) + ["--journals", str(d / "journals.tsv"), "--gazetteer", str(d / "gazetteer.tsv"),
                         "--regions", str(d / "regions.tsv")]


def test_vocab_check(synth_dir, capsys):
    assert main(["vocab", "check", "--vocab", str(synth_dir / "vocab.tsv"),
                 "--categories", str(synth_dir / "categories.tsv")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("terms\t") and "dropped\t0" in out


def test_corpus_subcommands(synth_dir, tmp_path, capsys):
    assert main(["corpus", "stats", "--corpus", str(synth_dir / "corpus.jsonl"),
                 "--gazetteer", str(synth_dir / "gazetteer.tsv")]) == 0
    assert "ALPHALAND" in capsys.readouterr().out
    out = tmp_path / "groups.csv"
    assert main(["corpus", "classify-areas", "--corpus", str(synth_dir / "corpus.jsonl"),
                 "--journals", str(synth_dir / "journals.tsv"), "--out", str(out)]) == 0
    df = pd.read_csv(out)
    assert list(df.columns) == ["research_area", "papers", "research_area_group"]
    assert set(df["research_area_group"]) <= {"Applied", "BasicScience", "Other"}


def test_scan_and_cohorts(synth_dir, tmp_path, capsys):
    m = tmp_path / "m.bin"
    assert main(["scan", *_inputs(synth_dir), "--out", str(m), "--csv", str(tmp_path / "m.csv"), "--bench"]) == 0
    bench = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(bench["tokens_per_second"]) > 0 and float(bench["matches_per_second"]) > 0
    term_ids, papers, matches = read_matches(m)
    assert len(papers) == int(bench["papers"])
    c = tmp_path / "c.tsv"
    assert main(["cohorts", *_inputs(synth_dir), "--matches", str(m), "--mode", "synonym", "--floor", "1950",
                 "--out", str(c)]) == 0
    rows = [l.split("\t") for l in c.read_text().splitlines()]
    assert all(r[2] == ("excluded" if int(r[1]) < 1950 else "kept") for r in rows)


def test_score_and_report(synth_dir, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["score", *_all_inputs(synth_dir), "--out", str(out), "--period", "2015-2016",
                 "--cutoff", "0.05"]) == 0
    assert (out / "contributions.csv").is_file()
    assert main(["report", *_all_inputs(synth_dir), "--out", str(out), "--weights", "period:2013-2016",
                 "--missing", "zero", "--synonyms", "on", "--ci", "--samples", "60", "--seed", "3"]) == 0
    assert "ALPHALAND" in capsys.readouterr().out
    ef = pd.read_csv(out / "edge_factors.csv")
    assert ef["ci_lo"].notna().all()


def test_pipeline_with_config_and_robustness(synth_dir, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        f'vocab = "{synth_dir / "vocab.tsv"}"\ncategories = "{synth_dir / "categories.tsv"}"\n'
        f'corpus = "{synth_dir / "corpus.jsonl"}"\njournals = "{synth_dir / "journals.tsv"}"\n'
        f'gazetteer = "{synth_dir / "gazetteer.tsv"}"\nout_dir = "out"\n\n[report]\ngroups = false\n'
    )
    assert main(["pipeline", "--config", str(cfg), "--robustness"]) == 0
    table = pd.read_csv(tmp_path / "out" / "robustness.csv")
    assert table.shape == (3, 10)


def test_synth_subcommand(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "a"), "--seed", "2"]) == 0
    assert (tmp_path / "a" / "corpus.jsonl").stat().st_size > 0
    cfg = tmp_path / "s.toml"
    cfg.write_text('papers_per_year = 2\n[[locations]]\nname = "X"\nlag = 0\n')
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0


def test_exit_codes(synth_dir, tmp_path):
    # validation problem: missing input
    assert main(["report", "--vocab", str(tmp_path / "missing.tsv"), "--out", str(tmp_path / "o")]) == 1
    # validation problem: unknown idea-category group
    bad = tmp_path / "cats.tsv"
    bad.write_text("Finding\tAstrology\n")
    assert main(["vocab", "check", "--vocab", str(synth_dir / "vocab.tsv"), "--categories", str(bad)]) == 1
    # runtime problem: output directory cannot be created
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["synth", "--out", str(blocker / "sub")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["report", "--missing", "maybe"])
    assert exc.value.code == 2


def test_console_script_runs():
    res = subprocess.run([sys.executable, "-m", "edgefactor.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "edgefactor" in res.stdout
