import json

import pandas as pd
import pytest

from conftest import run_config
from edgefactor.errors import ValidationError
from edgefactor.pipeline import ROBUSTNESS_VARIANTS, RunConfig, load_run_config, run_pipeline, run_variants

OUTPUTS = ["edge_factors.csv", "plot_data.csv", "area_groups.csv", "contributions.csv", "cohorts.tsv"]


def _status(res):
    return {r.name: r.status for r in res.stages}


def test_baseline_report(synth_dir, tmp_path):
    res = run_pipeline(run_config(synth_dir, tmp_path / "o", ci=True, samples=100))
    ef = res.edge_factors
    assert list(ef["location"]) == ["ALPHALAND", "BETAMARK", "GAMMASTAN"]
    assert list(ef.columns[:5]) == ["location", "contributions", "edge_factor", "ci_lo", "ci_hi"]
    for _, row in ef.iterrows():
        assert float(row["ci_lo"]) <= float(row["edge_factor"]) <= float(row["ci_hi"])
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert [s["name"] for s in manifest["stages"]] == ["scan", "cohorts", "contributions", "areas", "score", "report"]
    assert manifest["inputs"]["corpus"] and manifest["config"]["cutoff"] == 0.05
    plot = pd.read_csv(tmp_path / "o" / "plot_data.csv")
    assert list(plot.columns) == ["location", "value", "period"]


def test_rerun_is_cached_and_byte_identical(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path / "o", periods=["1995-2004", "2005-2016"], weight_period="2005-2016",
                     top_terms_window="2015-2016")
    first = run_pipeline(cfg)
    before = {f: (tmp_path / "o" / f).read_bytes() for f in OUTPUTS + ["period_edge_factors.csv", "top_terms.csv"]}
    second = run_pipeline(cfg)
    assert set(_status(first).values()) == {"ran"}
    assert set(_status(second).values()) == {"cached"}
    for f, data in before.items():
        assert (tmp_path / "o" / f).read_bytes() == data, f


def test_fresh_cache_reproduces_outputs(synth_dir, tmp_path):
    run_pipeline(run_config(synth_dir, tmp_path / "a", ci=True, samples=50, seed=4))
    run_pipeline(run_config(synth_dir, tmp_path / "b", ci=True, samples=50, seed=4))
    for f in OUTPUTS:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_cutoff_change_reruns_only_score_and_report(synth_dir, tmp_path):
    cfg = run_config(synth_dir, tmp_path / "o")
    run_pipeline(cfg)
    res = run_pipeline(cfg.replace(cutoff=0.20))
    assert _status(res) == {"scan": "cached", "cohorts": "cached", "contributions": "cached", "areas": "cached",
                            "score": "ran", "report": "ran"}


def test_all_robustness_variants_run(synth_dir, tmp_path):
    assert len(ROBUSTNESS_VARIANTS) == 8
    base = run_config(synth_dir, tmp_path / "o", groups=False)
    for name, delta in ROBUSTNESS_VARIANTS.items():
        assert len(delta) == 1, name
        base.replace(**delta)
    table = run_variants(base)
    assert list(table.columns) == ["baseline", *ROBUSTNESS_VARIANTS]
    assert table.notna().all().all()
    assert (table.loc["ALPHALAND"] > table.loc["GAMMASTAN"]).all()


def test_stop_after_score(synth_dir, tmp_path):
    res = run_pipeline(run_config(synth_dir, tmp_path / "o"), stop_after="score")
    assert [r.name for r in res.stages][-1] == "score"
    assert (tmp_path / "o" / "contributions.csv").is_file()
    assert not (tmp_path / "o" / "edge_factors.csv").exists()


def test_failed_stage_leaves_partial(synth_dir, tmp_path, monkeypatch):
    from edgefactor import pipeline

    def boom(*a, **k):
        raise RuntimeError("disk full")

    monkeypatch.setattr(pipeline, "_write_report", boom)
    with pytest.raises(RuntimeError):
        run_pipeline(run_config(synth_dir, tmp_path / "o"))
    partial = list((tmp_path / "o" / ".cache").glob("report-*.partial"))
    assert len(partial) == 1


def test_missing_input_is_validation_error(synth_dir, tmp_path):
    with pytest.raises(ValidationError):
        run_pipeline(run_config(synth_dir, tmp_path / "o").replace(journals=str(tmp_path / "nope.tsv")))


def test_config_validation():
    with pytest.raises(ValidationError):
        RunConfig(cutoff=1.5)
    with pytest.raises(ValidationError):
        RunConfig(weights="sideways")
    with pytest.raises(ValueError):
        RunConfig(missing="guess")
    assert RunConfig(weights="period:1990-1999").weight_table_spec()[1] == (1990, 1999)


def test_toml_config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('[inputs]\nvocab = "v.tsv"\ncorpus = "data/c.jsonl"\n\n[sample]\nchar_bounds = "off"\n\n'
                 '[scoring]\ncutoff = 0.1\nperiod = "2014-2016"\n')
    cfg = load_run_config(p)
    assert cfg.vocab == str(tmp_path / "v.tsv") and cfg.corpus == str(tmp_path / "data" / "c.jsonl")
    assert cfg.char_bounds is None and cfg.cutoff == 0.1 and cfg.period == (2014, 2016)
    p.write_text("mystery = 1\n")
    with pytest.raises(ValidationError):
        load_run_config(p)
