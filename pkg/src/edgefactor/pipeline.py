"""End-to-end run: vocab -> scan -> cohorts -> contributions -> score -> report.

Every stage writes into a cache directory named by a digest of its inputs
(file contents and the config fields it depends on), so a rerun only
recomputes stages whose inputs changed. A failing stage leaves its
directory behind with a ``.partial`` suffix.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import shutil
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import aggregate as agg
from .cohort import CohortMode, apply_floor, min_years_from_matches, pool_synonyms, read_cohorts, \
    synonym_min_years, table_from_min_years, write_cohorts
from .corpus import AreaGroup, AreaStatusAccumulator, FilterConfig, Gazetteer, all_research_areas, \
    load_gazetteer, load_journals, load_publications, load_status_rules, passes_sample_filters, \
    resolve_location, translational_status, write_area_groups, StatusRules
from .errors import EdgeFactorError, ValidationError
from .matcher import build_matcher, read_matches, scan_texts, write_matches
from .scoring import ContributionBuilder, read_contributions, score_period, \
    write_contributions
from .vocab import IdeaGroup, load_thesaurus

logger = logging.getLogger(__name__)

Period = tuple[int, int]


def parse_period(text: str | Period | list) -> Period:
    if isinstance(text, (tuple, list)):
        lo, hi = text
        return int(lo), int(hi)
    lo, _, hi = str(text).partition("-")
    return int(lo), int(hi or lo)


@dataclass
class RunConfig:
    vocab: str = "vocab.tsv"
    categories: str = "categories.tsv"
    corpus: str = "corpus.jsonl"
    journals: str = "journals.tsv"
    gazetteer: str = "gazetteer.tsv"
    regions: str | None = None
    status_rules: str | None = None
    out_dir: str = "out"
    cache_dir: str | None = None

    year_lo: int = 1988
    year_hi: int = 2016
    char_bounds: Period | None = (200, 5000)
    original_only: bool = True

    cutoff: float = 0.05
    synonyms: bool = False
    floor_year: int = 1950
    period: Period = (2015, 2016)

    weights: str = "global"
    missing: str = "own-avg"
    ci: bool = False
    samples: int = 1000
    seed: int = 0
    draw: str = "uniform"
    groups: bool = True
    group_min_contributions: int | None = None
    group_fallback_period: Period | None = None
    periods: list[Period] = field(default_factory=list)
    weight_period: Period | None = None
    top_terms_window: Period | None = None
    top_n: int = 25

    workers: int = 1
    strip_accents: bool = False

    def __post_init__(self) -> None:
        self.period = parse_period(self.period)
        if self.char_bounds is not None:
            self.char_bounds = parse_period(self.char_bounds)
        self.periods = [parse_period(p) for p in self.periods]
        if self.weight_period is not None:
            self.weight_period = parse_period(self.weight_period)
        if self.group_fallback_period is not None:
            self.group_fallback_period = parse_period(self.group_fallback_period)
        if self.top_terms_window is not None:
            self.top_terms_window = parse_period(self.top_terms_window)
        if not 0 < self.cutoff < 1:
            raise ValidationError(f"cutoff must lie in (0, 1), got {self.cutoff}")
        agg.MissingPolicy(self.missing)
        self.weight_table_spec()

    def filters(self) -> FilterConfig:
        lo, hi = self.char_bounds if self.char_bounds is not None else (None, None)
        return FilterConfig(self.year_lo, self.year_hi, lo, hi, self.original_only)

    def weight_table_spec(self) -> tuple[agg.WeightScheme, Period | None]:
        w = self.weights
        if w == "global":
            return agg.WeightScheme.GLOBAL_COUNT, None
        if w == "own":
            return agg.WeightScheme.OWN_COUNT, None
        if w.startswith("period:"):
            return agg.WeightScheme.FIXED_PERIOD, parse_period(w.split(":", 1)[1])
        raise ValidationError(f"unknown weight scheme {w!r}")

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path | None = None) -> RunConfig:
        flat: dict = {}
        for k, v in d.items():
            if isinstance(v, dict):
                flat.update(v)
            else:
                flat[k] = v
        unknown = set(flat) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        for key in ("char_bounds", "group_min_contributions"):
            if flat.get(key) in (False, "off", "none"):
                flat[key] = None
        if base_dir is not None:
            for key in ("vocab", "categories", "corpus", "journals", "gazetteer", "regions", "status_rules",
                        "out_dir", "cache_dir"):
                if flat.get(key) is not None:
                    flat[key] = str(Path(base_dir) / flat[key])
        return cls(**flat)


def load_run_config(path: str | Path) -> RunConfig:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return RunConfig.from_dict(tomllib.load(fh), base_dir=Path(path).parent)


ROBUSTNESS_VARIANTS: dict[str, dict] = {
    "missing_zero": {"missing": "zero"},
    "own_weights": {"weights": "own"},
    "synonym_cohorts": {"synonyms": True},
    "top20": {"cutoff": 0.20},
    "top10": {"cutoff": 0.10},
    "top1": {"cutoff": 0.01},
    "all_papers": {"original_only": False},
    "no_char_limits": {"char_bounds": None},
}


# --------------------------------------------------------------------------
# digests and stage bookkeeping


def file_digest(path: str | Path | None) -> str | None:
    if path is None:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _key(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:20]


@dataclass
class StageRecord:
    name: str
    key: str
    status: str
    seconds: float
    rows: int


class StageRunner:
    def __init__(self, cache_dir: Path) -> None:
        self.cache_dir = cache_dir
        self.records: list[StageRecord] = []

    def run(self, name: str, key: str, build: Callable[[Path], int]) -> Path:
        final = self.cache_dir / f"{name}-{key}"
        done = final / ".rows"
        t0 = time.perf_counter()
        if done.is_file():
            self.records.append(StageRecord(name, key, "cached", time.perf_counter() - t0, int(done.read_text())))
            return final
        partial = final.with_name(final.name + ".partial")
        if partial.exists():
            shutil.rmtree(partial)
        partial.mkdir(parents=True)
        try:
            rows = build(partial)
        except Exception:
            logger.error("stage %s failed; partial outputs left in %s", name, partial)
            raise
        (partial / ".rows").write_text(str(rows))
        if final.exists():
            shutil.rmtree(final)
        partial.rename(final)
        self.records.append(StageRecord(name, key, "ran", time.perf_counter() - t0, rows))
        return final


# --------------------------------------------------------------------------
# run


@dataclass
class RunResult:
    out_dir: Path
    edge_factors: pd.DataFrame
    stages: list[StageRecord]
    manifest: dict


def _load_gazetteer(cfg: RunConfig) -> Gazetteer:
    return load_gazetteer(cfg.gazetteer, cfg.regions)


def run_pipeline(cfg: RunConfig, *, stop_after: str | None = None) -> RunResult:
    """Run (or reuse) every stage and copy the report files into ``cfg.out_dir``.

    ``stop_after="score"`` skips the report stage.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(cfg.cache_dir) if cfg.cache_dir else out_dir / ".cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    for path in (cfg.vocab, cfg.categories, cfg.corpus, cfg.journals, cfg.gazetteer, cfg.regions, cfg.status_rules):
        if path is not None and not Path(path).is_file():
            raise ValidationError(f"input file not found: {path}")

    digests = {
        name: file_digest(getattr(cfg, name))
        for name in ("vocab", "categories", "corpus", "journals", "gazetteer", "regions", "status_rules")
    }
    runner = StageRunner(cache_dir)
    thesaurus = load_thesaurus(cfg.vocab, cfg.categories, strip_accents=cfg.strip_accents)

    # scan: every paper, no filters
    scan_key = _key("scan", digests["vocab"], digests["categories"], digests["corpus"], cfg.strip_accents)

    def build_scan(d: Path) -> int:
        pubs = list(load_publications(cfg.corpus))
        matcher = build_matcher(thesaurus)
        res = scan_texts(matcher, [p.text for p in pubs], workers=cfg.workers)
        write_matches(d / "matches.bin", matcher.term_ids, [p.paper_id for p in pubs], res.matches)
        np.save(d / "years.npy", np.array([p.year for p in pubs], np.int64))
        return len(pubs)

    scan_dir = runner.run("scan", scan_key, build_scan)

    mode = CohortMode.SYNONYM_POOLED if cfg.synonyms else CohortMode.TERM_ONLY
    cohort_key = _key("cohorts", scan_key, mode.value, cfg.floor_year)

    def build_cohorts(d: Path) -> int:
        term_ids, _, matches = read_matches(scan_dir / "matches.bin")
        years = np.load(scan_dir / "years.npy")
        table = table_from_min_years(term_ids, min_years_from_matches(years, matches, len(term_ids)))
        write_cohorts(d / "cohorts_term.tsv", apply_floor(table, cfg.floor_year))
        if cfg.synonyms:
            table = pool_synonyms(table, thesaurus)
        table = apply_floor(table, cfg.floor_year)
        write_cohorts(d / "cohorts.tsv", table)
        return len(table)

    cohort_dir = runner.run("cohorts", cohort_key, build_cohorts)
    cohorts = read_cohorts(cohort_dir / "cohorts.tsv", mode, cfg.floor_year)

    filters = cfg.filters()
    contrib_key = _key("contributions", cohort_key, digests["journals"], digests["gazetteer"], digests["regions"],
                       dataclasses.asdict(filters))

    def build_contributions(d: Path) -> int:
        journals = load_journals(cfg.journals)
        gaz = _load_gazetteer(cfg)
        term_ids, paper_ids, matches = read_matches(scan_dir / "matches.bin")
        builder = ContributionBuilder(term_ids, cohorts, thesaurus, journals)
        resolved = unresolved = 0
        for pub, pid, m in zip(load_publications(cfg.corpus), paper_ids, matches, strict=True):
            if pub.paper_id != pid:
                raise ValidationError(f"match table out of sync with corpus at paper {pub.paper_id}")
            if not passes_sample_filters(pub, filters):
                continue
            loc = resolve_location(pub.affiliation, gaz)
            resolved += loc is not None
            unresolved += loc is None
            builder.add(pub, m, loc)
        df = builder.frame()
        df["novel"] = False
        df["score"] = 0.0
        write_contributions(d / "contributions_all.csv", df)
        (d / "stats.json").write_text(json.dumps({
            "papers_located": resolved, "papers_unlocated": unresolved,
            "journal_skips": len(builder.skipped),
        }, indent=1))
        return len(df)

    contrib_dir = runner.run("contributions", contrib_key, build_contributions)

    area_key = _key("areas", digests["corpus"], digests["journals"], digests["status_rules"],
                    dataclasses.asdict(filters), cfg.period)

    def build_areas(d: Path) -> int:
        journals = load_journals(cfg.journals)
        rules = load_status_rules(cfg.status_rules) if cfg.status_rules else StatusRules.default()
        acc = AreaStatusAccumulator()
        lo, hi = cfg.period
        for pub in load_publications(cfg.corpus):
            if lo <= pub.year <= hi and passes_sample_filters(pub, filters) and pub.journal_id in journals:
                acc.add(translational_status(pub.keyword_codes, rules), journals[pub.journal_id])
        groups = acc.classify(all_research_areas(journals))
        write_area_groups(d / "area_groups.csv", groups, acc)
        return len(groups)

    area_dir = runner.run("areas", area_key, build_areas)

    score_key = _key("score", contrib_key, cfg.cutoff, cfg.period)

    def build_score(d: Path) -> int:
        df = read_contributions(contrib_dir / "contributions_all.csv")
        scored = score_period(df, cfg.period, cfg.cutoff)
        write_contributions(d / "contributions.csv", scored)
        return len(scored)

    score_dir = runner.run("score", score_key, build_score)
    if stop_after == "score":
        shutil.copyfile(score_dir / "contributions.csv", out_dir / "contributions.csv")
        manifest = _manifest(cfg, digests, runner)
        return RunResult(out_dir, pd.DataFrame(), runner.records, manifest)

    report_key = _key(
        "report", score_key, area_key, cfg.weights, cfg.missing, cfg.ci, cfg.samples, cfg.seed, cfg.draw,
        cfg.groups, cfg.group_min_contributions, cfg.group_fallback_period, cfg.periods, cfg.weight_period,
        cfg.top_terms_window, cfg.top_n, digests["gazetteer"], digests["regions"],
    )

    def build_report(d: Path) -> int:
        return _write_report(d, cfg, thesaurus, cohorts, scan_dir, contrib_dir, area_dir, score_dir)

    report_dir = runner.run("report", report_key, build_report)

    for f in sorted(report_dir.iterdir()):
        if f.is_file() and not f.name.startswith("."):
            shutil.copyfile(f, out_dir / f.name)
    shutil.copyfile(area_dir / "area_groups.csv", out_dir / "area_groups.csv")
    shutil.copyfile(score_dir / "contributions.csv", out_dir / "contributions.csv")
    shutil.copyfile(cohort_dir / "cohorts.tsv", out_dir / "cohorts.tsv")

    manifest = _manifest(cfg, digests, runner)
    ef = pd.read_csv(out_dir / "edge_factors.csv", keep_default_na=False)
    return RunResult(out_dir, ef, runner.records, manifest)


def _manifest(cfg: RunConfig, digests: dict, runner: StageRunner) -> dict:
    manifest = {
        "config": dataclasses.asdict(cfg),
        "inputs": digests,
        "stages": [dataclasses.asdict(r) for r in runner.records],
    }
    path = Path(cfg.out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, default=str) + "\n")
    return manifest


def _read_area_groups(path: Path) -> dict[str, AreaGroup]:
    with open(path, encoding="utf-8", newline="") as fh:
        return {row["research_area"]: AreaGroup(row["research_area_group"]) for row in csv.DictReader(fh)}


def _fmt(v: float | None) -> str:
    return "" if v is None or v != v else f"{v:.6f}"


IDEA_GROUP_COLUMNS = {
    IdeaGroup.CLINICAL_AND_ANATOMY: "ef_clinical_and_anatomy",
    IdeaGroup.DRUGS_AND_CHEMICALS: "ef_drugs_and_chemicals",
    IdeaGroup.BASIC_SCIENCE_AND_RESEARCH_TOOLS: "ef_basic_science_and_research_tools",
    IdeaGroup.MISCELLANEOUS: "ef_miscellaneous",
}
AREA_GROUP_COLUMNS = {
    AreaGroup.APPLIED: "ef_applied",
    AreaGroup.BASIC_SCIENCE: "ef_basic_science",
    AreaGroup.OTHER: "ef_other",
}


def _weights_for(cfg: RunConfig, all_contribs: pd.DataFrame, scored: pd.DataFrame) -> agg.WeightTable:
    scheme, wp = cfg.weight_table_spec()
    if scheme is agg.WeightScheme.OWN_COUNT:
        return agg.own_weights()
    if scheme is agg.WeightScheme.FIXED_PERIOD:
        return agg.fixed_period_weights(all_contribs, wp)
    return agg.global_weights(scored)


def _write_report(d: Path, cfg: RunConfig, thesaurus, cohorts, scan_dir, contrib_dir, area_dir, score_dir) -> int:
    policy = agg.MissingPolicy(cfg.missing)
    all_contribs = read_contributions(contrib_dir / "contributions_all.csv")
    scored = read_contributions(score_dir / "contributions.csv")
    area_groups = _read_area_groups(area_dir / "area_groups.csv")
    weights = _weights_for(cfg, all_contribs, scored)
    table = agg.CellTable.from_scored(scored)
    overall = agg.overall_edge_factors(table, weights, policy)

    gaz = _load_gazetteer(cfg)
    locations = list(dict.fromkeys(gaz.reporting_locations + table.locations))
    counts = scored[scored["location"].notna()].groupby("location").size().to_dict()

    group_vals: dict[str, dict[str, float]] = {}
    if cfg.groups:
        group_table, group_weights = table, weights
        fallback = None
        if cfg.group_min_contributions is not None and cfg.group_fallback_period is not None:
            wide = score_period(all_contribs, cfg.group_fallback_period, cfg.cutoff)
            fallback = (agg.CellTable.from_scored(wide), _weights_for(cfg, all_contribs, wide))
        for g, col in IDEA_GROUP_COLUMNS.items():
            group_vals[col] = agg.grouped_edge_factors(group_table, group_weights, policy,
                                                       agg.idea_group_predicate(thesaurus, g))
        for g, col in AREA_GROUP_COLUMNS.items():
            group_vals[col] = agg.grouped_edge_factors(group_table, group_weights, policy,
                                                       agg.area_group_predicate(area_groups, g))
        if fallback is not None:
            ftable, fweights = fallback
            for loc in locations:
                if counts.get(loc, 0) >= cfg.group_min_contributions:
                    continue
                for g, col in IDEA_GROUP_COLUMNS.items():
                    v = agg.grouped_edge_factors(ftable, fweights, policy, agg.idea_group_predicate(thesaurus, g))
                    group_vals[col][loc] = v.get(loc, float("nan"))
                for g, col in AREA_GROUP_COLUMNS.items():
                    v = agg.grouped_edge_factors(ftable, fweights, policy, agg.area_group_predicate(area_groups, g))
                    group_vals[col][loc] = v.get(loc, float("nan"))

    intervals: dict[str, tuple[float, float] | None] = {}
    if cfg.ci:
        boot = agg.bootstrap_ci(table, weights, policy, samples=cfg.samples, seed=cfg.seed, draw=cfg.draw,
                                workers=cfg.workers, resample_weights=agg.global_weights(scored))
        intervals = boot.intervals
        for msg in boot.diagnostics:
            logger.warning("bootstrap: %s", msg)

    columns = ["location", "contributions", "edge_factor", "ci_lo", "ci_hi"]
    if cfg.groups:
        columns += list(IDEA_GROUP_COLUMNS.values()) + list(AREA_GROUP_COLUMNS.values())
    order = sorted(locations, key=lambda l: (-overall.get(l, float("-inf")), l))
    with open(d / "edge_factors.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for loc in order:
            ci = intervals.get(loc)
            row = [loc, counts.get(loc, 0), _fmt(overall.get(loc)),
                   _fmt(ci[0] if ci else None), _fmt(ci[1] if ci else None)]
            if cfg.groups:
                row += [_fmt(group_vals[c].get(loc)) for c in columns[5:]]
            w.writerow(row)

    period_label = f"{cfg.period[0]}-{cfg.period[1]}"
    plot_rows = [(loc, overall[loc], period_label) for loc in order if loc in overall]
    if cfg.periods:
        wp = cfg.weight_period or cfg.periods[0]
        table_p = agg.period_edge_factors(all_contribs, cfg.periods, wp, cfg.cutoff, policy)
        with open(d / "period_edge_factors.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["location"] + [f"{c} ({wp[0]}-{wp[1]} weights)" for c in table_p.columns])
            for loc in table_p.index:
                w.writerow([loc] + [_fmt(table_p.at[loc, c]) for c in table_p.columns])
        for c in table_p.columns:
            for loc in table_p.index:
                v = table_p.at[loc, c]
                if v == v:
                    plot_rows.append((loc, v, c))
    with open(d / "plot_data.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "value", "period"])
        for loc, v, p in plot_rows:
            w.writerow([loc, _fmt(v), p])

    if cfg.top_terms_window is not None:
        _write_top_terms(d / "top_terms.csv", cfg, thesaurus, cohorts, scan_dir)
    return len(order)


def _write_top_terms(path: Path, cfg: RunConfig, thesaurus, cohorts, scan_dir: Path) -> None:
    term_ids, paper_ids, matches = read_matches(scan_dir / "matches.bin")
    lo, hi = cfg.top_terms_window
    filters = cfg.filters()
    papers = []
    for pub, m in zip(load_publications(cfg.corpus), matches):
        if lo <= pub.year <= hi and passes_sample_filters(pub, filters):
            papers.append([term_ids[k] for k in m])
    syn = synonym_min_years(dataclasses.replace(cohorts, mode=CohortMode.TERM_ONLY), thesaurus)
    rows = agg.top_terms_report(papers, cohorts, thesaurus, top_n=cfg.top_n, synonym_cohorts=syn)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "decade", "rank", "count", "cumulative_share", "term", "cohort", "category"])
        for r in rows:
            cohort = f"{r.cohort} ({r.synonym_cohort})" if r.synonym_cohort is not None else str(r.cohort)
            w.writerow([r.group, f"{r.decade}s", r.rank, r.count, f"{r.cumulative_share:.4f}", r.term, cohort,
                        r.category])


def run_variants(cfg: RunConfig, variants: dict[str, dict] | None = None) -> pd.DataFrame:
    """Baseline plus single-field config deltas; one edge-factor column each."""
    variants = ROBUSTNESS_VARIANTS if variants is None else variants
    base_out = Path(cfg.out_dir)
    cache = cfg.cache_dir or str(base_out / ".cache")
    cols = {}
    res = run_pipeline(cfg.replace(cache_dir=cache))
    cols["baseline"] = _ef_series(res.edge_factors)
    for name, delta in variants.items():
        res = run_pipeline(cfg.replace(out_dir=str(base_out / "variants" / name), cache_dir=cache, **delta))
        cols[name] = _ef_series(res.edge_factors)
    return pd.DataFrame(cols)


def _ef_series(df: pd.DataFrame) -> pd.Series:
    s = df.set_index("location")["edge_factor"]
    return pd.to_numeric(s.replace("", np.nan))


__all__ = ["RunConfig", "run_pipeline", "run_variants", "ROBUSTNESS_VARIANTS", "load_run_config",
           "EdgeFactorError"]
