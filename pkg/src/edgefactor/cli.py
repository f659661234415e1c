"""Command-line entry point: ``edgefactor <subcommand> ...``.

Exit status is 0 on success, 1 when an input fails validation and 2 for
any other runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import CohortMode, apply_floor, cohort_histogram, min_years_from_matches, pool_synonyms, \
    table_from_min_years, write_cohorts
from .corpus import AreaStatusAccumulator, FilterConfig, StatusRules, all_research_areas, load_gazetteer, \
    load_journals, load_publications, load_status_rules, passes_sample_filters, resolve_location, \
    translational_status, write_area_groups
from .errors import ValidationError
from .matcher import build_matcher, read_matches, scan_texts, write_matches, write_matches_csv
from .pipeline import ROBUSTNESS_VARIANTS, RunConfig, load_run_config, parse_period, run_pipeline, run_variants
from .synth import generate, load_synth_config, planted_lag_config
from .vocab import IdeaGroup, load_thesaurus

log = logging.getLogger("edgefactor")


def _on_off(text: str) -> bool:
    v = text.lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _period(text: str) -> tuple[int, int]:
    try:
        return parse_period(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YEAR or YEAR-YEAR, got {text!r}") from None


# --------------------------------------------------------------------------
# vocab / corpus


def cmd_vocab_check(args) -> int:
    th = load_thesaurus(args.vocab, args.categories, strip_accents=args.strip_accents)
    concepts = {t.concept_id for t in th.terms}
    print(f"terms\t{len(th.terms)}")
    print(f"concepts\t{len(concepts)}")
    print(f"categories\t{len(th.categories)}")
    for g in IdeaGroup:
        n_terms = sum(1 for t in th.terms if any(th.category_group(c) is g for c in t.category_ids))
        print(f"group {g.value}\t{len(th.categories_in_group(g))} categories\t{n_terms} terms")
    print(f"dropped\t{th.dropped}")
    print(f"diagnostics\t{len(th.diagnostics)}")
    for d in th.diagnostics[: args.max_diagnostics]:
        print(f"  {d}")
    return 0


def _filters(args) -> FilterConfig:
    lo, hi = args.years
    char_lo, char_hi = (None, None) if args.no_char_limits else args.char_bounds
    return FilterConfig(lo, hi, char_lo, char_hi, not args.all_types)


def cmd_corpus_stats(args) -> int:
    diags: list = []
    filters = _filters(args)
    gaz = load_gazetteer(args.gazetteer, args.regions) if args.gazetteer else None
    total = kept = located = 0
    by_year: Counter = Counter()
    by_loc: Counter = Counter()
    for pub in load_publications(args.corpus, diagnostics=diags):
        total += 1
        if not passes_sample_filters(pub, filters):
            continue
        kept += 1
        by_year[pub.year] += 1
        if gaz is not None:
            loc = resolve_location(pub.affiliation, gaz)
            if loc is not None:
                located += 1
                by_loc[loc] += 1
    print(f"records\t{total}")
    print(f"skipped\t{len(diags)}")
    print(f"passing filters\t{kept}")
    if gaz is not None:
        print(f"located\t{located}")
        for loc, n in by_loc.most_common():
            print(f"  {loc}\t{n}")
    if by_year:
        print(f"years\t{min(by_year)}-{max(by_year)}")
    return 0


def cmd_classify_areas(args) -> int:
    journals = load_journals(args.journals)
    rules = load_status_rules(args.status_rules) if args.status_rules else StatusRules.default()
    filters = _filters(args)
    lo, hi = args.period
    acc = AreaStatusAccumulator()
    for pub in load_publications(args.corpus):
        if lo <= pub.year <= hi and passes_sample_filters(pub, filters) and pub.journal_id in journals:
            acc.add(translational_status(pub.keyword_codes, rules), journals[pub.journal_id])
    groups = acc.classify(all_research_areas(journals))
    write_area_groups(args.out, groups, acc)
    counts = Counter(g.value for g in groups.values())
    log.info("wrote %s (%s)", args.out, ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


# --------------------------------------------------------------------------
# scan / cohorts


def cmd_scan(args) -> int:
    th = load_thesaurus(args.vocab, args.categories, strip_accents=args.strip_accents)
    matcher = build_matcher(th)
    pubs = list(load_publications(args.corpus))
    res = scan_texts(matcher, [p.text for p in pubs], workers=args.workers)
    ids = [p.paper_id for p in pubs]
    if args.out:
        write_matches(args.out, matcher.term_ids, ids, res.matches)
    if args.csv:
        write_matches_csv(args.csv, matcher.term_ids, ids, res.matches)
    if args.bench:
        print(f"papers\t{len(pubs)}")
        print(f"patterns\t{len(matcher.term_ids)}")
        print(f"tokens\t{res.n_tokens}")
        print(f"matches\t{res.n_matches}")
        print(f"seconds\t{res.seconds:.3f}")
        print(f"tokens_per_second\t{res.tokens_per_second:.0f}")
        print(f"matches_per_second\t{res.matches_per_second:.0f}")
    return 0


def cmd_cohorts(args) -> int:
    th = load_thesaurus(args.vocab, args.categories, strip_accents=args.strip_accents)
    pubs = list(load_publications(args.corpus))
    years = np.array([p.year for p in pubs], np.int64)
    if args.matches:
        term_ids, paper_ids, matches = read_matches(args.matches)
        if paper_ids != [p.paper_id for p in pubs]:
            raise ValidationError(f"{args.matches} does not match the papers in {args.corpus}")
    else:
        matcher = build_matcher(th)
        term_ids = matcher.term_ids
        matches = scan_texts(matcher, [p.text for p in pubs], workers=args.workers).matches
    table = table_from_min_years(term_ids, min_years_from_matches(years, matches, len(term_ids)))
    if CohortMode(args.mode) is CohortMode.SYNONYM_POOLED:
        table = pool_synonyms(table, th)
    table = apply_floor(table, args.floor)
    write_cohorts(args.out, table)
    log.info("%d terms dated, %d below floor %d", len(table), len(table.excluded), args.floor)
    if args.histogram:
        for year, n in cohort_histogram(table).items():
            print(f"{year}\t{n}")
    return 0


# --------------------------------------------------------------------------
# score / report / pipeline


def _add_run_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--config", type=Path, help="TOML run config; flags below override it")
    for name in ("vocab", "categories", "corpus", "journals", "gazetteer", "regions", "status-rules"):
        g.add_argument(f"--{name}")
    g.add_argument("--out", dest="out_dir")
    g.add_argument("--cache-dir")

    f = p.add_argument_group("sample")
    f.add_argument("--years", type=_period)
    f.add_argument("--char-bounds", type=_period, metavar="LO-HI")
    f.add_argument("--no-char-limits", action="store_true", default=None)
    f.add_argument("--all-types", action="store_true", default=None,
                   help="keep editorials, reviews and other non-research papers")

    s = p.add_argument_group("scoring")
    s.add_argument("--cutoff", type=float)
    s.add_argument("--synonyms", type=_on_off, metavar="on|off")
    s.add_argument("--floor", dest="floor_year", type=int)
    s.add_argument("--period", type=_period)
    s.add_argument("--strip-accents", action="store_true", default=None)

    r = p.add_argument_group("report")
    r.add_argument("--weights", help="global, own or period:YYYY-YYYY")
    r.add_argument("--missing", choices=["own-avg", "zero", "hundred"])
    r.add_argument("--ci", action="store_true", default=None)
    r.add_argument("--samples", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--bootstrap-draw", dest="draw", choices=["uniform", "weighted"])
    r.add_argument("--no-groups", dest="groups", action="store_false", default=None)
    r.add_argument("--periods", type=_period, nargs="+")
    r.add_argument("--weight-period", type=_period)
    r.add_argument("--top-terms", dest="top_terms_window", type=_period)
    r.add_argument("--top-n", type=int)
    p.add_argument("--workers", type=int)


def _run_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    changes = {}
    for name in ("vocab", "categories", "corpus", "journals", "gazetteer", "regions", "status_rules", "out_dir",
                 "cache_dir", "char_bounds", "cutoff", "synonyms", "floor_year", "period", "strip_accents",
                 "weights", "missing", "ci", "samples", "seed", "draw", "groups", "periods", "weight_period",
                 "top_terms_window", "top_n", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            changes[name] = v
    if args.years is not None:
        changes["year_lo"], changes["year_hi"] = args.years
    if args.no_char_limits:
        changes["char_bounds"] = None
    if args.all_types:
        changes["original_only"] = False
    return cfg.replace(**changes) if changes else cfg


def _print_stages(res) -> None:
    for r in res.stages:
        log.info("stage %-13s %-6s %8.2fs %9d rows", r.name, r.status, r.seconds, r.rows)


def cmd_score(args) -> int:
    res = run_pipeline(_run_config(args), stop_after="score")
    _print_stages(res)
    log.info("wrote %s", res.out_dir / "contributions.csv")
    return 0


def cmd_report(args) -> int:
    res = run_pipeline(_run_config(args))
    _print_stages(res)
    print(res.edge_factors[["location", "contributions", "edge_factor", "ci_lo", "ci_hi"]].to_string(index=False))
    return 0


def cmd_pipeline(args) -> int:
    cfg = _run_config(args)
    if not args.robustness:
        return cmd_report(args)
    table = run_variants(cfg, ROBUSTNESS_VARIANTS)
    path = Path(cfg.out_dir) / "robustness.csv"
    table.to_csv(path, float_format="%.6f", index_label="location")
    print(table.round(2).to_string())
    log.info("wrote %s", path)
    return 0


# --------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    if args.config:
        cfg = load_synth_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
    else:
        cfg = planted_lag_config(args.seed or 0)
    truth = generate(cfg, args.out)
    print(json.dumps({k: truth[k] for k in ("expected_order",) if k in truth}))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgefactor", description="Location-level novelty scores for a corpus.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def vocab_args(sp):
        sp.add_argument("--vocab", required=True)
        sp.add_argument("--categories", required=True)
        sp.add_argument("--strip-accents", action="store_true")

    def filter_args(sp):
        sp.add_argument("--years", type=_period, default=(1988, 2016))
        sp.add_argument("--char-bounds", type=_period, default=(200, 5000), metavar="LO-HI")
        sp.add_argument("--no-char-limits", action="store_true")
        sp.add_argument("--all-types", action="store_true")

    vocab = sub.add_parser("vocab", help="thesaurus tools").add_subparsers(dest="action", required=True)
    sp = vocab.add_parser("check", help="load the thesaurus and print counts and diagnostics")
    vocab_args(sp)
    sp.add_argument("--max-diagnostics", type=int, default=20)
    sp.set_defaults(func=cmd_vocab_check)

    corpus = sub.add_parser("corpus", help="corpus tools").add_subparsers(dest="action", required=True)
    sp = corpus.add_parser("stats", help="record, filter and location counts")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--gazetteer")
    sp.add_argument("--regions")
    filter_args(sp)
    sp.set_defaults(func=cmd_corpus_stats)
    sp = corpus.add_parser("classify-areas", help="assign research areas to Applied/BasicScience/Other")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--journals", required=True)
    sp.add_argument("--status-rules")
    sp.add_argument("--period", type=_period, default=(2015, 2016))
    sp.add_argument("--out", default="area_groups.csv")
    filter_args(sp)
    sp.set_defaults(func=cmd_classify_areas)

    sp = sub.add_parser("scan", help="match the thesaurus against every paper")
    vocab_args(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--out", help="binary match table")
    sp.add_argument("--csv", help="also write a readable CSV of the matches")
    sp.add_argument("--bench", action="store_true", help="print throughput")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("cohorts", help="date every term by its first appearance")
    vocab_args(sp)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--matches", help="reuse a match table from `scan`")
    sp.add_argument("--mode", choices=[m.value for m in CohortMode], default="term")
    sp.add_argument("--floor", type=int, default=1950)
    sp.add_argument("--out", default="cohorts.tsv")
    sp.add_argument("--histogram", action="store_true")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_cohorts)

    sp = sub.add_parser("score", help="flag novel contributions and write contributions.csv")
    _add_run_options(sp)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("report", help="edge factors, intervals and breakdowns")
    _add_run_options(sp)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("pipeline", help="full cached run from one config file")
    _add_run_options(sp)
    sp.add_argument("--robustness", action="store_true", help="also run the eight robustness variants")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("synth", help="generate a synthetic corpus with planted lags")
    sp.add_argument("--config", help="synth TOML; default is the three-location planted preset")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        log.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        log.error("%s: %s", type(exc).__name__, exc, exc_info=args.verbose > 1)
        return 2


if __name__ == "__main__":
    sys.exit(main())
