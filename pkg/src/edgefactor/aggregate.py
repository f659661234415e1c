"""Location-level edge factors.

A location's edge factor for a cell is the mean normalized score of its
contributions there. Its overall edge factor is the weighted mean of its
cell edge factors, with cells it never touches filled by a missing-cell
policy before the weighted sum.
"""

from __future__ import annotations

import enum
import logging
import math
import multiprocessing as mp
from collections import defaultdict
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .cohort import CohortTable
from .scoring import CellKey, score_period
from .vocab import IdeaGroup, Thesaurus

logger = logging.getLogger(__name__)

Cell = tuple[str, str]


class WeightScheme(str, enum.Enum):
    GLOBAL_COUNT = "global"
    OWN_COUNT = "own"
    FIXED_PERIOD = "period"


class MissingPolicy(str, enum.Enum):
    IMPUTE_OWN_AVERAGE = "own-avg"
    IMPUTE_ZERO = "zero"
    IMPUTE_HUNDRED = "hundred"


@dataclass(frozen=True)
class WeightTable:
    """Per-cell weights. For ``OWN_COUNT`` the weights are per location and
    are read off the cell table, so ``weights`` stays empty."""

    scheme: WeightScheme
    weights: dict[Cell, float] = field(default_factory=dict)
    period: tuple[int, int] | None = None

    def scaled(self, factor: float) -> WeightTable:
        return WeightTable(self.scheme, {c: w * factor for c, w in self.weights.items()}, self.period)


def count_weights(contribs: pd.DataFrame, period: tuple[int, int] | None = None,
                  scheme: WeightScheme = WeightScheme.GLOBAL_COUNT) -> WeightTable:
    """Total contributions per cell (all locations, located or not)."""
    df = contribs
    if period is not None:
        df = df[(df["pub_year"] >= period[0]) & (df["pub_year"] <= period[1])]
    counts = df.groupby(["idea_category", "research_area"], sort=True).size()
    return WeightTable(scheme, {k: float(v) for k, v in counts.items()}, period)


def global_weights(contribs: pd.DataFrame) -> WeightTable:
    return count_weights(contribs)


def fixed_period_weights(contribs: pd.DataFrame, period: tuple[int, int]) -> WeightTable:
    return count_weights(contribs, period, WeightScheme.FIXED_PERIOD)


def own_weights() -> WeightTable:
    return WeightTable(WeightScheme.OWN_COUNT)


# --------------------------------------------------------------------------
# cell table


@dataclass
class CellTable:
    """Location x cell matrices of mean score (NaN when missing) and counts."""

    locations: list[str]
    cells: list[Cell]
    ef: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_scored(cls, scored: pd.DataFrame, cells: Iterable[Cell] = ()) -> CellTable:
        located = scored[scored["location"].notna()]
        stats = located.groupby(["location", "idea_category", "research_area"], sort=True)["score"].agg(["sum", "size"])
        locs = sorted(located["location"].unique().tolist())
        all_cells = sorted(set(cells) | {(c, a) for c, a in zip(scored["idea_category"], scored["research_area"])})
        li = {l: i for i, l in enumerate(locs)}
        ci = {c: i for i, c in enumerate(all_cells)}
        ef = np.full((len(locs), len(all_cells)), np.nan)
        counts = np.zeros((len(locs), len(all_cells)), np.int64)
        for (loc, cat, area), s, n in zip(stats.index, stats["sum"], stats["size"]):
            i, j = li[loc], ci[(cat, area)]
            ef[i, j] = s / n
            counts[i, j] = n
        return cls(locs, all_cells, ef, counts)

    def index(self, location: str) -> int:
        return self.locations.index(location)

    def cell_edge_factor(self, location: str, cell: Cell) -> float | None:
        if location not in self.locations or cell not in self.cells:
            return None
        v = self.ef[self.index(location), self.cells.index(cell)]
        return None if np.isnan(v) else float(v)

    def weight_matrix(self, weights: WeightTable, cell_mask: np.ndarray | None = None) -> np.ndarray:
        """Weights broadcast to (locations, cells)."""
        if weights.scheme is WeightScheme.OWN_COUNT:
            w = self.counts.astype(float)
        else:
            w = np.array([weights.weights.get(c, 0.0) for c in self.cells], float)
            w = np.broadcast_to(w, self.ef.shape)
        if cell_mask is not None:
            w = w * cell_mask
        return w

    def with_cells(self, cells: Iterable[Cell]) -> CellTable:
        """Extend with cells that carry weight but no contributions."""
        extra = [c for c in sorted(set(cells)) if c not in set(self.cells)]
        if not extra:
            return self
        ef = np.hstack([self.ef, np.full((len(self.locations), len(extra)), np.nan)])
        counts = np.hstack([self.counts, np.zeros((len(self.locations), len(extra)), np.int64)])
        return CellTable(self.locations, self.cells + extra, ef, counts)


def cell_edge_factor(location: str, cell: CellKey | Cell, scored: pd.DataFrame) -> float | None:
    """Mean score of ``location``'s contributions in ``cell``; None when it has none."""
    cat, area = (cell.idea_category, cell.research_area) if isinstance(cell, CellKey) else cell
    m = (scored["location"] == location) & (scored["idea_category"] == cat) & (scored["research_area"] == area)
    if not m.any():
        return None
    return float(scored.loc[m, "score"].mean())


def weighted_edge_factors(
    ef: np.ndarray,
    w: np.ndarray,
    policy: MissingPolicy,
) -> np.ndarray:
    """Weighted mean per row with missing cells filled by ``policy``.

    ``ef`` and ``w`` are (locations, cells). Rows without any present
    positive-weight cell are NaN (absent).
    """
    present = ~np.isnan(ef) & (w > 0)
    x = np.where(present, ef, 0.0)
    w_present = np.where(present, w, 0.0)
    num = np.sum(w_present * x, axis=1)
    den_present = np.sum(w_present, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        own = num / den_present
    if policy is MissingPolicy.IMPUTE_OWN_AVERAGE:
        fill = own
    elif policy is MissingPolicy.IMPUTE_ZERO:
        fill = np.zeros(len(ef))
    else:
        fill = np.full(len(ef), 100.0)
    positive = w > 0
    filled = np.where(present, ef, fill[:, None])
    total_w = np.sum(np.where(positive, w, 0.0), axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sum(np.where(positive, w * filled, 0.0), axis=1) / total_w
    out[den_present <= 0] = np.nan
    return out


def overall_edge_factors(
    table: CellTable,
    weights: WeightTable,
    policy: MissingPolicy = MissingPolicy.IMPUTE_OWN_AVERAGE,
) -> dict[str, float]:
    """Overall edge factor per location; locations with no present cell are omitted."""
    if weights.scheme is not WeightScheme.OWN_COUNT:
        table = table.with_cells(c for c, w in weights.weights.items() if w > 0)
    w = table.weight_matrix(weights)
    vals = weighted_edge_factors(table.ef, w, policy)
    return {loc: float(v) for loc, v in zip(table.locations, vals) if not np.isnan(v)}


def overall_edge_factor(
    location: str,
    table: CellTable,
    weights: WeightTable,
    policy: MissingPolicy = MissingPolicy.IMPUTE_OWN_AVERAGE,
) -> float | None:
    return overall_edge_factors(table, weights, policy).get(location)


def grouped_edge_factors(
    table: CellTable,
    weights: WeightTable,
    policy: MissingPolicy,
    predicate: Callable[[Cell], bool],
) -> dict[str, float]:
    """Overall edge factor restricted to the cells selected by ``predicate``."""
    if weights.scheme is not WeightScheme.OWN_COUNT:
        table = table.with_cells(c for c, w in weights.weights.items() if w > 0)
    mask = np.array([bool(predicate(c)) for c in table.cells], float)
    if not mask.any():
        return {}
    w = table.weight_matrix(weights, mask)
    vals = weighted_edge_factors(table.ef, w, policy)
    return {loc: float(v) for loc, v in zip(table.locations, vals) if not np.isnan(v)}


def grouped_edge_factor(location, table, weights, policy, predicate) -> float | None:
    return grouped_edge_factors(table, weights, policy, predicate).get(location)


def idea_group_predicate(thesaurus: Thesaurus, group: IdeaGroup) -> Callable[[Cell], bool]:
    return lambda cell: thesaurus.categories[cell[0]].group is group


def area_group_predicate(area_groups: dict, group) -> Callable[[Cell], bool]:
    return lambda cell: area_groups.get(cell[1]) == group


def global_mean_edge_factor(table: CellTable, weights: WeightTable) -> float:
    """Weight-averaged contribution-weighted mean of location cell edge factors.

    Pools every location's cell edge factor by its contribution count,
    then averages cells with the weight table; equals 100 whenever all
    contributions are located.
    """
    n = table.counts.astype(float)
    has = n.sum(axis=0) > 0
    pooled = np.nansum(np.where(n > 0, table.ef, 0.0) * n, axis=0)[has] / n.sum(axis=0)[has]
    w = np.array([weights.weights.get(c, 0.0) for c in table.cells])[has]
    return float(np.sum(w * pooled) / np.sum(w))


# --------------------------------------------------------------------------
# periods


def period_edge_factors(
    contribs: pd.DataFrame,
    periods: Sequence[tuple[int, int]],
    weight_period: tuple[int, int],
    cutoff: float,
    policy: MissingPolicy = MissingPolicy.IMPUTE_OWN_AVERAGE,
) -> pd.DataFrame:
    """Locations x periods table under one fixed weight table.

    Novelty pools and normalization are rebuilt inside each period; the
    weights come from ``weight_period`` only. Periods without data are
    left out.
    """
    weights = fixed_period_weights(contribs, weight_period)
    columns: dict[str, dict[str, float]] = {}
    for lo, hi in periods:
        scored = score_period(contribs, (lo, hi), cutoff)
        if scored.empty:
            continue
        table = CellTable.from_scored(scored)
        columns[f"{lo}-{hi}"] = overall_edge_factors(table, weights, policy)
    return pd.DataFrame(columns).sort_index()


# --------------------------------------------------------------------------
# bootstrap


@dataclass
class BootstrapResult:
    intervals: dict[str, tuple[float, float] | None]
    replicates: np.ndarray
    locations: list[str]
    diagnostics: list[str] = field(default_factory=list)


def _replicate_weights(rng: np.random.Generator, base: np.ndarray, weighted: bool) -> np.ndarray:
    """Draw cells with replacement until drawn weight reaches the original total.

    Returns the multiplicity of each cell in the replicate.
    """
    n = len(base)
    total = base.sum()
    prob = base / total if weighted else None
    chunk = max(n, 16)
    drawn: list[np.ndarray] = []
    acc = 0.0
    while True:
        idx = rng.choice(n, size=chunk, p=prob) if weighted else rng.integers(0, n, size=chunk)
        cum = acc + np.cumsum(base[idx])
        hit = np.flatnonzero(cum >= total)
        if hit.size:
            drawn.append(idx[: hit[0] + 1])
            break
        drawn.append(idx)
        acc = cum[-1]
    return np.bincount(np.concatenate(drawn), minlength=n).astype(float)


def _bootstrap_chunk(args) -> np.ndarray:
    seed, indices, ef, w, base, policy, weighted = args
    out = np.empty((len(indices), ef.shape[0]))
    for r, i in enumerate(indices):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        k = _replicate_weights(rng, base, weighted)
        out[r] = weighted_edge_factors(ef, w * k, policy)
    return out


def bootstrap_ci(
    table: CellTable,
    weights: WeightTable,
    policy: MissingPolicy = MissingPolicy.IMPUTE_OWN_AVERAGE,
    *,
    samples: int = 1000,
    seed: int = 0,
    trim: float = 0.025,
    draw: str = "uniform",
    workers: int = 1,
    resample_weights: WeightTable | None = None,
) -> BootstrapResult:
    """Percentile-trimmed bootstrap intervals over cells.

    Each replicate resamples cells (with positive weight) with replacement
    until the summed weight of the draws reaches the original total, then
    recomputes every location's overall edge factor with each cell counted
    as many times as it was drawn. Replicate ``i`` uses its own generator
    derived from ``(seed, i)``, so results do not depend on ``workers``.
    ``resample_weights`` (default: ``weights``, or contribution counts for
    the own-count scheme) drives the stopping rule.
    """
    if draw not in ("uniform", "weighted"):
        raise ValueError(f"unknown draw mode {draw!r}")
    if weights.scheme is not WeightScheme.OWN_COUNT:
        table = table.with_cells(c for c, w in weights.weights.items() if w > 0)
    w = np.ascontiguousarray(table.weight_matrix(weights), float)
    if resample_weights is not None:
        base = np.array([resample_weights.weights.get(c, 0.0) for c in table.cells])
    elif weights.scheme is WeightScheme.OWN_COUNT:
        base = table.counts.sum(axis=0).astype(float)
    else:
        base = w[0].copy() if len(w) else np.zeros(len(table.cells))
    keep = base > 0
    ef, w, base = table.ef[:, keep], w[:, keep], base[keep]

    if workers <= 1 or samples < 2:
        reps = _bootstrap_chunk((seed, range(samples), ef, w, base, policy, draw == "weighted"))
    else:
        bounds = np.linspace(0, samples, min(workers, samples) + 1).astype(int)
        jobs = [(seed, range(bounds[j], bounds[j + 1]), ef, w, base, policy, draw == "weighted")
                for j in range(len(bounds) - 1)]
        with ProcessPoolExecutor(len(jobs), mp_context=mp.get_context("fork")) as ex:
            reps = np.vstack(list(ex.map(_bootstrap_chunk, jobs)))

    intervals: dict[str, tuple[float, float] | None] = {}
    diagnostics = []
    for j, loc in enumerate(table.locations):
        vals = np.sort(reps[:, j][~np.isnan(reps[:, j])])
        if len(vals) * 2 < samples or len(vals) == 0:
            intervals[loc] = None
            diagnostics.append(f"{loc}: present in {len(vals)} of {samples} replicates; no interval")
            continue
        drop = int(math.floor(len(vals) * trim + 1e-9))
        kept = vals[drop: len(vals) - drop]
        intervals[loc] = (float(kept[0]), float(kept[-1]))
    return BootstrapResult(intervals, reps, list(table.locations), diagnostics)


# --------------------------------------------------------------------------
# top terms


@dataclass(frozen=True)
class TopTermRow:
    group: str
    decade: int
    rank: int
    count: int
    cumulative_share: float
    term: str
    cohort: int
    synonym_cohort: int | None
    category: str


def newest_term_counts(
    papers: Iterable[Iterable[str]],
    cohorts: CohortTable,
    thesaurus: Thesaurus,
) -> dict[tuple[str, str], int]:
    """Count, per (term, category), the papers in which the term is the newest
    retained term of that category. Ties at the newest cohort all count."""
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for terms in papers:
        per_cat: dict[str, list[tuple[int, str]]] = defaultdict(list)
        for t in set(terms):
            if not cohorts.retained(t):
                continue
            y = cohorts.years[t]
            for cat in thesaurus.term(t).category_ids:
                per_cat[cat].append((y, t))
        for cat, items in per_cat.items():
            newest = max(y for y, _ in items)
            for y, t in items:
                if y == newest:
                    counts[(t, cat)] += 1
    return dict(counts)


def top_terms_report(
    papers: Iterable[Iterable[str]],
    cohorts: CohortTable,
    thesaurus: Thesaurus,
    *,
    group: IdeaGroup | None = None,
    decade: int | None = None,
    top_n: int | None = 25,
    synonym_cohorts: dict[str, int] | None = None,
) -> list[TopTermRow]:
    """Ranked newest-term counts by (idea category group, cohort decade).

    ``papers`` yields the matched term ids of each paper in the report
    window. Cumulative shares are taken over all rows of a (group, decade)
    block before truncation to ``top_n``.
    """
    counts = newest_term_counts(papers, cohorts, thesaurus)
    blocks: dict[tuple[str, int], list[tuple[int, str, str]]] = defaultdict(list)
    for (t, cat), n in counts.items():
        g = thesaurus.categories[cat].group
        d = cohorts.years[t] // 10 * 10
        if (group is not None and g is not group) or (decade is not None and d != decade):
            continue
        blocks[(g.value, d)].append((n, t, cat))
    group_order = {g.value: i for i, g in enumerate(IdeaGroup)}
    rows: list[TopTermRow] = []
    for key in sorted(blocks, key=lambda k: (group_order[k[0]], -k[1])):
        items = sorted(blocks[key], key=lambda x: (-x[0], thesaurus.term(x[1]).normalized, x[2]))
        total = sum(n for n, _, _ in items)
        running = 0
        for rank, (n, t, cat) in enumerate(items, start=1):
            running += n
            if top_n is not None and rank > top_n:
                break
            rows.append(TopTermRow(
                group=key[0], decade=key[1], rank=rank, count=n, cumulative_share=running / total,
                term=thesaurus.term(t).normalized, cohort=cohorts.years[t],
                synonym_cohort=None if synonym_cohorts is None else synonym_cohorts.get(t),
                category=cat,
            ))
    return rows
