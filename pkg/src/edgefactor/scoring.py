"""Contributions, novelty flags and per-cell normalization.

A contribution links one paper to one (idea category, research area)
cell. Its cohort year is the newest cohort among the paper's retained
terms in that idea category. Within each (cell, publication year) pool a
contribution is novel when the share of pool members with a strictly newer
cohort is below the cutoff ``p``; ties at the boundary are therefore kept
together. Scores are rescaled per cell so that they average 100 over the
analysis period.
"""

from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .cohort import CohortTable
from .corpus import JournalTable, Publication
from .errors import Diagnostic, ValidationError
from .vocab import Thesaurus

logger = logging.getLogger(__name__)

CONTRIBUTION_COLUMNS = [
    "paper_id", "idea_category", "research_area", "pub_year", "cohort_year", "location", "novel", "score",
]


@dataclass(frozen=True)
class CellKey:
    idea_category: str
    research_area: str


@dataclass(frozen=True)
class Contribution:
    paper_id: str
    cell: CellKey
    pub_year: int
    cohort_year: int
    location: str | None = None
    novel: bool | None = None
    score: float | None = None

    @property
    def age(self) -> int:
        return self.pub_year - self.cohort_year


def category_max_cohorts(
    term_ids: Iterable[str],
    cohorts: CohortTable,
    thesaurus: Thesaurus,
) -> dict[str, int]:
    """Newest retained cohort per idea category among a paper's matched terms."""
    out: dict[str, int] = {}
    for t in term_ids:
        if not cohorts.retained(t):
            continue
        y = cohorts.years[t]
        for cat in thesaurus.term(t).category_ids:
            if out.get(cat, -1) < y:
                out[cat] = y
    return out


def extract_contributions(
    pub: Publication,
    matched_terms: Iterable[str],
    cohorts: CohortTable,
    thesaurus: Thesaurus,
    journal_table: JournalTable,
    location: str | None = None,
) -> list[Contribution]:
    """Expand one paper into |categories| x |research areas| contributions.

    Returns an empty list, after logging, for a journal missing from the
    table.
    """
    areas = journal_table.get(pub.journal_id)
    if areas is None:
        logger.debug("paper %s: journal %r not in journal table; skipped", pub.paper_id, pub.journal_id)
        return []
    cats = category_max_cohorts(matched_terms, cohorts, thesaurus)
    out = []
    for cat in sorted(cats):
        y = cats[cat]
        if y > pub.year:
            raise ValidationError(
                f"paper {pub.paper_id}: cohort {y} of category {cat!r} is after publication year {pub.year}"
            )
        for area in areas:
            out.append(Contribution(pub.paper_id, CellKey(cat, area), pub.year, y, location))
    return out


class ContributionBuilder:
    """Bulk contribution extraction on term ordinals.

    ``term_cats[k]`` lists the category indices of ordinal ``k``; cohorts
    come from ``CohortTable.as_array`` (-1 marks absent or excluded).
    Produces the same rows as ``extract_contributions`` paper by paper.
    """

    def __init__(self, term_ids: Sequence[str], cohorts: CohortTable, thesaurus: Thesaurus,
                 journal_table: JournalTable) -> None:
        self.categories = sorted(thesaurus.categories)
        cat_index = {c: i for i, c in enumerate(self.categories)}
        self.term_cats = [
            tuple(sorted(cat_index[c] for c in thesaurus.term(t).category_ids)) for t in term_ids
        ]
        self.cohort = cohorts.as_array(term_ids)
        self.journal_table = journal_table
        self.rows: dict[str, list] = {c: [] for c in CONTRIBUTION_COLUMNS[:6]}
        self.skipped: list[Diagnostic] = []

    def add(self, pub: Publication, ordinals: np.ndarray, location: str | None) -> int:
        areas = self.journal_table.get(pub.journal_id)
        if areas is None:
            self.skipped.append(Diagnostic("<corpus>", None, f"paper {pub.paper_id}: journal {pub.journal_id!r} unknown"))
            return 0
        best: dict[int, int] = {}
        cohort = self.cohort
        term_cats = self.term_cats
        for k in ordinals:
            y = cohort[k]
            if y < 0:
                continue
            for ci in term_cats[k]:
                if best.get(ci, -1) < y:
                    best[ci] = int(y)
        if not best:
            return 0
        rows = self.rows
        n = 0
        for ci in sorted(best, key=lambda i: self.categories[i]):
            y = best[ci]
            if y > pub.year:
                raise ValidationError(
                    f"paper {pub.paper_id}: cohort {y} of category {self.categories[ci]!r} "
                    f"is after publication year {pub.year}"
                )
            for area in areas:
                rows["paper_id"].append(pub.paper_id)
                rows["idea_category"].append(self.categories[ci])
                rows["research_area"].append(area)
                rows["pub_year"].append(pub.year)
                rows["cohort_year"].append(y)
                rows["location"].append(location)
                n += 1
        return n

    def frame(self) -> pd.DataFrame:
        return contributions_frame(self.rows)


def contributions_frame(rows: dict[str, list] | Iterable[Contribution]) -> pd.DataFrame:
    if not isinstance(rows, dict):
        rows = list(rows)
        rows = {
            "paper_id": [c.paper_id for c in rows],
            "idea_category": [c.cell.idea_category for c in rows],
            "research_area": [c.cell.research_area for c in rows],
            "pub_year": [c.pub_year for c in rows],
            "cohort_year": [c.cohort_year for c in rows],
            "location": [c.location for c in rows],
        }
    df = pd.DataFrame(
        {
            "paper_id": pd.Series(rows["paper_id"], dtype=object),
            "idea_category": pd.Series(rows["idea_category"], dtype=object),
            "research_area": pd.Series(rows["research_area"], dtype=object),
            "pub_year": pd.Series(rows["pub_year"], dtype=np.int64),
            "cohort_year": pd.Series(rows["cohort_year"], dtype=np.int64),
            "location": pd.Series(rows["location"], dtype=object),
        }
    )
    return df


# --------------------------------------------------------------------------
# novelty


def novel_flags(cohort_years: Sequence[int] | np.ndarray, p: float) -> np.ndarray:
    """Novelty flags for a single pool.

    A member is novel iff (#members with strictly newer cohort) / N < p.
    """
    c = np.asarray(cohort_years)
    n = len(c)
    if n == 0:
        return np.zeros(0, bool)
    srt = np.sort(c)
    newer = n - np.searchsorted(srt, c, side="right")
    return newer / n < p


def flag_novelty(contribs: pd.DataFrame, p: float) -> pd.DataFrame:
    """Set the ``novel`` column, pooling by (cell, pub_year) across all locations."""
    if not 0 < p < 1:
        raise ValueError(f"cutoff must lie in (0, 1), got {p}")
    df = contribs.copy()
    if df.empty:
        df["novel"] = pd.Series(dtype=bool)
        return df
    keys = ["idea_category", "research_area", "pub_year"]
    g = df.groupby(keys, sort=False)["cohort_year"]
    rank = g.rank(method="min", ascending=False).to_numpy()
    size = g.transform("size").to_numpy()
    df["novel"] = (rank - 1) / size < p
    return df


def normalize(contribs: pd.DataFrame) -> pd.DataFrame:
    """Set ``score`` so that each cell's scores average exactly 100."""
    df = contribs.copy()
    if df.empty:
        df["score"] = pd.Series(dtype=float)
        return df
    share = df.groupby(["idea_category", "research_area"], sort=False)["novel"].transform("mean").to_numpy()
    if np.any(share <= 0):
        raise ValidationError("a cell has no novel contribution; flag_novelty must run per (cell, year)")
    df["score"] = np.where(df["novel"].to_numpy(), 100.0 / share, 0.0)
    return df


def score_period(contribs: pd.DataFrame, period: tuple[int, int], p: float) -> pd.DataFrame:
    """Flag and normalize the contributions published within ``period`` (inclusive)."""
    lo, hi = period
    sub = contribs[(contribs["pub_year"] >= lo) & (contribs["pub_year"] <= hi)]
    return normalize(flag_novelty(sub.reset_index(drop=True), p))


def write_contributions(path: str | Path, df: pd.DataFrame) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CONTRIBUTION_COLUMNS)
        cols = [df[c].tolist() for c in CONTRIBUTION_COLUMNS]
        for row in zip(*cols):
            pid, cat, area, py, cy, loc, novel, score = row
            w.writerow([pid, cat, area, py, cy, "" if loc is None or loc != loc else loc,
                        int(bool(novel)), repr(float(score))])


def read_contributions(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"paper_id": str, "idea_category": str, "research_area": str, "location": str},
                     keep_default_na=False)
    df["location"] = df["location"].map(lambda s: s if s else None).astype(object)
    df["novel"] = df["novel"].astype(bool)
    df["score"] = df["score"].astype(float)
    return df
