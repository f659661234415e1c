"""Cohort years: the first publication year in which each term appears."""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .matcher import DictionaryMatcher, scan_texts
from .vocab import Thesaurus

DEFAULT_FLOOR = 1950
_ABSENT = np.iinfo(np.int32).max


class CohortMode(str, enum.Enum):
    TERM_ONLY = "term"
    SYNONYM_POOLED = "synonym"


@dataclass(frozen=True)
class CohortTable:
    years: dict[str, int]
    mode: CohortMode = CohortMode.TERM_ONLY
    floor_year: int | None = None
    excluded: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, term_id: str) -> bool:
        return term_id in self.years

    def __len__(self) -> int:
        return len(self.years)

    def get(self, term_id: str) -> int | None:
        return self.years.get(term_id)

    def retained(self, term_id: str) -> bool:
        return term_id in self.years and term_id not in self.excluded

    def as_array(self, term_ids: Sequence[str]) -> np.ndarray:
        """Cohort per ordinal; -1 for terms absent or excluded by the floor."""
        out = np.full(len(term_ids), -1, np.int32)
        for k, t in enumerate(term_ids):
            y = self.years.get(t)
            if y is not None and t not in self.excluded:
                out[k] = y
        return out


def min_years_from_matches(
    years: Sequence[int] | np.ndarray,
    matches: Sequence[np.ndarray],
    n_terms: int,
) -> np.ndarray:
    """Pointwise-min reduction of publication years onto term ordinals.

    Returns an int array with ``_ABSENT`` for never-matched terms. Partial
    results from disjoint corpus partitions combine with ``np.minimum``.
    """
    out = np.full(n_terms, _ABSENT, np.int64)
    if len(matches):
        lens = np.fromiter((len(m) for m in matches), np.int64, len(matches))
        if lens.sum():
            ords = np.concatenate([np.asarray(m, np.int64) for m in matches])
            yrs = np.repeat(np.asarray(years, np.int64), lens)
            np.minimum.at(out, ords, yrs)
    return out


def table_from_min_years(term_ids: Sequence[str], min_years: np.ndarray) -> CohortTable:
    return CohortTable({t: int(y) for t, y in zip(term_ids, min_years) if y != _ABSENT})


def compute_cohorts(
    publications: Iterable,
    matcher: DictionaryMatcher,
    *,
    workers: int = 1,
) -> CohortTable:
    """Term-only cohorts over every supplied publication (no sample filters)."""
    pubs = list(publications)
    res = scan_texts(matcher, [p.text for p in pubs], workers=workers)
    mins = min_years_from_matches([p.year for p in pubs], res.matches, len(matcher.term_ids))
    return table_from_min_years(matcher.term_ids, mins)


def pool_synonyms(table: CohortTable, thesaurus: Thesaurus) -> CohortTable:
    """Replace each term's cohort by the minimum over its synonym group."""
    if table.mode is not CohortMode.TERM_ONLY:
        raise ValidationError("pool_synonyms expects a term-only cohort table")
    concept_min: dict[str, int] = {}
    for term_id, year in table.years.items():
        c = thesaurus.term(term_id).concept_id
        if c not in concept_min or year < concept_min[c]:
            concept_min[c] = year
    pooled = {t: concept_min[thesaurus.term(t).concept_id] for t in table.years}
    return replace(table, years=pooled, mode=CohortMode.SYNONYM_POOLED)


def synonym_min_years(table: CohortTable, thesaurus: Thesaurus) -> dict[str, int]:
    """Earliest cohort among each observed term's synonyms, itself included."""
    return pool_synonyms(replace(table, mode=CohortMode.TERM_ONLY), thesaurus).years


def apply_floor(table: CohortTable, floor_year: int = DEFAULT_FLOOR) -> CohortTable:
    """Flag terms with cohort before ``floor_year`` as excluded (kept for reporting)."""
    excluded = frozenset(t for t, y in table.years.items() if y < floor_year)
    return replace(table, floor_year=floor_year, excluded=excluded)


def cohort_histogram(table: CohortTable) -> dict[int, int]:
    return dict(sorted(Counter(table.years.values()).items()))


def write_cohorts(path: str | Path, table: CohortTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t, y in table.years.items():
            fh.write(f"{t}\t{y}\t{'excluded' if t in table.excluded else 'kept'}\n")


def read_cohorts(
    path: str | Path,
    mode: CohortMode = CohortMode.TERM_ONLY,
    floor_year: int | None = None,
) -> CohortTable:
    years: dict[str, int] = {}
    excluded: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 3 or parts[2] not in ("kept", "excluded"):
                raise ValidationError(f"{path}:{lineno}: expected TERM_ID<TAB>YEAR<TAB>kept|excluded")
            try:
                years[parts[0]] = int(parts[1])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad year {parts[1]!r}") from None
            if parts[2] == "excluded":
                excluded.add(parts[0])
    return CohortTable(years, mode, floor_year, frozenset(excluded))
