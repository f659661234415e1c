import numpy as np
import pytest
from hypothesis import given, strategies as st

from edgefactor.cohort import (
    CohortMode,
    CohortTable,
    apply_floor,
    cohort_histogram,
    compute_cohorts,
    min_years_from_matches,
    pool_synonyms,
    read_cohorts,
    synonym_min_years,
    table_from_min_years,
    write_cohorts,
)
from edgefactor.corpus import Publication
from edgefactor.errors import ValidationError
from edgefactor.matcher import build_matcher


def _pubs(*rows):
    return [Publication(f"P{i}", y, text, "J") for i, (y, text) in enumerate(rows)]


def test_first_appearance(small_thesaurus):
    pubs = _pubs((2015, "aspirin use"), (1994, "fmri of aspirin"), (2001, "fMRI again"), (1988, "functional MRI"))
    table = compute_cohorts(pubs, build_matcher(small_thesaurus))
    assert table.years == {"aspirin": 1994, "fmri": 1994, "functional mri": 1988}
    assert "asthma" not in table


def test_synonym_pooling(small_thesaurus):
    table = CohortTable({"fmri": 1994, "functional mri": 1988, "aspirin": 2000, "ratio": 1960})
    pooled = pool_synonyms(table, small_thesaurus)
    assert pooled.mode is CohortMode.SYNONYM_POOLED
    assert pooled.years["fmri"] == 1988
    assert pooled.years["aspirin"] == 2000
    assert synonym_min_years(table, small_thesaurus)["fmri"] == 1988
    with pytest.raises(ValidationError):
        pool_synonyms(pooled, small_thesaurus)


def test_unobserved_synonym_leaves_term_alone(small_thesaurus):
    table = CohortTable({"fmri": 1994})
    assert pool_synonyms(table, small_thesaurus).years == {"fmri": 1994}


def test_floor_boundary():
    t = apply_floor(CohortTable({"a": 1949, "b": 1950, "c": 2016}), 1950)
    assert t.excluded == {"a"}
    assert not t.retained("a") and t.retained("b") and t.retained("c")
    assert t.years["a"] == 1949
    assert t.as_array(["a", "b", "c", "zzz"]).tolist() == [-1, 1950, 2016, -1]


@given(st.lists(st.tuples(st.integers(1946, 2016), st.lists(st.integers(0, 9), max_size=5)), max_size=30))
def test_min_reduction_matches_loop_and_merges(rows):
    years = [y for y, _ in rows]
    matches = [np.array(sorted(set(m)), np.int64) for _, m in rows]
    got = min_years_from_matches(years, matches, 10)
    expect = {}
    for y, m in zip(years, matches):
        for k in m:
            expect[int(k)] = min(expect.get(int(k), 9999), y)
    table = table_from_min_years([f"t{k}" for k in range(10)], got)
    assert table.years == {f"t{k}": y for k, y in expect.items()}
    # partitions combine with a pointwise minimum
    h = len(rows) // 2
    parts = np.minimum(min_years_from_matches(years[:h], matches[:h], 10),
                       min_years_from_matches(years[h:], matches[h:], 10))
    assert parts.tolist() == got.tolist()


@given(st.dictionaries(st.sampled_from(["fmri", "functional mri", "aspirin", "old drug", "asthma", "ratio"]),
                       st.integers(1940, 2016)))
def test_pooled_never_later(small_thesaurus, years):
    table = CohortTable(years)
    pooled = pool_synonyms(table, small_thesaurus)
    for t, y in years.items():
        assert pooled.years[t] <= y


def test_cohort_file_round_trip(tmp_path):
    t = apply_floor(CohortTable({"a b": 1949, "c": 1990}), 1950)
    write_cohorts(tmp_path / "c.tsv", t)
    assert (tmp_path / "c.tsv").read_text() == "a b\t1949\texcluded\nc\t1990\tkept\n"
    back = read_cohorts(tmp_path / "c.tsv", floor_year=1950)
    assert back == t
    assert cohort_histogram(t) == {1949: 1, 1990: 1}
    (tmp_path / "bad.tsv").write_text("x\t19x0\tkept\n")
    with pytest.raises(ValidationError):
        read_cohorts(tmp_path / "bad.tsv")
