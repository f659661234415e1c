import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from edgefactor.cohort import CohortTable, apply_floor
from edgefactor.corpus import Publication
from edgefactor.errors import ValidationError
from edgefactor.scoring import (
    CellKey,
    ContributionBuilder,
    contributions_frame,
    extract_contributions,
    flag_novelty,
    normalize,
    novel_flags,
    read_contributions,
    score_period,
    write_contributions,
)
from oracles import naive_novel

JOURNALS = {"J1": ("Oncology", "Hematology"), "J2": ("Oncology",)}
COHORTS = apply_floor(CohortTable({
    "fmri": 1994, "functional mri": 2008, "aspirin": 2010, "old drug": 1940, "asthma": 1960, "ratio": 2015,
}))


def _pub(year=2015, journal="J1"):
    return Publication("P1", year, "", journal)


def test_k_times_j(small_thesaurus):
    out = extract_contributions(_pub(), ["fmri", "aspirin", "asthma"], COHORTS, small_thesaurus, JOURNALS)
    assert len(out) == 3 * 2
    assert {c.cell for c in out} == {
        CellKey(cat, area)
        for cat in ("Gene or Genome", "Pharmacologic Substance", "Disease or Syndrome")
        for area in ("Oncology", "Hematology")
    }


def test_newest_term_sets_vintage(small_thesaurus):
    out = extract_contributions(_pub(journal="J2"), ["fmri", "functional mri"], COHORTS, small_thesaurus, JOURNALS)
    (c,) = out
    assert c.cohort_year == 2008 and c.age == 7


def test_floor_excluded_term_gives_nothing(small_thesaurus):
    assert extract_contributions(_pub(), ["old drug"], COHORTS, small_thesaurus, JOURNALS) == []
    # the excluded term does not block a newer retained one in the same category
    out = extract_contributions(_pub(journal="J2"), ["old drug", "aspirin"], COHORTS, small_thesaurus, JOURNALS)
    assert [c.cohort_year for c in out] == [2010]


def test_unknown_journal_and_future_cohort(small_thesaurus):
    assert extract_contributions(_pub(journal="J9"), ["fmri"], COHORTS, small_thesaurus, JOURNALS) == []
    with pytest.raises(ValidationError):
        extract_contributions(_pub(year=2012), ["ratio"], COHORTS, small_thesaurus, JOURNALS)


TERMS = ["fmri", "functional mri", "aspirin", "old drug", "asthma", "ratio"]


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.sets(st.sampled_from(TERMS)), st.sampled_from(["J1", "J2", "J9"])), max_size=20))
def test_builder_matches_reference(small_thesaurus, papers):
    builder = ContributionBuilder(TERMS, COHORTS, small_thesaurus, JOURNALS)
    expected = []
    for i, (terms, journal) in enumerate(papers):
        pub = Publication(f"P{i}", 2016, "", journal)
        ords = np.array(sorted(TERMS.index(t) for t in terms), np.int64)
        builder.add(pub, ords, "LOC")
        expected += extract_contributions(pub, terms, COHORTS, small_thesaurus, JOURNALS, "LOC")
    got = builder.frame()
    want = contributions_frame(expected)
    key = ["paper_id", "idea_category", "research_area"]
    pd.testing.assert_frame_equal(got.sort_values(key).reset_index(drop=True),
                                  want.sort_values(key).reset_index(drop=True))


def test_novelty_distinct_pool():
    c = np.arange(1997, 2017)
    flags = novel_flags(c, 0.05)
    assert flags.tolist() == [False] * 19 + [True]


def test_novelty_all_tied():
    assert novel_flags([2000] * 7, 0.05).all()


def test_novelty_tied_top():
    c = [2016, 2016] + [2000] * 8
    assert novel_flags(c, 0.05).tolist() == [True, True] + [False] * 8


@given(st.lists(st.integers(1950, 2016), min_size=1, max_size=60), st.sampled_from([0.01, 0.05, 0.1, 0.2, 0.5]))
def test_novel_flags_oracle(c, p):
    assert novel_flags(c, p).tolist() == naive_novel(c, p)


def _frame(rows):
    return pd.DataFrame(rows, columns=["paper_id", "idea_category", "research_area", "pub_year", "cohort_year",
                                       "location"])


def test_flag_novelty_pools_by_cell_and_year():
    rows = [(f"a{i}", "X", "R", 2015, 2015 if i == 0 else 2000, "L") for i in range(10)]
    rows += [(f"b{i}", "X", "R", 2016, 1990, "M") for i in range(5)]
    rows += [(f"c{i}", "Y", "R", 2015, 2000 + i, None) for i in range(3)]
    df = flag_novelty(_frame(rows), 0.05)
    assert df["novel"].tolist() == [True] + [False] * 9 + [True] * 5 + [False, False, True]
    with pytest.raises(ValueError):
        flag_novelty(_frame(rows), 0)


def test_normalize_scores():
    df = pd.DataFrame({"idea_category": ["X"] * 20 + ["Y"] * 3, "research_area": ["R"] * 23,
                       "novel": [True] + [False] * 19 + [True] * 3})
    out = normalize(df)
    assert out["score"].iloc[0] == pytest.approx(2000)
    assert out["score"].iloc[1] == 0
    assert out["score"].iloc[20:].tolist() == [100.0] * 3
    assert out.groupby("idea_category")["score"].mean().tolist() == pytest.approx([100, 100], abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("XY"), st.sampled_from("RS"), st.integers(2014, 2016),
                          st.integers(1990, 2014)), min_size=1, max_size=200),
       st.sampled_from([0.01, 0.05, 0.2]))
def test_cell_means_are_100(rows, p):
    df = _frame([(f"p{i}", c, a, y, co, None) for i, (c, a, y, co) in enumerate(rows)])
    out = score_period(df, (2015, 2016), p)
    if out.empty:
        return
    means = out.groupby(["idea_category", "research_area"])["score"].mean()
    assert np.allclose(means.to_numpy(), 100.0, rtol=0, atol=1e-9)
    assert out["pub_year"].between(2015, 2016).all()


def test_contributions_csv_round_trip(tmp_path):
    df = _frame([("1", "A, B", "R", 2015, 2001, "L"), ("2", "A, B", "R", 2015, 2003, None)])
    out = score_period(df, (2015, 2015), 0.05)
    write_contributions(tmp_path / "c.csv", out)
    back = read_contributions(tmp_path / "c.csv")
    pd.testing.assert_frame_equal(back, out, check_dtype=False)
