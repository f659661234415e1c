import json

import pytest
from hypothesis import given, strategies as st

from edgefactor.corpus import (
    HUMAN_CODE,
    AreaGroup,
    AreaStatusAccumulator,
    FilterConfig,
    Gazetteer,
    Publication,
    TranslationalStatus,
    classify_area,
    classify_research_area_groups,
    in_subtree,
    load_gazetteer,
    load_journals,
    load_publications,
    load_status_rules,
    parse_publication,
    passes_sample_filters,
    publication_to_record,
    resolve_location,
    translational_status,
)
from edgefactor.errors import ValidationError


def _record(**kw):
    rec = {
        "id": "P1", "year": 2015, "title": "A title", "abstract": "An abstract.", "journal": "J1",
        "affiliation": "Univ of X, Canada", "mesh": ["M01"], "type": "Original",
    }
    rec.update(kw)
    return rec


def test_parse_full_record():
    pub = parse_publication(_record())
    assert pub == Publication("P1", 2015, "A title An abstract.", "J1", "Univ of X, Canada",
                              frozenset({"M01"}), True)


def test_missing_affiliation_is_kept():
    rec = _record()
    del rec["affiliation"]
    (pub,) = load_publications([json.dumps(rec)])
    assert pub.affiliation is None


def test_early_year_accepted_for_cohorts():
    (pub,) = load_publications([json.dumps(_record(year=1947))], year_range=(1946, 2016))
    assert pub.year == 1947


def test_loader_skips_bad_and_duplicate_records():
    lines = [
        json.dumps(_record(id="A")),
        "{not json",
        json.dumps(_record(id="A")),
        json.dumps(_record(id="B", year=None)),
        json.dumps(_record(id="C", year=1900)),
        "",
        json.dumps(_record(id="D")),
    ]
    diags = []
    pubs = list(load_publications(lines, year_range=(1946, 2016), diagnostics=diags))
    assert [p.paper_id for p in pubs] == ["A", "D"]
    assert [d.line for d in diags] == [2, 3, 4, 5]


def test_unreadable_corpus_is_fatal(tmp_path):
    with pytest.raises(ValidationError):
        list(load_publications(tmp_path / "missing.jsonl"))


def test_record_round_trip():
    pub = parse_publication(_record(abstract=""))
    assert parse_publication(publication_to_record(pub)) == pub


def _pub(chars, original=True, year=2015):
    return Publication("P", year, "x" * chars, "J", is_original_research=original)


def test_sample_filters():
    cfg = FilterConfig()
    assert passes_sample_filters(_pub(1000), cfg)
    assert not passes_sample_filters(_pub(1000, original=False), cfg)
    assert not passes_sample_filters(_pub(150), cfg)
    assert passes_sample_filters(_pub(150), FilterConfig(char_lo=None, char_hi=None))
    assert not passes_sample_filters(_pub(5001), cfg)
    assert passes_sample_filters(_pub(5000), cfg) and passes_sample_filters(_pub(200), cfg)
    assert not passes_sample_filters(_pub(1000, year=1987), cfg)
    assert passes_sample_filters(_pub(1000, original=False), FilterConfig(original_only=False))


def test_non_research_types():
    for t in ("Editorial", "Review", "Letter", "", None):
        assert not parse_publication(_record(type=t)).is_original_research
    for t in ("original", "Journal Article", "research article"):
        assert parse_publication(_record(type=t)).is_original_research


GAZ = Gazetteer(
    [("Canada", "CANADA"), ("Korea", "NORTH KOREA"), ("Republic of Korea", "SOUTH KOREA"),
     ("Nigeria", "NIGERIA"), ("Georgia", "GEORGIA"), ("USA", "USA")],
    {"NIGERIA": "OTHER AFRICA"},
)


def test_resolve_location_examples():
    assert resolve_location("Dept. of Economics, University of Waterloo, Waterloo, Ontario, Canada", GAZ) == "CANADA"
    assert resolve_location("Seoul National University, Seoul, Republic of Korea", GAZ) == "SOUTH KOREA"
    assert resolve_location("Institute of Parasitology, Abeokuta, Nigeria", GAZ) == "OTHER AFRICA"
    assert resolve_location("Somewhere unknown", GAZ) is None
    assert resolve_location(None, GAZ) is None


def test_resolve_location_prefers_later_match():
    assert resolve_location("University of Georgia, Athens, Georgia, USA", GAZ) == "GEORGIA"
    # a longer pattern beats a later one
    gaz = Gazetteer([("Georgia", "GEORGIA"), ("Athens", "GREECE")])
    assert resolve_location("Univ. of Georgia, Athens", gaz) == "GEORGIA"


def test_reporting_locations_apply_regions():
    assert GAZ.reporting_locations == ["CANADA", "NORTH KOREA", "SOUTH KOREA", "OTHER AFRICA", "GEORGIA", "USA"]


def test_gazetteer_files(tmp_path):
    (tmp_path / "g.tsv").write_text("Canada\tCANADA\nNigeria\tNIGERIA\n")
    (tmp_path / "r.tsv").write_text("NIGERIA\tOTHER AFRICA\n")
    gaz = load_gazetteer(tmp_path / "g.tsv", tmp_path / "r.tsv")
    assert resolve_location("Lagos, NIGERIA", gaz) == "OTHER AFRICA"
    (tmp_path / "bad.tsv").write_text("just one field\n")
    with pytest.raises(ValidationError):
        load_gazetteer(tmp_path / "bad.tsv")


def test_status_examples():
    assert translational_status({"M01"}) == TranslationalStatus(h=True, a=False, c=False)
    assert translational_status({"B03.440"}) == TranslationalStatus(h=False, a=False, c=True)
    assert translational_status({"B01.050"}) == TranslationalStatus(h=False, a=True, c=False)


def test_human_code_is_not_animal():
    assert translational_status({HUMAN_CODE}) == TranslationalStatus(h=True)
    assert translational_status({HUMAN_CODE + ".123"}) == TranslationalStatus(h=True)
    assert translational_status({HUMAN_CODE, "B01.050.150"}) == TranslationalStatus(h=True, a=True)


def test_cell_codes_and_malformed():
    for code in ("A11.251", "B02", "B04.820", "G02.111.570.100", "G02.149"):
        assert translational_status({code}).c
    assert not translational_status({"G02.111"}).c
    diags = []
    assert translational_status({"B03..1", ""}, diagnostics=diags) == TranslationalStatus()
    assert len(diags) == 2


def test_subtree_is_dot_aware():
    assert in_subtree("B01.050", "B01")
    assert not in_subtree("B011", "B01")


def test_status_rules_file(tmp_path):
    p = tmp_path / "rules.tsv"
    p.write_text(f"H\tM01\nA\tB01\t{HUMAN_CODE}\nC\tB03\n")
    rules = load_status_rules(p)
    assert translational_status({"B03.1"}, rules).c
    assert not translational_status({"A11"}, rules).c
    assert not translational_status({HUMAN_CODE}, rules).a
    p.write_text("X\tB03\n")
    with pytest.raises(ValidationError):
        load_status_rules(p)


def test_classify_examples():
    assert classify_area(0.9, 0.1, 0.2) is AreaGroup.APPLIED
    assert classify_area(0.1, 0.3, 0.8) is AreaGroup.BASIC_SCIENCE
    assert classify_area(0.1, 0.9, 0.9) is AreaGroup.OTHER
    assert classify_area(0.2, 0.0, 0.0) is AreaGroup.OTHER
    assert classify_area(0.5, 0.0, 0.5) is AreaGroup.OTHER


def test_classify_from_papers_and_empty_area():
    journals = {"J1": ("Clinical",), "J2": ("Molecular", "Clinical"), "J3": ("Empty",)}
    papers = [
        (Publication("1", 2015, "", "J1"), TranslationalStatus(h=True)),
        (Publication("2", 2015, "", "J2"), TranslationalStatus(c=True)),
        (Publication("3", 2015, "", "J2"), TranslationalStatus(c=True)),
    ]
    groups = classify_research_area_groups(papers, journals)
    # Clinical: H = 1/3 < C = 2/3 with C > 0.5, so it lands in BasicScience too
    assert groups == {"Clinical": AreaGroup.BASIC_SCIENCE, "Molecular": AreaGroup.BASIC_SCIENCE, "Empty": AreaGroup.OTHER}


@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.booleans(), st.sampled_from("xyz")), max_size=40),
       st.integers(0, 40))
def test_accumulator_merge_matches_single_pass(rows, cut):
    whole, left, right = AreaStatusAccumulator(), AreaStatusAccumulator(), AreaStatusAccumulator()
    for i, (h, a, c, area) in enumerate(rows):
        st_ = TranslationalStatus(h, a, c)
        whole.add(st_, [area])
        (left if i < cut else right).add(st_, [area])
    assert left.merge(right).averages() == whole.averages()


def test_journal_table(tmp_path):
    p = tmp_path / "j.tsv"
    p.write_text("J1\tOncology\nJ1\tHematology\nJ2\tOncology\nJ1\tOncology\n")
    assert load_journals(p) == {"J1": ("Oncology", "Hematology"), "J2": ("Oncology",)}
