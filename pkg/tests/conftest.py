import pytest

from edgefactor.vocab import load_thesaurus

# filled by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)

CATEGORIES = [
    "Disease or Syndrome\tClinicalAndAnatomy",
    "Pharmacologic Substance\tDrugsAndChemicals",
    "Gene or Genome\tBasicScienceAndResearchTools",
    "Quantitative Concept\tMiscellaneous",
]


@pytest.fixture(scope="session")
def small_thesaurus():
    """Six terms in four categories; fmri and functional mri are synonyms."""
    return load_thesaurus(
        [
            "fmri\tC1\tGene or Genome",
            "functional mri\tC1\tGene or Genome",
            "aspirin\tC2\tPharmacologic Substance",
            "old drug\tC3\tPharmacologic Substance",
            "asthma\tC4\tDisease or Syndrome",
            "ratio\tC5\tQuantitative Concept",
        ],
        CATEGORIES,
    )


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """A small three-location planted corpus shared by the pipeline and CLI tests."""
    from edgefactor.synth import generate, planted_lag_config

    d = tmp_path_factory.mktemp("synth")
    generate(planted_lag_config(0, recent_papers_per_year=60), d)
    return d


def run_config(d, out, **kw):
    from edgefactor.pipeline import RunConfig

    return RunConfig(vocab=str(d / "vocab.tsv"), categories=str(d / "categories.tsv"),
                     corpus=str(d / "corpus.jsonl"), journals=str(d / "journals.tsv"),
                     gazetteer=str(d / "gazetteer.tsv"), regions=str(d / "regions.tsv"), out_dir=str(out), **kw)
