"""Synthetic thesauri and corpora with planted idea vintages and adoption lags.

Ideas are born per idea category by a Poisson process. A paper from
location L in year y draws its adoption lag from a Poisson distribution
around L's mean lag (optionally drifting linearly over the corpus years),
so it only sees ideas born by ``y - lag``. Among those it picks ideas with
a geometric recency bias. Locations with smaller lags therefore work
closer to the frontier, which is recorded in ``truth.json``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import HUMAN_CODE
from .errors import ValidationError

FILLER = (
    "the of and in to with for was were is are by on from that this we as at an be these patients "
    "study results methods analysis data group groups using used between after during increased "
    "associated compared significant significantly observed found showed higher lower levels effect "
    "effects clinical model treatment response role two three risk factors our total mean years "
    "population cohort samples sample rate rates age sex outcome outcomes evidence further however "
    "suggest findings present reported performed conducted background objective conclusion design "
    "setting measures including among while both whether within without across than more less"
).split()

_ONSETS = "b c d f g k l m n p r s t v z br dr kr pl st tr".split()
_VOWELS = "a e i o u ai ou".split()
_MODIFIERS = "acute chronic novel modified recombinant targeted soluble atypical".split()

AREA_KINDS = ("clinical", "basic", "mixed", "veterinary")

_MESH = {
    "human": [HUMAN_CODE],
    "person": ["M01", "M01.060"],
    "cells": ["A11.251", "B03.440", "B04.820", "G02.111.570.060", "G02.149.115", "B02.100"],
    "animal": ["B01.050.150.900.649.313", "B01.050.150.900.493", "B01.050"],
}
_AREA_MESH_PROB = {
    "clinical": {"human": 0.9, "person": 0.1, "cells": 0.1, "animal": 0.05},
    "basic": {"human": 0.1, "person": 0.0, "cells": 0.85, "animal": 0.3},
    "mixed": {"human": 0.5, "person": 0.05, "cells": 0.45, "animal": 0.4},
    "veterinary": {"human": 0.05, "person": 0.0, "cells": 0.7, "animal": 0.95},
}


@dataclass
class LocationSpec:
    name: str
    lag: float
    lag_end: float | None = None
    aliases: list[str] = field(default_factory=list)
    region: str | None = None
    weight: float = 1.0

    def mean_lag(self, year: int, start: int, end: int) -> float:
        if self.lag_end is None or end == start:
            return self.lag
        frac = (year - start) / (end - start)
        return self.lag + (self.lag_end - self.lag) * frac


@dataclass
class SynthConfig:
    locations: list[LocationSpec]
    seed: int = 0
    year_start: int = 1946
    year_end: int = 2016
    idea_year_start: int = 1930
    n_categories: int = 4
    ideas_per_year: float = 2.0
    recency_decay: float = 0.7
    papers_per_year: int = 10
    recent_papers_per_year: int | None = None
    recent_start: int = 2015
    n_areas: int = 2
    n_journals: int = 6
    multi_area_prob: float = 0.0
    category_prob: float = 0.95
    max_terms_per_category: int = 2
    synonym_prob: float = 0.2
    multi_category_prob: float = 0.05
    hyphen_prob: float = 0.2
    editorial_prob: float = 0.03
    short_text_prob: float = 0.01
    unlocated_prob: float = 0.01

    def validate(self) -> None:
        if not self.locations:
            raise ValidationError("synth config needs at least one location")
        span = self.year_end - self.year_start
        if span < 0 or self.idea_year_start > self.year_start:
            raise ValidationError("synth config: year range is empty or ideas start after the corpus")
        for loc in self.locations:
            for lag in (loc.lag, loc.lag_end):
                if lag is None:
                    continue
                if lag < 0:
                    raise ValidationError(f"location {loc.name}: lag must be >= 0")
                if lag > span:
                    raise ValidationError(f"location {loc.name}: lag {lag} exceeds corpus span {span}")
        counts = (self.n_categories, self.n_areas, self.n_journals, self.papers_per_year)
        if min(counts) <= 0 or self.ideas_per_year <= 0:
            raise ValidationError("synth config: all counts must be positive")
        if self.recent_papers_per_year is not None and self.recent_papers_per_year <= 0:
            raise ValidationError("synth config: recent_papers_per_year must be positive")
        if not 0 < self.recency_decay < 1:
            raise ValidationError("synth config: recency_decay must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        d = dict(d)
        locs = [LocationSpec(**loc) for loc in d.pop("locations")]
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown synth config keys {sorted(unknown)}")
        return cls(locations=locs, **d)

    def to_dict(self) -> dict:
        return asdict(self)


def load_synth_config(path: str | Path) -> SynthConfig:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return SynthConfig.from_dict(tomllib.load(fh))


def _category_names(n: int) -> list[tuple[str, str]]:
    """First ``n`` categories of the shipped table, alternating between groups."""
    text = resources.files("edgefactor").joinpath("data/idea_categories.tsv").read_text(encoding="utf-8")
    by_group: dict[str, list[str]] = {}
    for line in text.splitlines():
        cat, group = line.split("\t")
        by_group.setdefault(group, []).append(cat)
    groups = list(by_group)
    out: list[tuple[str, str]] = []
    i = 0
    while len(out) < n:
        g = groups[i % len(groups)]
        k = i // len(groups)
        if k < len(by_group[g]):
            out.append((by_group[g][k], g))
        elif i > 4 * 200:
            out.append((f"Synthetic Category {len(out) + 1}", "Miscellaneous"))
        i += 1
    return out


def _pseudo_word(k: int) -> str:
    """Unique syllable word for integer ``k`` (never collides with FILLER)."""
    parts = []
    k += 1
    while k:
        k, r = divmod(k, len(_ONSETS) * len(_VOWELS))
        parts.append(_ONSETS[r // len(_VOWELS)] + _VOWELS[r % len(_VOWELS)])
    return "x" + "".join(parts) + "q"


@dataclass
class _Idea:
    concept: str
    birth: int
    categories: tuple[int, ...]
    forms: list[tuple[str, ...]]
    hyphenated: bool


def generate(cfg: SynthConfig, out_dir: str | Path) -> dict:
    """Write vocab, categories, journals, gazetteer, regions, corpus and truth files.

    Returns the truth record also written to ``truth.json``.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)

    categories = _category_names(cfg.n_categories)

    ideas: list[_Idea] = []
    births_by_cat: list[list[int]] = [[] for _ in categories]
    ideas_by_cat: list[list[int]] = [[] for _ in categories]
    word = 0
    for year in range(cfg.idea_year_start, cfg.year_end + 1):
        for ci in range(len(categories)):
            for _ in range(rng.poisson(cfg.ideas_per_year)):
                cats = [ci]
                if len(categories) > 1 and rng.random() < cfg.multi_category_prob:
                    other = int(rng.integers(len(categories) - 1))
                    cats.append(other if other < ci else other + 1)
                n_forms = 2 if rng.random() < cfg.synonym_prob else 1
                forms = []
                for _ in range(n_forms):
                    mods = tuple(_MODIFIERS[int(rng.integers(len(_MODIFIERS)))] for _ in range(int(rng.integers(0, 2))))
                    forms.append(mods + (_pseudo_word(word),))
                    word += 1
                idx = len(ideas)
                ideas.append(_Idea(f"C{idx:06d}", year, tuple(sorted(cats)), forms, rng.random() < cfg.hyphen_prob))
                for c in cats:
                    births_by_cat[c].append(year)
                    ideas_by_cat[c].append(idx)
    births_arr = [np.asarray(b) for b in births_by_cat]
    ideas_arr = [np.asarray(i) for i in ideas_by_cat]

    with open(out / "categories.tsv", "w", encoding="utf-8") as fh:
        for name, group in categories:
            fh.write(f"{name}\t{group}\n")

    def raw_form(idea: _Idea, form: tuple[str, ...]) -> str:
        if idea.hyphenated and len(form[-1]) > 4:
            w = form[-1]
            return " ".join(form[:-1] + (w[:3] + "-" + w[3:],))
        return " ".join(form)

    with open(out / "vocab.tsv", "w", encoding="utf-8") as fh:
        for idea in ideas:
            for form in idea.forms:
                for c in idea.categories:
                    fh.write(f"{raw_form(idea, form)}\t{idea.concept}\t{categories[c][0]}\n")

    areas = [(f"Research Area {a + 1:02d}", AREA_KINDS[a % len(AREA_KINDS)]) for a in range(cfg.n_areas)]
    journals: list[tuple[str, list[int]]] = []
    for j in range(cfg.n_journals):
        first = j % cfg.n_areas
        linked = [first]
        if cfg.n_areas > 1 and rng.random() < cfg.multi_area_prob:
            second = int(rng.integers(cfg.n_areas - 1))
            linked.append(second if second < first else second + 1)
        journals.append((f"J{j:04d}", linked))
    with open(out / "journals.tsv", "w", encoding="utf-8") as fh:
        for jid, linked in journals:
            for a in linked:
                fh.write(f"{jid}\t{areas[a][0]}\n")

    with open(out / "gazetteer.tsv", "w", encoding="utf-8") as fh:
        for loc in cfg.locations:
            fh.write(f"{loc.name.title()}\t{loc.name}\n")
            for alias in loc.aliases:
                fh.write(f"{alias}\t{loc.name}\n")
    with open(out / "regions.tsv", "w", encoding="utf-8") as fh:
        for loc in cfg.locations:
            fh.write(f"{loc.name}\t{loc.region or loc.name}\n")

    loc_weights = np.array([loc.weight for loc in cfg.locations], float)
    loc_weights /= loc_weights.sum()
    n_papers = 0
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for year in range(cfg.year_start, cfg.year_end + 1):
            per_loc = (cfg.recent_papers_per_year
                       if cfg.recent_papers_per_year is not None and year >= cfg.recent_start
                       else cfg.papers_per_year)
            for li, loc in enumerate(cfg.locations):
                mean_lag = loc.mean_lag(year, cfg.year_start, cfg.year_end)
                for _ in range(int(round(per_loc * loc_weights[li] * len(cfg.locations)))):
                    rec = _paper(rng, cfg, n_papers, year, loc, mean_lag, ideas, births_arr, ideas_arr,
                                 categories, journals, areas, raw_form)
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
                    n_papers += 1

    mid = {loc.name: np.mean([loc.mean_lag(y, cfg.year_start, cfg.year_end)
                              for y in range(cfg.recent_start, cfg.year_end + 1)])
           for loc in cfg.locations}
    truth = {
        "seed": cfg.seed,
        "n_papers": n_papers,
        "n_ideas": len(ideas),
        "locations": {loc.name: {"lag": loc.lag, "lag_end": loc.lag_end, "reporting": loc.region or loc.name}
                      for loc in cfg.locations},
        "expected_order": sorted(mid, key=lambda name: (mid[name], name)),
        "idea_births": {idea.concept: idea.birth for idea in ideas},
        "area_kinds": {name: kind for name, kind in areas},
    }
    (out / "truth.json").write_text(json.dumps(truth, indent=1) + "\n", encoding="utf-8")
    return truth


def _paper(rng, cfg, n, year, loc, mean_lag, ideas, births_arr, ideas_arr, categories, journals, areas, raw_form):
    lag = int(rng.poisson(mean_lag)) if mean_lag > 0 else 0
    frontier = year - lag
    mentions: list[str] = []
    for ci in range(len(categories)):
        if rng.random() >= cfg.category_prob:
            continue
        births = births_arr[ci]
        avail = int(np.searchsorted(births, frontier, side="right"))
        if avail == 0:
            continue
        for _ in range(int(rng.integers(1, cfg.max_terms_per_category + 1))):
            age = int(rng.geometric(1 - cfg.recency_decay)) - 1
            hi = int(np.searchsorted(births, frontier - age, side="right"))
            if hi == 0:
                hi = 1
            same = int(np.searchsorted(births, births[hi - 1], side="left"))
            idea = ideas[int(ideas_arr[ci][int(rng.integers(same, hi))])]
            form = idea.forms[0] if len(idea.forms) == 1 or rng.random() < 0.7 else idea.forms[1]
            surface = raw_form(idea, form)
            if idea.hyphenated and rng.random() < 0.5:
                surface = surface.replace("-", "")
            if rng.random() < 0.3:
                surface = surface.upper() if rng.random() < 0.2 else surface.capitalize()
            mentions.append(surface)

    words = [FILLER[int(i)] for i in rng.integers(0, len(FILLER), size=int(rng.integers(50, 90)))]
    for m in mentions:
        pos = int(rng.integers(0, len(words) + 1))
        words.insert(pos, m)
    short = rng.random() < cfg.short_text_prob
    if short:
        words = words[:12]
    title_len = min(len(words), 8)
    title = " ".join(words[:title_len]).capitalize()
    abstract = ". ".join(" ".join(words[i:i + 12]) for i in range(title_len, len(words), 12))
    if abstract:
        abstract = abstract[0].upper() + abstract[1:] + "."

    jid, linked = journals[int(rng.integers(len(journals)))]
    kind = areas[linked[0]][1]
    mesh = []
    for key, prob in _AREA_MESH_PROB[kind].items():
        if rng.random() < prob:
            opts = _MESH[key]
            mesh.append(opts[int(rng.integers(len(opts)))])
    if rng.random() < cfg.unlocated_prob:
        affiliation = None
    else:
        place = loc.name.title()
        if loc.aliases and rng.random() < 0.3:
            place = loc.aliases[int(rng.integers(len(loc.aliases)))]
        affiliation = f"Department of Medicine, University of {_pseudo_word(n % 97).title()}, {place}"
    return {
        "id": f"P{n:08d}",
        "year": year,
        "title": title,
        "abstract": abstract,
        "journal": jid,
        "affiliation": affiliation,
        "mesh": sorted(set(mesh)),
        "type": "editorial" if rng.random() < cfg.editorial_prob else "original",
    }


def planted_lag_config(seed: int, lags=(0, 3, 6), **overrides) -> SynthConfig:
    """Three-location configuration used by the planted-ordering checks."""
    names = ["ALPHALAND", "BETAMARK", "GAMMASTAN", "DELTORIA", "EPSILONIA"]
    locs = [LocationSpec(names[i], float(lag)) for i, lag in enumerate(lags)]
    params = dict(
        locations=locs, seed=seed, year_start=1946, year_end=2016, papers_per_year=6,
        recent_papers_per_year=320, recent_start=2013, n_categories=4, n_areas=2, n_journals=6,
    )
    params.update(overrides)
    return SynthConfig(**params)
