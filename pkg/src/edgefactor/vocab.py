"""Controlled vocabulary: terms, synonym groups and idea categories."""

from __future__ import annotations

import enum
import logging
import re
from importlib import resources
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from .errors import Diagnostic, ValidationError
from .matcher import normalize_text

logger = logging.getLogger(__name__)


class IdeaGroup(str, enum.Enum):
    CLINICAL_AND_ANATOMY = "ClinicalAndAnatomy"
    DRUGS_AND_CHEMICALS = "DrugsAndChemicals"
    BASIC_SCIENCE_AND_RESEARCH_TOOLS = "BasicScienceAndResearchTools"
    MISCELLANEOUS = "Miscellaneous"

    @classmethod
    def parse(cls, label: str) -> IdeaGroup:
        """Accept either the enum value or the spaced display label."""
        key = re.sub(r"[^a-z]", "", label.lower())
        for g in cls:
            if g.value.lower() == key:
                return g
        raise ValueError(f"unknown idea category group {label!r}")


@dataclass(frozen=True)
class IdeaCategory:
    id: str
    name: str
    group: IdeaGroup


@dataclass(frozen=True)
class Term:
    term_id: str
    tokens: tuple[str, ...]
    concept_id: str
    category_ids: frozenset[str]
    text: str = ""

    @property
    def normalized(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Thesaurus:
    terms: list[Term]
    categories: dict[str, IdeaCategory]
    concept_index: dict[str, frozenset[str]] = field(default_factory=dict)
    dropped: int = 0
    diagnostics: list[Diagnostic] = field(default_factory=list)
    strip_accents: bool = False

    def __post_init__(self) -> None:
        self._by_id = {t.term_id: t for t in self.terms}
        if len(self._by_id) != len(self.terms):
            raise ValidationError("duplicate term_id in thesaurus")
        if not self.concept_index:
            index: dict[str, set[str]] = {}
            for t in self.terms:
                index.setdefault(t.concept_id, set()).add(t.term_id)
            self.concept_index = {c: frozenset(ids) for c, ids in index.items()}
        for t in self.terms:
            missing = t.category_ids - self.categories.keys()
            if missing:
                raise ValidationError(f"term {t.term_id!r} references unknown categories {sorted(missing)}")

    def term(self, term_id: str) -> Term:
        return self._by_id[term_id]

    def __contains__(self, term_id: str) -> bool:
        return term_id in self._by_id

    def __len__(self) -> int:
        return len(self.terms)

    def synonyms(self, term_id: str) -> frozenset[str]:
        return self.concept_index[self._by_id[term_id].concept_id]

    def category_group(self, category_id: str) -> IdeaGroup:
        return category_group(self, category_id)

    def categories_in_group(self, group: IdeaGroup) -> list[str]:
        return [c.id for c in self.categories.values() if c.group is group]


def category_group(thesaurus: Thesaurus, category_id: str) -> IdeaGroup:
    try:
        return thesaurus.categories[category_id].group
    except KeyError:
        raise KeyError(f"unknown idea category {category_id!r}") from None


def _lines(source: str | Path | Iterable[str]) -> Iterable[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", errors="replace") as fh:
            yield from enumerate((ln.rstrip("\r\n") for ln in fh), start=1)
    else:
        yield from enumerate((ln.rstrip("\r\n") for ln in source), start=1)


def load_categories(source: str | Path | Iterable[str]) -> dict[str, IdeaCategory]:
    """Read ``CATEGORY_LABEL<TAB>GROUP_LABEL`` lines.

    An unknown group label is fatal.
    """
    name = str(source) if isinstance(source, (str, Path)) else "<categories>"
    out: dict[str, IdeaCategory] = {}
    for lineno, line in _lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise ValidationError(f"{name}:{lineno}: expected CATEGORY<TAB>GROUP")
        label, group = parts[0].strip(), parts[1].strip()
        try:
            g = IdeaGroup.parse(group)
        except ValueError as exc:
            raise ValidationError(f"{name}:{lineno}: {exc}") from None
        if label in out and out[label].group is not g:
            raise ValidationError(f"{name}:{lineno}: category {label!r} assigned to two groups")
        out[label] = IdeaCategory(label, label, g)
    return out


def default_categories() -> dict[str, IdeaCategory]:
    """The bundled table of biomedical semantic types and their groups."""
    text = resources.files("edgefactor").joinpath("data/idea_categories.tsv").read_text(encoding="utf-8")
    return load_categories(text.splitlines())


def load_thesaurus(
    source: str | Path | Iterable[str],
    categories: dict[str, IdeaCategory] | str | Path | Iterable[str],
    *,
    strip_accents: bool = False,
) -> Thesaurus:
    """Load ``TERM<TAB>CONCEPT_ID<TAB>CATEGORY[<TAB>TERM_ID]`` records.

    Without an explicit TERM_ID the normalized text is the id. Repeated
    lines for one term merge their categories; the same id under two
    concepts is fatal. Malformed lines and lines with an unknown category
    are skipped with a diagnostic; terms that normalize to nothing are
    dropped and counted.
    """
    if not isinstance(categories, dict):
        categories = load_categories(categories)
    name = str(source) if isinstance(source, (str, Path)) else "<vocab>"
    diagnostics: list[Diagnostic] = []
    dropped = 0
    order: list[str] = []
    entries: dict[str, dict] = {}
    for lineno, line in _lines(source):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            diagnostics.append(Diagnostic(name, lineno, f"expected 3 or 4 fields, got {len(parts)}"))
            continue
        text, concept, category = parts[0], parts[1].strip(), parts[2].strip()
        if not concept or not category:
            diagnostics.append(Diagnostic(name, lineno, "empty concept id or category"))
            continue
        if category not in categories:
            diagnostics.append(Diagnostic(name, lineno, f"unknown category {category!r}"))
            continue
        tokens = tuple(normalize_text(text, strip_accents=strip_accents))
        if not tokens:
            dropped += 1
            diagnostics.append(Diagnostic(name, lineno, "term normalizes to zero tokens; dropped"))
            continue
        term_id = parts[3].strip() if len(parts) == 4 and parts[3].strip() else " ".join(tokens)
        entry = entries.get(term_id)
        if entry is None:
            entries[term_id] = {"tokens": tokens, "concept": concept, "cats": {category}, "text": text.strip()}
            order.append(term_id)
        else:
            if entry["concept"] != concept:
                raise ValidationError(
                    f"{name}:{lineno}: duplicate term_id {term_id!r} under concepts "
                    f"{entry['concept']!r} and {concept!r}"
                )
            if entry["tokens"] != tokens:
                raise ValidationError(f"{name}:{lineno}: duplicate term_id {term_id!r} with different text")
            entry["cats"].add(category)
    terms = [
        Term(tid, e["tokens"], e["concept"], frozenset(e["cats"]), e["text"])
        for tid, e in ((tid, entries[tid]) for tid in order)
    ]
    for d in diagnostics:
        logger.debug("%s", d)
    return Thesaurus(terms, dict(categories), dropped=dropped, diagnostics=diagnostics,
                     strip_accents=strip_accents)


def dump_thesaurus(thesaurus: Thesaurus, vocab_path: str | Path, categories_path: str | Path) -> None:
    """Write the thesaurus back out; reloading reproduces identical tables."""
    with open(categories_path, "w", encoding="utf-8") as fh:
        for c in thesaurus.categories.values():
            fh.write(f"{c.id}\t{c.group.value}\n")
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for t in thesaurus.terms:
            for cat in sorted(t.category_ids):
                fh.write(f"{t.text or t.normalized}\t{t.concept_id}\t{cat}\t{t.term_id}\n")
