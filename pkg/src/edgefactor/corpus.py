"""Publications, sample filters, location assignment and research-area groups."""

from __future__ import annotations

import csv
import enum
import json
import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

from .errors import Diagnostic, ValidationError

logger = logging.getLogger(__name__)

ORIGINAL_RESEARCH_TYPES = frozenset({"original", "original research", "research article", "journal article"})


@dataclass(frozen=True)
class Publication:
    paper_id: str
    year: int
    text: str
    journal_id: str
    affiliation: str | None = None
    keyword_codes: frozenset[str] = frozenset()
    is_original_research: bool = True


def _lines(source) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", errors="replace") as fh:
            yield from enumerate(fh, start=1)
    else:
        yield from enumerate(source, start=1)


def parse_publication(record: dict) -> Publication:
    """Build a Publication from one decoded JSON object.

    Raises ``ValueError`` (or ``KeyError``/``TypeError``) on bad records.
    """
    pid = record["id"]
    if not isinstance(pid, (str, int)) or str(pid) == "":
        raise ValueError("missing id")
    year = record["year"]
    if isinstance(year, bool) or not isinstance(year, (int, str)):
        raise ValueError(f"bad year {year!r}")
    year = int(year)
    title = record.get("title") or ""
    abstract = record.get("abstract") or ""
    if not isinstance(title, str) or not isinstance(abstract, str):
        raise ValueError("title/abstract must be strings")
    journal = record["journal"]
    if journal is None or str(journal) == "":
        raise ValueError("missing journal")
    aff = record.get("affiliation")
    if aff is not None and not isinstance(aff, str):
        raise ValueError("affiliation must be a string")
    mesh = record.get("mesh") or []
    if isinstance(mesh, str) or not all(isinstance(c, str) for c in mesh):
        raise ValueError("mesh must be a list of tree codes")
    ptype = record.get("type") or ""
    return Publication(
        paper_id=str(pid),
        year=year,
        text=" ".join(p for p in (title, abstract) if p),
        journal_id=str(journal),
        affiliation=aff or None,
        keyword_codes=frozenset(mesh),
        is_original_research=str(ptype).strip().lower() in ORIGINAL_RESEARCH_TYPES,
    )


def load_publications(
    source: str | Path | Iterable[str],
    *,
    year_range: tuple[int, int] | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> Iterator[Publication]:
    """Stream publications from JSON lines, in input order.

    Malformed records, duplicate ids and (when ``year_range`` is given)
    out-of-range years are skipped; each skip appends a diagnostic.
    """
    name = str(source) if isinstance(source, (str, Path)) else "<corpus>"
    if isinstance(source, (str, Path)) and not Path(source).is_file():
        raise ValidationError(f"cannot read corpus {source}")
    seen: set[str] = set()

    def skip(lineno: int, msg: str) -> None:
        d = Diagnostic(name, lineno, msg)
        if diagnostics is not None:
            diagnostics.append(d)
        logger.debug("%s", d)

    for lineno, line in _lines(source):
        if not line.strip():
            continue
        try:
            pub = parse_publication(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            skip(lineno, f"malformed record: {exc}")
            continue
        if pub.paper_id in seen:
            skip(lineno, f"duplicate paper id {pub.paper_id!r}")
            continue
        if year_range is not None and not year_range[0] <= pub.year <= year_range[1]:
            skip(lineno, f"year {pub.year} outside {year_range[0]}-{year_range[1]}")
            continue
        seen.add(pub.paper_id)
        yield pub


def publication_to_record(pub: Publication, title: str | None = None, abstract: str | None = None) -> dict:
    return {
        "id": pub.paper_id,
        "year": pub.year,
        "title": pub.text if title is None else title,
        "abstract": "" if abstract is None else abstract,
        "journal": pub.journal_id,
        "affiliation": pub.affiliation,
        "mesh": sorted(pub.keyword_codes),
        "type": "original" if pub.is_original_research else "other",
    }


# --------------------------------------------------------------------------
# sample filters


@dataclass(frozen=True)
class FilterConfig:
    year_lo: int = 1988
    year_hi: int = 2016
    char_lo: int | None = 200
    char_hi: int | None = 5000
    original_only: bool = True


def passes_sample_filters(pub: Publication, cfg: FilterConfig) -> bool:
    if cfg.original_only and not pub.is_original_research:
        return False
    if not cfg.year_lo <= pub.year <= cfg.year_hi:
        return False
    n = len(pub.text)
    if cfg.char_lo is not None and n < cfg.char_lo:
        return False
    if cfg.char_hi is not None and n > cfg.char_hi:
        return False
    return True


# --------------------------------------------------------------------------
# locations


@dataclass
class Gazetteer:
    """Ordered (pattern, location) pairs plus a location -> reporting location map."""

    patterns: list[tuple[str, str]]
    region_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._lowered = [(p.lower(), loc, i) for i, (p, loc) in enumerate(self.patterns) if p]

    @property
    def reporting_locations(self) -> list[str]:
        out = dict.fromkeys(self.region_map.get(loc, loc) for _, loc in self.patterns)
        return list(out)


def load_gazetteer(patterns_path: str | Path, regions_path: str | Path | None = None) -> Gazetteer:
    pats: list[tuple[str, str]] = []
    for lineno, line in _lines(patterns_path):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ValidationError(f"{patterns_path}:{lineno}: expected PATTERN<TAB>LOCATION")
        pats.append((parts[0].strip(), parts[1].strip()))
    regions: dict[str, str] = {}
    if regions_path is not None:
        for lineno, line in _lines(regions_path):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(f"{regions_path}:{lineno}: expected LOCATION<TAB>REPORTING_LOCATION")
            regions[parts[0].strip()] = parts[1].strip()
    return Gazetteer(pats, regions)


def resolve_location(affiliation: str | None, gaz: Gazetteer) -> str | None:
    """Map a first-author affiliation to a reporting location.

    Matching is case-insensitive substring search. The longest matching
    pattern wins; among equal lengths the one matching later in the string
    wins, then earlier file order.
    """
    if not affiliation:
        return None
    aff = affiliation.lower()
    best = None
    for pat, loc, order in gaz._lowered:
        pos = aff.rfind(pat)
        if pos < 0:
            continue
        key = (len(pat), pos, -order)
        if best is None or key > best[0]:
            best = (key, loc)
    if best is None:
        return None
    loc = best[1]
    return gaz.region_map.get(loc, loc)


# --------------------------------------------------------------------------
# translational status (A-C-H model)

HUMAN_CODE = "B01.050.150.900.649.801.400.112.400.400"


@dataclass(frozen=True)
class TranslationalStatus:
    h: bool = False
    a: bool = False
    c: bool = False


@dataclass(frozen=True)
class StatusRule:
    root: str
    excludes: tuple[str, ...] = ()


@dataclass
class StatusRules:
    h: list[StatusRule]
    a: list[StatusRule]
    c: list[StatusRule]

    @classmethod
    def default(cls) -> StatusRules:
        return cls(
            h=[StatusRule(HUMAN_CODE), StatusRule("M01")],
            a=[StatusRule("B01", (HUMAN_CODE,))],
            c=[StatusRule(r) for r in ("A11", "B02", "B03", "B04", "G02.111.570", "G02.149")],
        )


def load_status_rules(path: str | Path) -> StatusRules:
    """Read ``FLAG<TAB>ROOT_CODE[<TAB>EXCLUDE_CODE]`` lines (FLAG in H, A, C).

    Several lines with the same flag and root merge their exclusions.
    """
    table: dict[str, dict[str, list[str]]] = {"H": {}, "A": {}, "C": {}}
    for lineno, line in _lines(path):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) not in (2, 3) or parts[0].upper() not in table or not _valid_code(parts[1]):
            raise ValidationError(f"{path}:{lineno}: expected FLAG<TAB>ROOT[<TAB>EXCLUDE]")
        excl = table[parts[0].upper()].setdefault(parts[1], [])
        if len(parts) == 3 and parts[2]:
            excl.append(parts[2])
    return StatusRules(
        **{
            flag.lower(): [StatusRule(root, tuple(ex)) for root, ex in roots.items()]
            for flag, roots in table.items()
        }
    )


def _valid_code(code: str) -> bool:
    return bool(code) and all(code.split("."))


def in_subtree(code: str, root: str) -> bool:
    """True when ``code`` is ``root`` or one of its dot-separated descendants."""
    return code == root or code.startswith(root + ".")


def _flag(codes: Iterable[str], rules: list[StatusRule]) -> bool:
    for code in codes:
        for rule in rules:
            if in_subtree(code, rule.root) and not any(in_subtree(code, ex) for ex in rule.excludes):
                return True
    return False


def translational_status(
    keyword_codes: Iterable[str],
    rules: StatusRules | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> TranslationalStatus:
    rules = rules or _DEFAULT_RULES
    valid = []
    for code in keyword_codes:
        if _valid_code(code):
            valid.append(code)
        elif diagnostics is not None:
            diagnostics.append(Diagnostic("<mesh>", None, f"malformed tree code {code!r} ignored"))
    return TranslationalStatus(h=_flag(valid, rules.h), a=_flag(valid, rules.a), c=_flag(valid, rules.c))


_DEFAULT_RULES = StatusRules.default()


# --------------------------------------------------------------------------
# journals and research-area groups


class AreaGroup(str, enum.Enum):
    APPLIED = "Applied"
    BASIC_SCIENCE = "BasicScience"
    OTHER = "Other"

    @classmethod
    def parse(cls, label: str) -> AreaGroup:
        key = "".join(ch for ch in label.lower() if ch.isalpha())
        for g in cls:
            if key.startswith(g.value.lower()):
                return g
        raise ValueError(f"unknown research area group {label!r}")


JournalTable = dict[str, tuple[str, ...]]


def load_journals(path: str | Path) -> JournalTable:
    table: dict[str, list[str]] = {}
    for lineno, line in _lines(path):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ValidationError(f"{path}:{lineno}: expected JOURNAL_ID<TAB>RESEARCH_AREA")
        areas = table.setdefault(parts[0].strip(), [])
        if parts[1].strip() not in areas:
            areas.append(parts[1].strip())
    return {j: tuple(a) for j, a in table.items()}


def all_research_areas(journals: JournalTable) -> list[str]:
    return list(dict.fromkeys(a for areas in journals.values() for a in areas))


@dataclass
class AreaStatusAccumulator:
    """Per-area (sum H, sum A, sum C, count); merges associatively."""

    sums: dict[str, list[int]] = field(default_factory=dict)

    def add(self, status: TranslationalStatus, areas: Iterable[str]) -> None:
        for area in areas:
            acc = self.sums.setdefault(area, [0, 0, 0, 0])
            acc[0] += status.h
            acc[1] += status.a
            acc[2] += status.c
            acc[3] += 1

    def merge(self, other: AreaStatusAccumulator) -> AreaStatusAccumulator:
        out = AreaStatusAccumulator({k: list(v) for k, v in self.sums.items()})
        for area, (h, a, c, n) in other.sums.items():
            acc = out.sums.setdefault(area, [0, 0, 0, 0])
            acc[0] += h
            acc[1] += a
            acc[2] += c
            acc[3] += n
        return out

    def averages(self) -> dict[str, tuple[float, float, float, int]]:
        return {k: (h / n, a / n, c / n, n) for k, (h, a, c, n) in self.sums.items() if n}

    def classify(self, areas: Iterable[str] = ()) -> dict[str, AreaGroup]:
        avgs = self.averages()
        out = {area: AreaGroup.OTHER for area in areas}
        for area, (h, a, c, _) in avgs.items():
            out[area] = classify_area(h, a, c)
        return out


def classify_area(avg_h: float, avg_a: float, avg_c: float) -> AreaGroup:
    if avg_h > avg_c and avg_h > 0.2:
        return AreaGroup.APPLIED
    if avg_h < avg_c and avg_a < 0.8 and avg_c > 0.5:
        return AreaGroup.BASIC_SCIENCE
    return AreaGroup.OTHER


def classify_research_area_groups(
    papers: Iterable[tuple[Publication, TranslationalStatus]],
    journals: JournalTable,
) -> dict[str, AreaGroup]:
    """Assign every research area to Applied, BasicScience or Other.

    Each paper counts toward every area its journal links to; areas with
    no linked papers are Other.
    """
    acc = AreaStatusAccumulator()
    for pub, status in papers:
        acc.add(status, journals.get(pub.journal_id, ()))
    return acc.classify(all_research_areas(journals))


def write_area_groups(path: str | Path, groups: dict[str, AreaGroup], acc: AreaStatusAccumulator | None = None) -> None:
    avgs = acc.averages() if acc is not None else {}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["research_area", "papers", "research_area_group"])
        for area, g in groups.items():
            w.writerow([area, avgs.get(area, (0, 0, 0, 0))[3], g.value])
