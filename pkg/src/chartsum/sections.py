"""Chart-note segmentation: header recognition, alias normalization, reassembly."""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Union

from .errors import ChartsumError


class Section(Enum):
    CC = "CC"
    HPI = "HPI"
    ROS = "ROS"
    MEDICATIONS = "MEDICATIONS"
    ALLERGIES = "ALLERGIES"
    PE = "PE"
    RESULTS = "RESULTS"
    ASSESSMENT = "ASSESSMENT"
    PLAN = "PLAN"
    ASSESSMENT_AND_PLAN = "ASSESSMENT_AND_PLAN"


@dataclass(frozen=True)
class UnknownSection:
    """Header line that matched the shape rule but no alias; keeps the verbatim text."""

    raw: str


SectionId = Union[Section, UnknownSection]

# Display headers emitted by assemble_note(style="canonical_headers"); each one
# must resolve back to its Section through the default alias table.
CANONICAL_HEADERS: dict[Section, str] = {
    Section.CC: "CHIEF COMPLAINT",
    Section.HPI: "HISTORY OF PRESENT ILLNESS",
    Section.ROS: "REVIEW OF SYSTEMS",
    Section.MEDICATIONS: "MEDICATIONS",
    Section.ALLERGIES: "ALLERGIES",
    Section.PE: "PHYSICAL EXAM",
    Section.RESULTS: "RESULTS",
    Section.ASSESSMENT: "ASSESSMENT",
    Section.PLAN: "PLAN",
    Section.ASSESSMENT_AND_PLAN: "ASSESSMENT AND PLAN",
}

SECTION_ORDER: tuple[Section, ...] = (
    Section.CC,
    Section.HPI,
    Section.ROS,
    Section.MEDICATIONS,
    Section.ALLERGIES,
    Section.PE,
    Section.RESULTS,
    Section.ASSESSMENT,
    Section.PLAN,
    Section.ASSESSMENT_AND_PLAN,
)


class Division(Enum):
    SUBJECTIVE = "Subjective"
    EXAM = "Exam"
    RESULTS = "Results"
    ASSESSMENT_AND_PLAN = "AssessmentAndPlan"


_DIVISION_OF: dict[Section, Division] = {
    Section.CC: Division.SUBJECTIVE,
    Section.HPI: Division.SUBJECTIVE,
    Section.ROS: Division.SUBJECTIVE,
    Section.MEDICATIONS: Division.SUBJECTIVE,
    Section.ALLERGIES: Division.SUBJECTIVE,
    Section.PE: Division.EXAM,
    Section.RESULTS: Division.RESULTS,
    Section.ASSESSMENT: Division.ASSESSMENT_AND_PLAN,
    Section.PLAN: Division.ASSESSMENT_AND_PLAN,
    Section.ASSESSMENT_AND_PLAN: Division.ASSESSMENT_AND_PLAN,
}


class SectionError(ChartsumError):
    pass


class UnmappedSection(SectionError):
    def __init__(self, section: SectionId):
        super().__init__(f"no division for section {section!r}")
        self.section = section


class AliasTableError(SectionError):
    pass


@dataclass(frozen=True)
class NoteSection:
    """One segmented section: its id, trimmed body, and the source header line."""

    id: SectionId
    body: str
    header: str | None = None


@dataclass(frozen=True)
class ChartNote:
    sections: tuple[NoteSection, ...] = ()
    preamble: str = ""

    def bodies(self) -> dict[SectionId, str]:
        """First body per id, for notes without duplicate sections."""
        out: dict[SectionId, str] = {}
        for sec in self.sections:
            out.setdefault(sec.id, sec.body)
        return out


def canonical_key(raw: str) -> str:
    """Trim, strip edge punctuation, collapse inner whitespace, uppercase."""
    stripped = raw.strip().strip(string.punctuation + string.whitespace)
    return " ".join(stripped.split()).upper()


def load_alias_table(path: str | Path) -> dict[str, Section]:
    """Parse an "alias -> SECTION" file into a canonical-key lookup table."""
    table: dict[str, Section] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_num, line in enumerate(text.splitlines(), start=1):
        entry = line.strip()
        if not entry or entry.startswith("#"):
            continue
        alias, sep, target = entry.partition("->")
        if not sep:
            raise AliasTableError(f"line {line_num}: expected 'alias -> SECTION', got {entry!r}")
        key = canonical_key(alias)
        if not key:
            raise AliasTableError(f"line {line_num}: empty alias")
        try:
            section = Section[target.strip()]
        except KeyError:
            raise AliasTableError(f"line {line_num}: unknown section {target.strip()!r}") from None
        if key in table and table[key] is not section:
            raise AliasTableError(
                f"line {line_num}: alias {key!r} maps to both {table[key].value} and {section.value}"
            )
        table[key] = section
    return table


def default_alias_table() -> dict[str, Section]:
    with resources.as_file(resources.files("chartsum.data") / "section_aliases.txt") as path:
        return load_alias_table(path)


_DEFAULT_ALIASES: dict[str, Section] | None = None


def _aliases(aliases: Mapping[str, Section] | None) -> Mapping[str, Section]:
    global _DEFAULT_ALIASES
    if aliases is not None:
        return aliases
    if _DEFAULT_ALIASES is None:
        _DEFAULT_ALIASES = default_alias_table()
    return _DEFAULT_ALIASES


def normalize_header(raw: str, aliases: Mapping[str, Section] | None = None) -> SectionId:
    """Resolve a header string to a Section via canonical-key lookup; miss → UnknownSection."""
    section = _aliases(aliases).get(canonical_key(raw))
    return section if section is not None else UnknownSection(raw)


def is_header_line(line: str, aliases: Mapping[str, Section] | None = None) -> bool:
    """True iff the line's canonical form is an alias key or the line fits the header shape.

    Shape rule: at most 6 words, at least one uppercase letter, no lowercase
    letters, optionally terminated by a colon.
    """
    text = line.strip()
    if not text:
        return False
    if canonical_key(text) in _aliases(aliases):
        return True
    if text.endswith(":"):
        text = text[:-1].rstrip()
    if not text or len(text.split()) > 6:
        return False
    return any(ch.isupper() for ch in text) and not any(ch.islower() for ch in text)


def _trim_blank_edges(lines: list[str]) -> list[str]:
    start, end = 0, len(lines)
    while start < end and not lines[start].strip():
        start += 1
    while end > start and not lines[end - 1].strip():
        end -= 1
    return lines[start:end]


def segment_note(text: str, aliases: Mapping[str, Section] | None = None) -> ChartNote:
    """Split note text into (section, body) runs; text before the first header is preamble."""
    table = _aliases(aliases)
    preamble_lines: list[str] = []
    sections: list[NoteSection] = []
    current_header: str | None = None
    current_body: list[str] = []

    def flush() -> None:
        if current_header is None:
            return
        body = "\n".join(_trim_blank_edges(current_body))
        sections.append(
            NoteSection(id=normalize_header(current_header, table), body=body, header=current_header)
        )

    for line in text.splitlines():
        if is_header_line(line, table):
            flush()
            current_header = line.strip()
            current_body = []
        elif current_header is None:
            preamble_lines.append(line)
        else:
            current_body.append(line)
    flush()
    preamble = "\n".join(_trim_blank_edges(preamble_lines))
    return ChartNote(sections=tuple(sections), preamble=preamble)


def canonical_header(section: SectionId) -> str:
    return section.raw if isinstance(section, UnknownSection) else CANONICAL_HEADERS[section]


def _order_key(section: NoteSection) -> int:
    if isinstance(section.id, UnknownSection):
        return len(SECTION_ORDER)
    return SECTION_ORDER.index(section.id)


def assemble_note(
    note: ChartNote, style: str = "canonical_headers", reorder: bool = False
) -> str:
    """Render sections as header / blank line / body / blank line blocks.

    With `reorder`, known sections are emitted in canonical order and unknown
    ones last, preserving relative source order within ties.
    """
    if style not in ("canonical_headers", "verbatim_headers"):
        raise ValueError(f"unknown assembly style {style!r}")
    ordered: Iterable[NoteSection] = note.sections
    if reorder:
        ordered = sorted(note.sections, key=_order_key)
    parts: list[str] = []
    if note.preamble:
        parts.extend([note.preamble, ""])
    for sec in ordered:
        if style == "verbatim_headers" and sec.header is not None:
            header = sec.header
        else:
            header = canonical_header(sec.id)
        parts.extend([header, "", sec.body, ""])
    return "\n".join(parts)


def division_of(section: SectionId) -> Division:
    """Map a known section to its scoring division; UnknownSection has none."""
    if isinstance(section, UnknownSection):
        raise UnmappedSection(section)
    return _DIVISION_OF[section]
