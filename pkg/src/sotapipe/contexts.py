"""Build the three context renderings of a segmented paper.

DocTAET: title + abstract + experimental-setup sections + all table text.
DocREC:  results / experiments / conclusions section bodies (plus tables
         inside those sections).
DocFULL: title + abstract + every section body + all table text.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import UnknownFamily
from .texparse import SegmentedDoc, Segment, TableText

log = logging.getLogger(__name__)

REC_FAMILIES = ("results", "experiments", "conclusions")
TAET_FAMILY = "experimental_setup"


class ContextKind(str, Enum):
    DOC_TAET = "DocTAET"
    DOC_REC = "DocREC"
    DOC_FULL = "DocFULL"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


ALL_KINDS = (ContextKind.DOC_TAET, ContextKind.DOC_REC, ContextKind.DOC_FULL)


@dataclass(frozen=True)
class ContextDoc:
    paper_id: str
    kind: ContextKind
    text: str
    word_count: int
    matched_headings: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "kind": self.kind.value,
            "text": self.text,
            "word_count": self.word_count,
            "matched_headings": list(self.matched_headings),
        }


# ---------------------------------------------------------------------------
# heading matching
# ---------------------------------------------------------------------------

def load_families(path: str | Path | None = None) -> dict[str, list[str]]:
    """Load the family -> heading-stem configuration (package default or override)."""
    if path is None:
        data = resources.files("sotapipe.data").joinpath("section_families.toml").read_bytes()
    else:
        data = Path(path).read_bytes()
    doc = tomllib.loads(data.decode("utf-8"))
    return {name: list(stems) for name, stems in doc["families"].items()}


_DEFAULT_FAMILIES: dict[str, list[str]] | None = None


def default_families() -> dict[str, list[str]]:
    global _DEFAULT_FAMILIES
    if _DEFAULT_FAMILIES is None:
        _DEFAULT_FAMILIES = load_families()
    return _DEFAULT_FAMILIES


_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def _singular(token: str) -> str:
    if len(token) > 3 and token.endswith("s"):
        return token[:-1]
    return token


def _heading_tokens(heading: str) -> list[str]:
    # case-fold, strip leading numbering/punctuation ("5.", "IV)", "§2 ")
    h = re.sub(r"^[\W\d]+", "", heading.casefold().strip())
    return [_singular(t) for t in _WORD_RE.findall(h)]


def match_heading(heading: str, family: str, families: dict[str, list[str]] | None = None) -> bool:
    """Does a section heading belong to the given family?

    A stem matches when its words occur contiguously in the heading, ignoring
    case, leading numbering and a trailing "s" on each word.
    """
    fams = families if families is not None else default_families()
    if family not in fams:
        raise UnknownFamily(f"unknown section family '{family}'")
    tokens = _heading_tokens(heading)
    if not tokens:
        return False
    for stem in fams[family]:
        stem_tokens = [_singular(t) for t in _WORD_RE.findall(stem.casefold())]
        if not stem_tokens or len(stem_tokens) > len(tokens):
            continue
        for i in range(len(tokens) - len(stem_tokens) + 1):
            if tokens[i : i + len(stem_tokens)] == stem_tokens:
                return True
    return False


def _select_subtrees(sections: tuple[Segment, ...], matched: set[int]) -> list[int]:
    """Expand matched segment indices to their nested subsections, in order."""
    included: list[int] = []
    i = 0
    n = len(sections)
    while i < n:
        if i in matched:
            depth = sections[i].depth
            included.append(i)
            j = i + 1
            while j < n and sections[j].depth > depth:
                included.append(j)
                j += 1
            i = j
        else:
            i += 1
    return included


def _table_text(t: TableText) -> str:
    if t.caption and t.cells:
        return t.caption + "\n" + t.cells
    return t.caption or t.cells


# ---------------------------------------------------------------------------
# context construction
# ---------------------------------------------------------------------------

def build_context(
    doc: SegmentedDoc,
    kind: ContextKind,
    families: dict[str, list[str]] | None = None,
) -> ContextDoc:
    """Render one context kind for a paper.

    An empty selection is flagged with a warning and returned as an empty
    context, never raised.
    """
    kind = ContextKind(kind)
    sections = doc.sections
    parts: list[str] = []
    headings: list[str] = []

    if kind is ContextKind.DOC_FULL:
        parts = [doc.title, doc.abstract]
        parts += [s.body for s in sections]
        parts += [_table_text(t) for t in doc.tables]
        headings = [s.heading for s in sections]
    elif kind is ContextKind.DOC_TAET:
        matched = {
            i for i, s in enumerate(sections) if match_heading(s.heading, TAET_FAMILY, families)
        }
        included = _select_subtrees(sections, matched)
        parts = [doc.title, doc.abstract]
        parts += [sections[i].body for i in included]
        parts += [_table_text(t) for t in doc.tables]
        headings = [sections[i].heading for i in included]
    else:  # DocREC
        matched = {
            i
            for i, s in enumerate(sections)
            if any(match_heading(s.heading, fam, families) for fam in REC_FAMILIES)
        }
        included = _select_subtrees(sections, matched)
        included_set = set(included)
        tables_by_section: dict[int, list[TableText]] = {}
        for t in doc.tables:
            tables_by_section.setdefault(t.section_index, []).append(t)
        for i in included:
            parts.append(sections[i].body)
            for t in tables_by_section.get(i, ()):
                parts.append(_table_text(t))
        headings = [sections[i].heading for i in included]

    text = "\n\n".join(p for p in parts if p)
    if not text:
        log.warning("empty %s context for paper %s", kind.value, doc.paper_id)
    return ContextDoc(
        paper_id=doc.paper_id,
        kind=kind,
        text=text,
        word_count=len(text.split()),
        matched_headings=tuple(headings),
    )


def build_all_contexts(
    doc: SegmentedDoc, families: dict[str, list[str]] | None = None
) -> dict[ContextKind, ContextDoc]:
    return {kind: build_context(doc, kind, families) for kind in ALL_KINDS}
