"""LaTeX ingestion: include resolution, markup stripping, section segmentation.

The converter covers a documented subset of LaTeX (inclusion, comments,
sectioning, common inline formatting, table/figure/math/abstract
environments). Unknown control sequences are dropped and their brace-argument
text is kept, so unexpected markup degrades to extra words instead of crashes.
Math content is replaced by a single ``[MATH]`` token to keep word counts
stable around equations.
"""

from __future__ import annotations

import posixpath
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import (
    AmbiguousRoot,
    EmptyDocument,
    InclusionCycle,
    MissingInclude,
    NoDocumentBody,
)

MATH_TOKEN = "[MATH]"
FRONT_MATTER_HEADING = "(front matter)"
UNNAMED_HEADING = "(unnamed section)"


@dataclass(frozen=True)
class TexSource:
    """A paper's raw LaTeX tree: a root file plus every reachable file."""

    paper_id: str
    root_file: str
    files: Mapping[str, str]


@dataclass(frozen=True)
class Segment:
    heading: str
    depth: int  # 1 = \section, 2 = \subsection, 3 = \subsubsection
    body: str


@dataclass(frozen=True)
class TableText:
    caption: str
    cells: str
    section_index: int = -1  # index into SegmentedDoc.sections; -1 = before any section


@dataclass(frozen=True)
class SegmentedDoc:
    """A paper reduced to ordered plain-text segments plus table text."""

    paper_id: str
    title: str
    abstract: str
    sections: tuple[Segment, ...]
    tables: tuple[TableText, ...]
    word_count: int

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "title": self.title,
            "abstract": self.abstract,
            "sections": [
                {"heading": s.heading, "depth": s.depth, "body": s.body} for s in self.sections
            ],
            "tables": [
                {"caption": t.caption, "cells": t.cells, "section_index": t.section_index}
                for t in self.tables
            ],
            "word_count": self.word_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentedDoc":
        return cls(
            paper_id=d["paper_id"],
            title=d["title"],
            abstract=d["abstract"],
            sections=tuple(Segment(s["heading"], s["depth"], s["body"]) for s in d["sections"]),
            tables=tuple(
                TableText(t["caption"], t["cells"], t.get("section_index", -1))
                for t in d["tables"]
            ),
            word_count=d["word_count"],
        )


# ---------------------------------------------------------------------------
# low-level scanning helpers
# ---------------------------------------------------------------------------

def _is_escaped(text: str, i: int) -> bool:
    """True when text[i] is preceded by an odd number of backslashes."""
    n = 0
    j = i - 1
    while j >= 0 and text[j] == "\\":
        n += 1
        j -= 1
    return n % 2 == 1


def strip_comments(text: str) -> str:
    """Remove unescaped ``%`` comments up to (not including) the newline."""
    out = []
    for line in text.split("\n"):
        cut = None
        start = 0
        while True:
            j = line.find("%", start)
            if j == -1:
                break
            if not _is_escaped(line, j):
                cut = j
                break
            start = j + 1
        out.append(line if cut is None else line[:cut])
    return "\n".join(out)


def _read_group(text: str, i: int) -> tuple[str, int]:
    """Read a balanced ``{...}`` group with text[i] == '{'; returns (content, end)."""
    depth = 0
    j = i
    n = len(text)
    while j < n:
        c = text[j]
        if c == "\\":
            j += 2
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[i + 1 : j], j + 1
        j += 1
    return text[i + 1 :], n  # unbalanced input: take everything


def _skip_ws(text: str, i: int) -> int:
    n = len(text)
    while i < n and text[i] in " \t\r\n":
        i += 1
    return i


def _read_bracket(text: str, i: int) -> tuple[str | None, int]:
    """Read an optional ``[...]`` group at i (brace-aware); (None, i) if absent."""
    if i >= len(text) or text[i] != "[":
        return None, i
    depth = 0
    j = i
    n = len(text)
    while j < n:
        c = text[j]
        if c == "\\":
            j += 2
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
        elif c == "]" and depth == 0:
            return text[i + 1 : j], j + 1
        j += 1
    return text[i + 1 :], n


def _read_paren(text: str, i: int) -> tuple[str | None, int]:
    """Read an optional ``(...)`` group at i; used by rule commands like cmidrule."""
    if i >= len(text) or text[i] != "(":
        return None, i
    j = text.find(")", i + 1)
    if j == -1:
        return text[i + 1 :], len(text)
    return text[i + 1 : j], j + 1


def _find_env(text: str, names: tuple[str, ...], start: int = 0) -> tuple[str, int, int, int, int] | None:
    """Locate the first environment with a name in `names`.

    Returns (name, begin_start, inner_start, inner_end, end_end) or None.
    Matching is depth-aware for same-name nesting.
    """
    pat = re.compile(r"\\(begin|end)\s*\{(" + "|".join(re.escape(n) for n in names) + r")\}")
    m = pat.search(text, start)
    if m is None or m.group(1) != "begin":
        return None
    name = m.group(2)
    depth = 1
    pos = m.end()
    same = re.compile(r"\\(begin|end)\s*\{" + re.escape(name) + r"\}")
    while True:
        m2 = same.search(text, pos)
        if m2 is None:
            # unbalanced: treat rest of text as the environment body
            return name, m.start(), m.end(), len(text), len(text)
        depth += 1 if m2.group(1) == "begin" else -1
        if depth == 0:
            return name, m.start(), m.end(), m2.start(), m2.end()
        pos = m2.end()


def _find_command_arg(text: str, name: str) -> str | None:
    """Return the brace argument of the first ``\\name{...}`` occurrence."""
    m = re.search(r"\\" + re.escape(name) + r"\s*(\[[^\]]*\]\s*)?\{", text)
    if m is None:
        return None
    arg, _ = _read_group(text, m.end() - 1)
    return arg


# ---------------------------------------------------------------------------
# include resolution
# ---------------------------------------------------------------------------

_INCLUDE_RE = re.compile(r"\\(?:input|include)\s*\{")


def _resolve_target(files: Mapping[str, str], arg: str, from_file: str) -> str | None:
    arg = arg.strip()
    base = posixpath.dirname(from_file)
    candidates = []
    for raw in (arg, arg + ".tex"):
        candidates.append(posixpath.normpath(raw))
        if base:
            candidates.append(posixpath.normpath(posixpath.join(base, raw)))
    for cand in candidates:
        if cand in files:
            return cand
    return None


def _flatten_file(src: TexSource, rel_path: str, stack: tuple[str, ...]) -> str:
    if rel_path in stack:
        chain = " -> ".join(stack + (rel_path,))
        raise InclusionCycle(f"{src.paper_id}: inclusion cycle {chain}")
    text = src.files[rel_path]
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "%" and not _is_escaped(text, i):
            j = text.find("\n", i)
            j = n if j == -1 else j
            out.append(text[i:j])
            i = j
            continue
        if c == "\\":
            m = _INCLUDE_RE.match(text, i)
            if m:
                arg, after = _read_group(text, m.end() - 1)
                target = _resolve_target(src.files, arg, rel_path)
                if target is None:
                    raise MissingInclude(
                        f"{src.paper_id}: {rel_path} includes missing file '{arg.strip()}'"
                    )
                out.append(_flatten_file(src, target, stack + (rel_path,)))
                i = after
                continue
            out.append(text[i : i + 2])
            i += 2
            continue
        out.append(c)
        i += 1
    return "".join(out)


def resolve_includes(src: TexSource) -> TexSource:
    """Inline every ``\\input``/``\\include`` reachable from the root file.

    The returned source holds a single flattened root; files without
    directives come back byte-identical.
    """
    if src.root_file not in src.files:
        raise MissingInclude(f"{src.paper_id}: root file '{src.root_file}' not in source tree")
    flattened = _flatten_file(src, src.root_file, ())
    return TexSource(src.paper_id, src.root_file, {src.root_file: flattened})


def load_paper_dir(paper_dir: str | Path, paper_id: str | None = None) -> TexSource:
    """Build a TexSource from a per-paper directory of ``.tex`` files.

    The root is the unique file whose (comment-stripped) text begins a
    document environment. Undecodable bytes are replaced, never fatal.
    """
    paper_dir = Path(paper_dir)
    pid = paper_id or paper_dir.name
    files: dict[str, str] = {}
    for p in sorted(paper_dir.rglob("*.tex")):
        rel = p.relative_to(paper_dir).as_posix()
        files[rel] = p.read_bytes().decode("utf-8", errors="replace")
    if not files:
        raise NoDocumentBody(f"{pid}: no .tex files under {paper_dir}")
    roots = [
        rel
        for rel, text in files.items()
        if re.search(r"\\begin\s*\{document\}", strip_comments(text))
    ]
    if not roots:
        raise NoDocumentBody(f"{pid}: no file contains a document environment")
    if len(roots) > 1:
        raise AmbiguousRoot(f"{pid}: multiple document roots: {', '.join(sorted(roots))}")
    return TexSource(pid, roots[0], files)


# ---------------------------------------------------------------------------
# inline cleaner
# ---------------------------------------------------------------------------

# commands whose n-th mandatory argument is kept as text (others dropped)
_KEEP_ARG: dict[str, tuple[str, int]] = {
    "textbf": ("A", 1), "textit": ("A", 1), "textsc": ("A", 1), "texttt": ("A", 1),
    "textrm": ("A", 1), "textsf": ("A", 1), "textsl": ("A", 1), "textup": ("A", 1),
    "textnormal": ("A", 1), "textmd": ("A", 1), "emph": ("A", 1), "underline": ("A", 1),
    "uline": ("A", 1), "mbox": ("A", 1), "fbox": ("A", 1), "text": ("A", 1),
    "textsuperscript": ("A", 1), "textsubscript": ("A", 1), "caption": ("OA", 1),
    "captionof": ("AA", 2), "footnote": ("OA", 1), "footnotetext": ("OA", 1),
    "paragraph": ("A", 1), "subparagraph": ("A", 1), "centerline": ("A", 1),
    "uppercase": ("A", 1), "lowercase": ("A", 1), "MakeUppercase": ("A", 1),
    "MakeLowercase": ("A", 1), "textcolor": ("AA", 2), "colorbox": ("AA", 2),
    "fcolorbox": ("AAA", 3), "href": ("AA", 2), "hyperref": ("OA", 1),
    "texorpdfstring": ("AA", 1), "multicolumn": ("AAA", 3), "multirow": ("AAA", 3),
    "resizebox": ("AAA", 3), "scalebox": ("OAA" , 2), "rotatebox": ("OAA", 2),
    "parbox": ("OOOAA", 2), "makebox": ("OOA", 1), "framebox": ("OOA", 1),
    "raisebox": ("AOOA", 2), "stackbox": ("OA", 1), "adjustbox": ("AA", 2),
}

# commands dropped together with all their arguments
_DROP_ARGS: dict[str, str] = {
    "cite": "OOA", "citep": "OOA", "citet": "OOA", "citealt": "OOA", "citealp": "OOA",
    "citeauthor": "OA", "citeyear": "OA", "parencite": "OOA", "textcite": "OOA",
    "ref": "A", "eqref": "A", "autoref": "A", "cref": "A", "Cref": "A", "pageref": "A",
    "label": "A", "vspace": "A", "hspace": "A", "vskip": "", "includegraphics": "OA",
    "graphicspath": "A", "url": "A", "bibliography": "A", "bibliographystyle": "A",
    "setcounter": "AA", "addtocounter": "AA", "numberwithin": "AA", "setlength": "AA",
    "addtolength": "AA", "usepackage": "OA", "documentclass": "OA", "pagestyle": "A",
    "thispagestyle": "A", "footnotemark": "O", "thanks": "A", "inst": "A",
    "orcidID": "A", "email": "A", "institute": "A", "author": "OA", "title": "OA",
    "date": "A", "keywords": "A", "titlerunning": "A", "authorrunning": "A",
    "newcommand": "AOOA", "renewcommand": "AOOA", "providecommand": "AOOA",
    "newenvironment": "AOAA", "renewenvironment": "AOAA", "newtheorem": "AOAO",
    "theoremstyle": "A", "definecolor": "AAA", "cline": "A", "cmidrule": "OPA",
    "specialrule": "AAA", "hhline": "A", "arrayrulecolor": "A", "rowcolor": "A",
    "cellcolor": "A", "columncolor": "A", "rule": "OAA", "hyphenation": "A",
    "linenumbers": "", "item": "O", "looseness": "", "enlargethispage": "A",
    "phantom": "A", "hphantom": "A", "vphantom": "A", "input": "A", "include": "A",
    "bstctlcite": "A", "IEEEtriggeratref": "A", "acknowledgments": "",
}

# commands with no arguments: dropped (value = replacement text)
_NO_ARG: dict[str, str] = {
    "maketitle": "", "centering": "", "raggedright": "", "raggedleft": "",
    "noindent": "", "indent": "", "newpage": "", "clearpage": "", "cleardoublepage": "",
    "pagebreak": "", "nopagebreak": "", "linebreak": "", "newline": " ", "nolinebreak": "",
    "smallskip": "", "medskip": "", "bigskip": "", "vfill": "", "hfill": " ",
    "dotfill": " ", "appendix": "", "tableofcontents": "", "listoffigures": "",
    "listoftables": "", "printbibliography": "", "hline": " ", "midrule": " ",
    "toprule": " ", "bottomrule": " ", "endfirsthead": " ", "endhead": " ",
    "endfoot": " ", "endlastfoot": " ", "protect": "", "relax": "", "ignorespaces": "",
    "frontmatter": "", "mainmatter": "", "backmatter": "", "sloppy": "", "fussy": "",
    "flushbottom": "", "boldmath": "", "unboldmath": "", "itshape": "", "bfseries": "",
    "scshape": "", "ttfamily": "", "rmfamily": "", "sffamily": "", "upshape": "",
    "mdseries": "", "normalfont": "", "em": "", "bf": "", "it": "", "tt": "", "sc": "",
    "sl": "", "rm": "", "sf": "", "small": "", "footnotesize": "", "scriptsize": "",
    "tiny": "", "normalsize": "", "large": "", "Large": "", "LARGE": "", "huge": "",
    "Huge": "", "and": " ", "quad": " ", "qquad": " ", "par": "\n", "dots": "...",
    "ldots": "...", "etc": "etc.", "lastpage": "", "balance": "", "IEEEpeerreviewmaketitle": "",
    "qed": "", "hrule": " ", "vrule": " ", "strut": "", "null": "", "break": " ",
}

# environments whose entire content is discarded
_DROP_ENVS = (
    "tikzpicture", "verbatim", "lstlisting", "algorithm", "algorithmic",
    "algorithm2e", "thebibliography", "filecontents", "comment", "minted",
)

# environments replaced by the math placeholder token
_MATH_ENVS = (
    "equation", "equation*", "align", "align*", "alignat", "alignat*",
    "eqnarray", "eqnarray*", "gather", "gather*", "multline", "multline*",
    "flalign", "flalign*", "displaymath", "math", "split", "cases",
)

# figure-like environments: only caption text survives
_FIGURE_ENVS = ("figure", "figure*", "wrapfigure", "sidewaysfigure", "subfigure")

# transparent environments: markers and their immediate arguments are dropped,
# content is kept (value = argument spec consumed after \begin{...})
_UNWRAP_ENVS: dict[str, str] = {
    "center": "", "flushleft": "", "flushright": "", "quote": "", "quotation": "",
    "itemize": "O", "enumerate": "O", "description": "O", "sloppypar": "",
    "minipage": "OOOA", "adjustbox": "A", "threeparttable": "O", "tablenotes": "O",
    "spacing": "A", "adjustwidth": "AA", "abstract": "", "document": "",
    "table": "O", "table*": "O", "sidewaystable": "O", "tabular": "OA",
    "tabular*": "OAA", "array": "OA", "longtable": "OA", "footnotesize": "",
    "small": "", "frontmatter": "", "appendices": "", "CJK": "AA", "spverbatim": "",
}

_ESCAPES = {"%": "%", "&": "&", "#": "#", "_": "_", "$": "$", "{": "{", "}": "}"}
_CHAR_COMMANDS = {",": " ", ";": " ", ":": " ", "!": " ", "/": "", "-": "", "@": "", " ": " ", "\n": " ", "\t": " "}


def _consume_args(text: str, i: int, spec: str) -> tuple[list[str], int]:
    """Consume arguments per spec (A=brace, O=optional bracket, P=optional paren).

    Returns the list of mandatory (A) argument contents and the next index.
    """
    a_args: list[str] = []
    for kind in spec:
        if kind == "A":
            j = _skip_ws(text, i)
            if j < len(text) and text[j] == "{":
                arg, i = _read_group(text, j)
                a_args.append(arg)
            else:
                break  # malformed: stop consuming
        elif kind == "O":
            j = _skip_ws(text, i)
            opt, k = _read_bracket(text, j)
            if opt is not None:
                i = k
        elif kind == "P":
            opt, k = _read_paren(text, i)
            if opt is not None:
                i = k
    return a_args, i


class _Cleaner:
    """Recursive single-pass LaTeX-to-text reducer."""

    def __init__(self, table_cells: bool = False):
        self.table_cells = table_cells

    def clean(self, text: str) -> str:
        out: list[str] = []
        self._emit(text, out)
        collapsed = re.sub(r"[ \t\r\f]+", " ", "".join(out))
        collapsed = re.sub(r"\s*\n\s*", " ", collapsed)
        return collapsed.strip()

    # -- main scanner ------------------------------------------------------

    def _emit(self, text: str, out: list[str]) -> None:
        i = 0
        n = len(text)
        while i < n:
            c = text[i]
            if c == "\\":
                i = self._command(text, i, out)
            elif c == "$":
                i = self._dollar_math(text, i, out)
            elif c == "~":
                out.append(" ")
                i += 1
            elif c in "{}":
                i += 1
            elif c in "&|" and self.table_cells:
                out.append(" ")
                i += 1
            else:
                out.append(c)
                i += 1
        return

    # -- math --------------------------------------------------------------

    def _dollar_math(self, text: str, i: int, out: list[str]) -> int:
        n = len(text)
        if text[i : i + 2] == "$$":
            j = text.find("$$", i + 2)
            end = n if j == -1 else j + 2
        else:
            j = i + 1
            while j < n:
                if text[j] == "$" and not _is_escaped(text, j):
                    break
                j += 1
            end = min(j + 1, n)
        out.append(f" {MATH_TOKEN} ")
        return end

    # -- commands ----------------------------------------------------------

    def _command(self, text: str, i: int, out: list[str]) -> int:
        n = len(text)
        if i + 1 >= n:
            return i + 1
        nxt = text[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            return i + 2
        if nxt == "\\":  # row/line break, may carry [len]
            j = i + 2
            if j < n and text[j] == "*":
                j += 1
            _, j = _read_bracket(text, j)
            out.append(" ")
            return j
        if nxt == "[":  # display math \[ ... \]
            j = text.find("\\]", i + 2)
            out.append(f" {MATH_TOKEN} ")
            return n if j == -1 else j + 2
        if nxt == "(":  # inline math \( ... \)
            j = text.find("\\)", i + 2)
            out.append(f" {MATH_TOKEN} ")
            return n if j == -1 else j + 2
        if not nxt.isalpha():
            repl = _CHAR_COMMANDS.get(nxt, "")
            out.append(repl)
            j = i + 2
            # accent commands may wrap their letter: \'{e} -> e
            if j < n and text[j] == "{" and nxt in "'`^\"~=.uvHtcdbr":
                arg, j = _read_group(text, j)
                out.append(self._sub(arg))
            return j
        m = re.match(r"[a-zA-Z]+\*?", text[i + 1 :])
        name = m.group(0)
        j = i + 1 + len(name)
        bare = name.rstrip("*")

        if bare == "begin":
            return self._environment(text, j, out)
        if bare == "end":
            k = _skip_ws(text, j)
            if k < n and text[k] == "{":
                _, k = _read_group(text, k)
            return k
        if bare == "verb":
            return self._verb(text, j, out)
        if bare == "ensuremath":
            k = _skip_ws(text, j)
            if k < n and text[k] == "{":
                _, k = _read_group(text, k)
            out.append(f" {MATH_TOKEN} ")
            return k

        if bare in _KEEP_ARG:
            spec, keep = _KEEP_ARG[bare]
            args, j = _consume_args(text, j, spec)
            if len(args) >= keep:
                out.append(self._sub(args[keep - 1]))
            elif args:
                out.append(self._sub(args[-1]))
            return j
        if bare in _DROP_ARGS:
            _, j = _consume_args(text, j, _DROP_ARGS[bare])
            return j
        if bare in _NO_ARG:
            out.append(_NO_ARG[bare])
            return j

        # unknown command: drop the command, keep immediately adjacent
        # brace-argument text (no whitespace skipping, to avoid swallowing
        # unrelated groups)
        parts = []
        while j < n and text[j] == "{":
            arg, j = _read_group(text, j)
            parts.append(self._sub(arg))
        if parts:
            out.append(" ".join(p for p in parts if p))
        return j

    def _sub(self, fragment: str) -> str:
        inner: list[str] = []
        self._emit(fragment, inner)
        return "".join(inner)

    def _verb(self, text: str, j: int, out: list[str]) -> int:
        n = len(text)
        if j < n and text[j] == "*":
            j += 1
        if j >= n:
            return j
        delim = text[j]
        k = text.find(delim, j + 1)
        if k == -1:
            return n
        out.append(text[j + 1 : k])
        return k + 1

    # -- environments --------------------------------------------------------

    def _environment(self, text: str, j: int, out: list[str]) -> int:
        n = len(text)
        k = _skip_ws(text, j)
        if k >= n or text[k] != "{":
            return j
        name, k = _read_group(text, k)
        name = name.strip()

        if name in _MATH_ENVS:
            out.append(f" {MATH_TOKEN} ")
            return self._skip_env(text, k, name)
        if name in _DROP_ENVS:
            return self._skip_env(text, k, name)
        if name in _FIGURE_ENVS:
            end = self._skip_env(text, k, name)
            inner = text[k:end]
            for m in re.finditer(r"\\caption\s*(\[[^\]]*\]\s*)?\{", inner):
                arg, _ = _read_group(inner, m.end() - 1)
                out.append(" " + self._sub(arg) + " ")
            return end
        spec = _UNWRAP_ENVS.get(name, "")
        _, k = _consume_args(text, k, spec)
        return k

    def _skip_env(self, text: str, start: int, name: str) -> int:
        depth = 1
        pat = re.compile(r"\\(begin|end)\s*\{" + re.escape(name) + r"\}")
        pos = start
        while True:
            m = pat.search(text, pos)
            if m is None:
                return len(text)
            depth += 1 if m.group(1) == "begin" else -1
            if depth == 0:
                return m.end()
            pos = m.end()


def clean_tex(fragment: str, table_cells: bool = False) -> str:
    """Reduce a LaTeX fragment to plain text (whitespace-collapsed)."""
    return _Cleaner(table_cells=table_cells).clean(fragment)


# ---------------------------------------------------------------------------
# segmentation
# ---------------------------------------------------------------------------

_SECTION_RE = re.compile(r"\\(section|subsection|subsubsection)\*?\s*")
_SECTION_DEPTH = {"section": 1, "subsection": 2, "subsubsection": 3}

_TABLE_ENVS = ("table", "table*", "sidewaystable", "tabular", "tabular*", "longtable")
_CAPTION_RE = re.compile(r"\\caption\*?\s*(\[[^\]]*\])?\s*\{")
_RULE_RE = re.compile(
    r"\\(?:hline|toprule|midrule|bottomrule|cline\{[^}]*\}|cmidrule(?:\([^)]*\))?\{[^}]*\}|specialrule\{[^}]*\}\{[^}]*\}\{[^}]*\})"
)


def _split_sections(body: str) -> list[tuple[str | None, int, str]]:
    """Split the document body on sectioning commands.

    Returns [(heading_raw or None for front matter, depth, chunk_raw)].
    """
    chunks: list[tuple[str | None, int, str]] = []
    pos = 0
    pending: tuple[str | None, int] = (None, 0)
    for m in _SECTION_RE.finditer(body):
        j = m.end()
        # skip optional short-title argument
        _, j = _read_bracket(body, _skip_ws(body, j))
        j = _skip_ws(body, j)
        if j >= len(body) or body[j] != "{":
            continue  # not followed by a heading argument: leave as-is
        heading_raw, after = _read_group(body, j)
        chunks.append((pending[0], pending[1], body[pos : m.start()]))
        pending = (heading_raw, _SECTION_DEPTH[m.group(1)])
        pos = after
    chunks.append((pending[0], pending[1], body[pos:]))
    return chunks


def _extract_tables(chunk: str) -> tuple[str, list[tuple[str, str]]]:
    """Pull table environments out of a chunk.

    Returns (chunk without tables, [(caption, cells), ...] in document order).
    """
    tables: list[tuple[str, str]] = []
    remainder: list[str] = []
    pos = 0
    while True:
        found = _find_env(chunk, _TABLE_ENVS, pos)
        if found is None:
            remainder.append(chunk[pos:])
            break
        name, begin_start, inner_start, inner_end, end_end = found
        remainder.append(chunk[pos:begin_start])
        inner = chunk[inner_start:inner_end]

        cap = _CAPTION_RE.search(inner)
        caption = ""
        if cap is not None:
            caption_raw, _ = _read_group(inner, cap.end() - 1)
            caption = clean_tex(caption_raw)
        cells_src = _CAPTION_RE.sub(r"\\phantom{", inner)
        # _find_env consumed the \begin{...} marker but not its arguments
        # ([h] placement, column specs); reconstruct it so the cleaner strips them
        cells_src = "\\begin{" + name + "}" + cells_src
        cells_src = _RULE_RE.sub(" ", cells_src)
        cells = clean_tex(cells_src, table_cells=True)
        tables.append((caption, cells))
        pos = end_end
    return "".join(remainder), tables


def tex_to_text(src: TexSource) -> SegmentedDoc:
    """Convert an include-resolved TexSource into a SegmentedDoc."""
    raw = src.files[src.root_file]
    text = strip_comments(raw)

    title_raw = _find_command_arg(text, "title")
    title = clean_tex(title_raw) if title_raw else ""

    m = re.search(r"\\begin\s*\{document\}", text)
    if m is None:
        raise NoDocumentBody(f"{src.paper_id}: no document environment")
    m_end = re.search(r"\\end\s*\{document\}", text)
    body = text[m.end() : m_end.start() if m_end else len(text)]

    abstract = ""
    found = _find_env(body, ("abstract",))
    if found is not None:
        _, begin_start, inner_start, inner_end, end_end = found
        abstract = clean_tex(body[inner_start:inner_end])
        body = body[:begin_start] + body[end_end:]

    # drop bibliography blocks entirely
    while True:
        found = _find_env(body, ("thebibliography",))
        if found is None:
            break
        _, begin_start, _, _, end_end = found
        body = body[:begin_start] + body[end_end:]

    segments: list[Segment] = []
    tables: list[TableText] = []
    pending_tables: list[tuple[str, str, bool]] = []  # (caption, cells, from_front)
    for heading_raw, depth, chunk in _split_sections(body):
        chunk_wo_tables, chunk_tables = _extract_tables(chunk)
        body_text = clean_tex(chunk_wo_tables)
        if heading_raw is None:
            if body_text:
                segments.append(Segment(FRONT_MATTER_HEADING, 1, body_text))
                sec_idx = len(segments) - 1
            else:
                sec_idx = -1
        else:
            heading = clean_tex(heading_raw) or UNNAMED_HEADING
            segments.append(Segment(heading, depth, body_text))
            sec_idx = len(segments) - 1
        for caption, cells in chunk_tables:
            if caption or cells:
                tables.append(TableText(caption, cells, sec_idx))

    word_count = _count_words(title, abstract, segments, tables)
    if word_count == 0:
        raise EmptyDocument(f"{src.paper_id}: document yields zero text tokens")
    return SegmentedDoc(
        paper_id=src.paper_id,
        title=title,
        abstract=abstract,
        sections=tuple(segments),
        tables=tuple(tables),
        word_count=word_count,
    )


def _count_words(title: str, abstract: str, segments: list[Segment], tables: list[TableText]) -> int:
    total = len(title.split()) + len(abstract.split())
    total += sum(len(s.body.split()) for s in segments)
    total += sum(len(t.caption.split()) + len(t.cells.split()) for t in tables)
    return total


def ingest_paper(paper_dir: str | Path, paper_id: str | None = None) -> SegmentedDoc:
    """Full per-paper ingestion: load, resolve includes, convert."""
    return tex_to_text(resolve_includes(load_paper_dir(paper_dir, paper_id)))
