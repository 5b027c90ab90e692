from __future__ import annotations

import json

import pytest

from sotapipe.errors import (
    AmbiguousRoot,
    EmptyDocument,
    InclusionCycle,
    MissingInclude,
    NoDocumentBody,
)
from sotapipe.texparse import (
    MATH_TOKEN,
    SegmentedDoc,
    TexSource,
    clean_tex,
    load_paper_dir,
    resolve_includes,
    tex_to_text,
)

from fixture_paths import CORPUS_DIR


def _doc(body: str, title: str = "T", preamble: str = "") -> TexSource:
    text = (
        "\\documentclass{article}\n"
        f"\\title{{{title}}}\n{preamble}"
        "\\begin{document}\n" + body + "\n\\end{document}\n"
    )
    return TexSource("test", "main.tex", {"main.tex": text})


# ---------------------------------------------------------------------------
# resolve_includes
# ---------------------------------------------------------------------------

def test_single_substitution():
    src = TexSource("p", "main.tex", {"main.tex": "A \\input{b}", "b.tex": "B"})
    assert resolve_includes(src).files["main.tex"] == "A B"


def test_no_directives_byte_identical():
    text = "Plain text with \\% escaped percent and a % comment \\input{ghost}\n"
    src = TexSource("p", "main.tex", {"main.tex": text})
    assert resolve_includes(src).files["main.tex"] == text


def test_three_level_chain_matches_manual_flattening():
    # hand-flattened oracle: splice the three fixture files with str.replace
    root = (CORPUS_DIR / "pos03" / "main.tex").read_text()
    body = (CORPUS_DIR / "pos03" / "sec" / "body.tex").read_text()
    results = (CORPUS_DIR / "pos03" / "sec" / "results.tex").read_text()
    expected = root.replace("\\input{sec/body}", body.replace("\\input{sec/results}", results))

    src = load_paper_dir(CORPUS_DIR / "pos03")
    assert resolve_includes(src).files[src.root_file] == expected


def test_missing_include():
    src = TexSource("p", "main.tex", {"main.tex": "\\input{gone}"})
    with pytest.raises(MissingInclude):
        resolve_includes(src)


def test_inclusion_cycle():
    src = TexSource(
        "p", "a.tex", {"a.tex": "\\input{b}", "b.tex": "\\input{a}"}
    )
    with pytest.raises(InclusionCycle):
        resolve_includes(src)


def test_commented_directive_not_resolved():
    src = TexSource("p", "main.tex", {"main.tex": "X % \\input{gone}\nY"})
    assert resolve_includes(src).files["main.tex"] == "X % \\input{gone}\nY"


# ---------------------------------------------------------------------------
# tex_to_text
# ---------------------------------------------------------------------------

def test_section_structure_echo(corpus_docs):
    doc = corpus_docs["pos01"]
    assert [s.heading for s in doc.sections] == [
        "Introduction",
        "Experimental Setup",
        "Results",
        "Conclusion",
    ]


def test_comment_stripping():
    doc = tex_to_text(_doc("% hidden note\nVisible.\n\\section{S}\nBody."))
    text = json.dumps(doc.to_dict())
    assert "Visible." in text
    assert "hidden note" not in text


def test_table_extraction_two_by_two():
    body = (
        "\\section{Data}\nIntro words.\n"
        "\\begin{table}[h]\\caption{Scores}\n"
        "\\begin{tabular}{ll}\na & b \\\\\nc & d \\\\\n\\end{tabular}\\end{table}\n"
        "After words."
    )
    doc = tex_to_text(_doc(body))
    assert len(doc.tables) == 1
    table = doc.tables[0]
    assert table.caption == "Scores"
    assert table.cells.split() == ["a", "b", "c", "d"]
    section = doc.sections[0]
    for cell in "abcd":
        assert cell not in section.body.split()
    assert table.section_index == 0


def test_title_and_abstract_captured():
    src = _doc("\\begin{abstract}Short abstract text.\\end{abstract}\n\\section{S}\nBody.",
               title="My Title")
    doc = tex_to_text(src)
    assert doc.title == "My Title"
    assert doc.abstract == "Short abstract text."


def test_math_becomes_single_token():
    doc = tex_to_text(_doc("\\section{S}\nBefore $x^2 + y$ after \\[ z \\] end."))
    body = doc.sections[0].body
    assert body.count(MATH_TOKEN) == 2
    assert "x^2" not in body


def test_inline_formatting_unwrapped():
    doc = tex_to_text(_doc("\\section{S}\nA \\textbf{bold} and \\emph{fine} word \\cite{k}."))
    assert doc.sections[0].body == "A bold and fine word ."


def test_word_count_invariant(corpus_docs):
    for doc in corpus_docs.values():
        expected = len(doc.title.split()) + len(doc.abstract.split())
        expected += sum(len(s.body.split()) for s in doc.sections)
        expected += sum(len(t.caption.split()) + len(t.cells.split()) for t in doc.tables)
        assert doc.word_count == expected


def test_idempotence_on_plain_body():
    plain = "Just words here. Nothing else at all."
    doc = tex_to_text(_doc("\\section{Only}\n" + plain))
    assert doc.sections[0].body.split() == plain.split()


def test_conservation_of_prose_words():
    # every non-comment, non-markup word lands in exactly one bucket
    words = {
        "title": "uniquetitleword",
        "abstract": "uniqueabstractword",
        "intro": "uniqueintroword",
        "table": "uniquetableword",
        "caption": "uniquecaptionword",
    }
    body = (
        f"\\begin{{abstract}}{words['abstract']}\\end{{abstract}}\n"
        f"\\section{{Intro}}\n{words['intro']} % uniquecommentword\n"
        f"\\begin{{table}}\\caption{{{words['caption']}}}\n"
        f"\\begin{{tabular}}{{l}}{words['table']}\\end{{tabular}}\\end{{table}}\n"
    )
    doc = tex_to_text(_doc(body, title=words["title"]))
    buckets = [doc.title, doc.abstract] + [s.body for s in doc.sections]
    buckets += [t.caption for t in doc.tables] + [t.cells for t in doc.tables]
    for word in words.values():
        assert sum(b.split().count(word) for b in buckets) == 1, word
    assert all("uniquecommentword" not in b for b in buckets)


def test_determinism(corpus_docs):
    for paper_id in ("pos01", "pos05", "neg03"):
        again = tex_to_text(resolve_includes(load_paper_dir(CORPUS_DIR / paper_id)))
        assert json.dumps(again.to_dict()) == json.dumps(corpus_docs[paper_id].to_dict())


def test_no_document_body():
    src = TexSource("p", "main.tex", {"main.tex": "no env here"})
    with pytest.raises(NoDocumentBody):
        tex_to_text(src)


def test_empty_document():
    src = TexSource("p", "main.tex", {"main.tex": "\\begin{document}\\end{document}"})
    with pytest.raises(EmptyDocument):
        tex_to_text(src)


def test_ambiguous_root(tmp_path):
    for name in ("a.tex", "b.tex"):
        (tmp_path / name).write_text("\\begin{document}x\\end{document}")
    with pytest.raises(AmbiguousRoot):
        load_paper_dir(tmp_path)


def test_undecodable_bytes_replaced(tmp_path):
    (tmp_path / "main.tex").write_bytes(
        b"\\begin{document}caf\xe9 words\\end{document}"
    )
    src = load_paper_dir(tmp_path)
    assert "words" in src.files["main.tex"]  # no decode error


def test_segment_bodies_free_of_control_sequences(corpus_docs):
    for doc in corpus_docs.values():
        for segment in doc.sections:
            assert "\\" not in segment.body, (doc.paper_id, segment.heading)
            assert "\\" not in segment.heading
        for table in doc.tables:
            assert "&" not in table.cells and "\\" not in table.cells


def test_serialization_round_trip(corpus_docs):
    doc = corpus_docs["pos02"]
    assert SegmentedDoc.from_dict(doc.to_dict()) == doc


def test_clean_tex_handles_escapes_and_unknown_commands():
    assert clean_tex(r"50\% of AT\&T \unknowncmd{kept} \mystery") == "50% of AT&T kept"
