from __future__ import annotations



import pytest

from sotapipe.annotations import attach_negatives, load_annotations, load_negative_ids
from sotapipe.texparse import ingest_paper

from fixture_paths import ANNOTATIONS, CORPUS_DIR, NEGATIVES


@pytest.fixture(scope="session")
def corpus_docs():
    """Every fixture paper ingested once per session, keyed by paper id."""
    docs = {}
    for paper_dir in sorted(CORPUS_DIR.iterdir()):
        doc = ingest_paper(paper_dir)
        docs[doc.paper_id] = doc
    return docs


@pytest.fixture(scope="session")
def corpus_records(corpus_docs):
    """Positive + negative records with segmented sources attached."""
    records = load_annotations(ANNOTATIONS)
    records = attach_negatives(records, load_negative_ids(NEGATIVES))
    return [r.with_source(corpus_docs[r.paper_id]) for r in records]
