"""ROUGE-1/2/L/Lsum on the 0-100 scale.

Normalization: case-fold and break tokens on punctuation. Degenerate cases
follow one rule at every granularity: if candidate and reference both yield
no units the score is 100 (trivial agreement); if exactly one side is empty
the score is 0.
"""

from __future__ import annotations

import re
from collections import Counter

import numpy as np

from .lcskernel import lcs_length, lcs_match_mask

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+|\n+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


def split_sentences(text: str) -> list[list[str]]:
    """Sentence units split on newlines and terminal punctuation, tokenized."""
    sentences = [tokenize(s) for s in _SENTENCE_SPLIT_RE.split(text) if s]
    return [s for s in sentences if s]


def _fmeasure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _ids(*token_lists: list[str]) -> list[np.ndarray]:
    vocab: dict[str, int] = {}
    arrays = []
    for tokens in token_lists:
        arrays.append(
            np.fromiter(
                (vocab.setdefault(t, len(vocab)) for t in tokens), dtype=np.int64, count=len(tokens)
            )
        )
    return arrays


def rouge_n(candidate: str, reference: str, n: int) -> float:
    """N-gram overlap F-measure (clipped counts), scaled to 0-100."""
    if n not in (1, 2):
        raise ValueError(f"n must be 1 or 2, got {n}")
    cand = tokenize(candidate)
    ref = tokenize(reference)
    cand_ngrams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_ngrams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    total_cand = sum(cand_ngrams.values())
    total_ref = sum(ref_ngrams.values())
    if total_cand == 0 and total_ref == 0:
        return 100.0
    if total_cand == 0 or total_ref == 0:
        return 0.0
    overlap = sum(min(count, ref_ngrams[g]) for g, count in cand_ngrams.items())
    return 100.0 * _fmeasure(overlap / total_cand, overlap / total_ref)


def rouge_l(candidate: str, reference: str) -> float:
    """Token-level longest-common-subsequence F-measure, scaled to 0-100."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand and not ref:
        return 100.0
    if not cand or not ref:
        return 0.0
    cand_ids, ref_ids = _ids(cand, ref)
    lcs = lcs_length(cand_ids, ref_ids)
    return 100.0 * _fmeasure(lcs / len(cand), lcs / len(ref))


def rouge_lsum(candidate: str, reference: str) -> float:
    """Summary-level ROUGE-L: union-LCS per reference sentence.

    Every reference sentence takes the union of its LCS matches against each
    candidate sentence; hits are capped by per-token counts on both sides so
    repeated sentences cannot push the score past 100.
    """
    cand_sents = split_sentences(candidate)
    ref_sents = split_sentences(reference)
    if not cand_sents and not ref_sents:
        return 100.0
    if not cand_sents or not ref_sents:
        return 0.0

    m = sum(len(s) for s in ref_sents)
    n = sum(len(s) for s in cand_sents)
    ref_counts = Counter(t for s in ref_sents for t in s)
    cand_counts = Counter(t for s in cand_sents for t in s)

    all_sents = ref_sents + cand_sents
    id_arrays = _ids(*all_sents)
    ref_ids = id_arrays[: len(ref_sents)]
    cand_ids = id_arrays[len(ref_sents) :]

    hits = 0
    for ref_sent, rid in zip(ref_sents, ref_ids):
        union = np.zeros(len(ref_sent), dtype=bool)
        for cid in cand_ids:
            union |= lcs_match_mask(rid, cid)
        for pos in np.flatnonzero(union):
            token = ref_sent[pos]
            if ref_counts[token] > 0 and cand_counts[token] > 0:
                hits += 1
                ref_counts[token] -= 1
                cand_counts[token] -= 1
    return 100.0 * _fmeasure(hits / n, hits / m)


def rouge_all(candidate: str, reference: str) -> dict[str, float]:
    """All four scores keyed rouge1/rouge2/rougeL/rougeLsum."""
    return {
        "rouge1": rouge_n(candidate, reference, 1),
        "rouge2": rouge_n(candidate, reference, 2),
        "rougeL": rouge_l(candidate, reference),
        "rougeLsum": rouge_lsum(candidate, reference),
    }
