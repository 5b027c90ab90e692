"""Model-output parsing and both evaluation settings.

Setting 1 treats the task as structured summarization (ROUGE against the
canonical gold serialization) plus leaderboard/no-leaderboard classification
(general accuracy). Setting 2 scores the extracted JSON per element and
overall, under exact and partial value matching.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .annotations import TdmsQuadruple
from .contexts import ContextKind
from .errors import EmptyInput
from .prompts import UNANSWERABLE, GoldAnswer
from .rouge import rouge_all, tokenize

PARTIAL_TOKEN_F1_THRESHOLD = 0.5

FIELDS = ("Task", "Dataset", "Metric", "Score", "Overall")
ELEMENT_FIELDS = FIELDS[:4]


class OutputKind(str, Enum):
    UNANSWERABLE = "unanswerable"
    QUADRUPLES = "quadruples"
    MALFORMED = "malformed"


class MatchMode(str, Enum):
    EXACT = "Exact"
    PARTIAL = "Partial"


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    raw_output: str


@dataclass(frozen=True)
class ParsedOutput:
    kind: OutputKind
    quadruples: tuple[TdmsQuadruple, ...] = ()


# ---------------------------------------------------------------------------
# output parsing
# ---------------------------------------------------------------------------

_UNANSWERABLE_RE = re.compile(r"\bunanswerable\b")
_DECODER = json.JSONDecoder()


def _first_json_array(text: str) -> list | None:
    start = 0
    while True:
        i = text.find("[", start)
        if i == -1:
            return None
        try:
            value, _ = _DECODER.raw_decode(text, i)
        except ValueError:
            start = i + 1
            continue
        if isinstance(value, list):
            return value
        start = i + 1


def _coerce(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value.strip()
    return json.dumps(value) if not isinstance(value, (int, float, bool)) else str(value)


def parse_output(raw: str) -> ParsedOutput:
    """Classify a raw model reply as unanswerable, quadruples, or malformed.

    Keys of array objects match case-insensitively; a missing key becomes an
    empty string and rows empty in all four fields are discarded. The
    unanswerable token only counts when no JSON array parses at all.
    """
    text = (raw or "").strip()
    array = _first_json_array(text)
    if array is None:
        if _UNANSWERABLE_RE.search(text.casefold()):
            return ParsedOutput(OutputKind.UNANSWERABLE)
        return ParsedOutput(OutputKind.MALFORMED)
    quadruples = []
    for item in array:
        if not isinstance(item, dict):
            continue
        by_key = {str(k).strip().casefold(): v for k, v in item.items()}
        values = [_coerce(by_key.get(f, "")) for f in ("task", "dataset", "metric", "score")]
        if any(values):
            quadruples.append(TdmsQuadruple(*values))
    if quadruples:
        return ParsedOutput(OutputKind.QUADRUPLES, tuple(quadruples))
    return ParsedOutput(OutputKind.MALFORMED)


# ---------------------------------------------------------------------------
# value matching
# ---------------------------------------------------------------------------

_PUNCT = string.punctuation + "‘’“”"


def normalize_value(value: str) -> str:
    v = " ".join(value.casefold().split())
    return v.strip(_PUNCT + " ")


def token_f1(a: str, b: str) -> float:
    ta, tb = tokenize(a), tokenize(b)
    if not ta or not tb:
        return 0.0
    overlap = sum((Counter(ta) & Counter(tb)).values())
    if overlap == 0:
        return 0.0
    return 2 * overlap / (len(ta) + len(tb))


def match_values(
    predicted: str,
    gold: str,
    mode: MatchMode,
    partial_threshold: float = PARTIAL_TOKEN_F1_THRESHOLD,
) -> bool:
    """Exact: normalized equality. Partial: equality, substring either way,
    or token-level F1 at or above the threshold."""
    p, g = normalize_value(predicted), normalize_value(gold)
    if p == g:
        return True
    if MatchMode(mode) is MatchMode.EXACT:
        return False
    if p and g and (p in g or g in p):
        return True
    return token_f1(p, g) >= partial_threshold


def quadruple_matches(
    predicted: TdmsQuadruple,
    gold: TdmsQuadruple,
    mode: MatchMode,
    partial_threshold: float = PARTIAL_TOKEN_F1_THRESHOLD,
) -> bool:
    return all(
        match_values(pv, gv, mode, partial_threshold)
        for pv, gv in zip(
            (predicted.task, predicted.dataset, predicted.metric, predicted.score),
            (gold.task, gold.dataset, gold.metric, gold.score),
        )
    )


# ---------------------------------------------------------------------------
# alignment
# ---------------------------------------------------------------------------

def align_count(n_pred: int, n_gold: int, compatible) -> int:
    """One-to-one alignment size between predictions and golds.

    Seeded greedily in list order and repaired with augmenting paths, so the
    count always equals the maximum bipartite matching (verified against a
    brute-force oracle in the tests).
    """
    match_of_gold = [-1] * n_gold

    def try_assign(i: int, visited: set[int]) -> bool:
        for j in range(n_gold):
            if j not in visited and compatible(i, j):
                visited.add(j)
                if match_of_gold[j] == -1 or try_assign(match_of_gold[j], visited):
                    match_of_gold[j] = i
                    return True
        return False

    count = 0
    for i in range(n_pred):
        if try_assign(i, set()):
            count += 1
    return count


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _prf(tp: int, fp: int, fn: int) -> Prf:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return Prf(100.0 * precision, 100.0 * recall, 100.0 * _fm(precision, recall))


def _fm(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def _values(quads: Sequence[TdmsQuadruple], field_name: str) -> list[str]:
    return [getattr(q, field_name.lower()) for q in quads]


def element_counts(
    parsed: ParsedOutput,
    gold: GoldAnswer,
    field_name: str,
    mode: MatchMode,
    partial_threshold: float = PARTIAL_TOKEN_F1_THRESHOLD,
) -> tuple[int, int, int]:
    """(tp, fp, fn) for one instance; unanswerable outputs predict nothing."""
    preds = list(parsed.quadruples) if parsed.kind is OutputKind.QUADRUPLES else []
    golds = list(gold.quadruples)
    if field_name == "Overall":
        compat = lambda i, j: quadruple_matches(preds[i], golds[j], mode, partial_threshold)
        p_items, g_items = preds, golds
    else:
        pv = _values(preds, field_name)
        gv = _values(golds, field_name)
        compat = lambda i, j: match_values(pv[i], gv[j], mode, partial_threshold)
        p_items, g_items = pv, gv
    tp = align_count(len(p_items), len(g_items), compat)
    return tp, len(p_items) - tp, len(g_items) - tp


def score_elements(
    pairs: Sequence[tuple[ParsedOutput, GoldAnswer]],
    field_name: str,
    mode: MatchMode,
    partial_threshold: float = PARTIAL_TOKEN_F1_THRESHOLD,
) -> Prf:
    """Micro-averaged precision/recall/F1 for one field and match mode."""
    tp = fp = fn = 0
    for parsed, gold in pairs:
        a, b, c = element_counts(parsed, gold, field_name, mode, partial_threshold)
        tp += a
        fp += b
        fn += c
    return _prf(tp, fp, fn)


def general_accuracy(pairs: Sequence[tuple[ParsedOutput, GoldAnswer]]) -> float:
    """Leaderboard/no-leaderboard classification accuracy, 0-100.

    A malformed reply still claims a leaderboard, so it counts as answered.
    """
    if not pairs:
        raise EmptyInput("general_accuracy needs at least one (prediction, gold) pair")
    correct = 0
    for parsed, gold in pairs:
        if gold.unanswerable:
            correct += parsed.kind is OutputKind.UNANSWERABLE
        else:
            correct += parsed.kind is not OutputKind.UNANSWERABLE
    return 100.0 * correct / len(pairs)


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    """One scored instance: prompt metadata joined with its prediction."""

    instance_id: str
    template_id: str
    gold: GoldAnswer
    raw_output: str


@dataclass(frozen=True)
class MetricBlock:
    n: int
    n_positive: int
    n_negative: int
    n_missing: int
    rouge1: float
    rouge2: float
    rougeL: float
    rougeLsum: float
    general_accuracy: float
    elements: dict[str, dict[str, Prf]]  # mode -> field -> Prf

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "n_missing": self.n_missing,
            "rouge1": self.rouge1,
            "rouge2": self.rouge2,
            "rougeL": self.rougeL,
            "rougeLsum": self.rougeLsum,
            "general_accuracy": self.general_accuracy,
            "elements": {
                mode: {f: prf.to_dict() for f, prf in fields.items()}
                for mode, fields in self.elements.items()
            },
        }


@dataclass(frozen=True)
class EvalReport:
    split: str
    context_kind: ContextKind
    per_template: dict[str, MetricBlock]
    overall: MetricBlock

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "context_kind": self.context_kind.value,
            "per_template": {t: b.to_dict() for t, b in sorted(self.per_template.items())},
            "overall": self.overall.to_dict(),
        }


def _block(rows: Sequence[EvalRow], partial_threshold: float) -> MetricBlock:
    pairs = [(parse_output(r.raw_output), r.gold) for r in rows]
    rouge_totals = {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0, "rougeLsum": 0.0}
    for row in rows:
        scores = rouge_all(row.raw_output.strip(), row.gold.text)
        for k, v in scores.items():
            rouge_totals[k] += v
    n = len(rows)
    elements = {
        mode.value: {
            f: score_elements(pairs, f, mode, partial_threshold) for f in FIELDS
        }
        for mode in (MatchMode.EXACT, MatchMode.PARTIAL)
    }
    return MetricBlock(
        n=n,
        n_positive=sum(1 for r in rows if not r.gold.unanswerable),
        n_negative=sum(1 for r in rows if r.gold.unanswerable),
        n_missing=sum(1 for r in rows if not r.raw_output),
        rouge1=rouge_totals["rouge1"] / n,
        rouge2=rouge_totals["rouge2"] / n,
        rougeL=rouge_totals["rougeL"] / n,
        rougeLsum=rouge_totals["rougeLsum"] / n,
        general_accuracy=general_accuracy(pairs),
        elements=elements,
    )


def evaluate(
    rows: Sequence[EvalRow],
    split: str,
    context_kind: ContextKind,
    partial_threshold: float = PARTIAL_TOKEN_F1_THRESHOLD,
    template_ids: Iterable[str] | None = None,
) -> EvalReport:
    """Aggregate scored instances into per-template blocks plus an overall block."""
    if template_ids is not None:
        wanted = set(template_ids)
        rows = [r for r in rows if r.template_id in wanted]
    if not rows:
        raise EmptyInput("no instances to evaluate")
    by_template: dict[str, list[EvalRow]] = {}
    for row in sorted(rows, key=lambda r: r.instance_id):
        by_template.setdefault(row.template_id, []).append(row)
    per_template = {t: _block(rs, partial_threshold) for t, rs in sorted(by_template.items())}
    overall = _block(sorted(rows, key=lambda r: r.instance_id), partial_threshold)
    return EvalReport(split, ContextKind(context_kind), per_template, overall)
