"""Annotation store: distant labels, negatives, splits, and corpus statistics.

Annotation schema (JSON): ``[{"paper_id": ..., "tdms": [{"task": ..., "dataset":
..., "metric": ..., "score": ...}, ...]}, ...]``. Negatives are a newline-
delimited list of paper ids. Triple identity everywhere is exact string
equality after trimming and case-folding.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import OverlapError, SchemaViolation
from .texparse import SegmentedDoc

log = logging.getLogger(__name__)

_FIELDS = ("task", "dataset", "metric", "score")


@dataclass(frozen=True)
class TdmsQuadruple:
    """One (Task, Dataset, Metric, Score) annotation; scores stay verbatim strings."""

    task: str
    dataset: str
    metric: str
    score: str

    def key(self) -> tuple[str, str, str, str]:
        """Normalized identity used for statistics and split purity."""
        return (
            self.task.strip().casefold(),
            self.dataset.strip().casefold(),
            self.metric.strip().casefold(),
            self.score.strip().casefold(),
        )

    def tdm_key(self) -> tuple[str, str, str]:
        return self.key()[:3]


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    has_leaderboard: bool
    quadruples: tuple[TdmsQuadruple, ...]
    source: SegmentedDoc | None = None

    def tdm_keys(self) -> set[tuple[str, str, str]]:
        return {q.tdm_key() for q in self.quadruples}

    def with_source(self, doc: SegmentedDoc) -> "PaperRecord":
        return replace(self, source=doc)


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple[PaperRecord, ...]
    test_fewshot: tuple[PaperRecord, ...]
    test_zeroshot: tuple[PaperRecord, ...]
    seed: int

    def bucket(self, name: str) -> tuple[PaperRecord, ...]:
        return {"train": self.train, "test_fewshot": self.test_fewshot,
                "test_zeroshot": self.test_zeroshot}[name]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train": [r.paper_id for r in self.train],
            "test_fewshot": [r.paper_id for r in self.test_fewshot],
            "test_zeroshot": [r.paper_id for r in self.test_zeroshot],
        }


SPLIT_NAMES = ("train", "test_fewshot", "test_zeroshot")


@dataclass(frozen=True)
class CorpusStats:
    papers_with: int
    papers_without: int
    total_tdm_triples: int
    distinct_tdm_triples: int
    distinct_tasks: int
    distinct_datasets: int
    distinct_metrics: int
    avg_tdm_per_paper: float
    avg_tdms_per_paper: float

    def to_dict(self) -> dict:
        return {
            "papers_with": self.papers_with,
            "papers_without": self.papers_without,
            "total_tdm_triples": self.total_tdm_triples,
            "distinct_tdm_triples": self.distinct_tdm_triples,
            "distinct_tasks": self.distinct_tasks,
            "distinct_datasets": self.distinct_datasets,
            "distinct_metrics": self.distinct_metrics,
            "avg_tdm_per_paper": self.avg_tdm_per_paper,
            "avg_tdms_per_paper": self.avg_tdms_per_paper,
        }


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _require_str(value, path: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise SchemaViolation(f"{path}: expected a non-empty string")
    return value.strip()


def load_annotations(path: str | Path) -> list[PaperRecord]:
    """Load positive records; duplicates within a paper are removed, duplicate
    paper ids are merged with a warning."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"{path}: not valid JSON ({e})") from e
    if not isinstance(raw, list):
        raise SchemaViolation("$: expected a list of paper objects")

    by_id: dict[str, list[TdmsQuadruple]] = {}
    order: list[str] = []
    for i, entry in enumerate(raw):
        where = f"$[{i}]"
        if not isinstance(entry, dict):
            raise SchemaViolation(f"{where}: expected an object")
        if "paper_id" not in entry:
            raise SchemaViolation(f"{where}.paper_id: missing")
        pid = _require_str(entry["paper_id"], f"{where}.paper_id")
        tdms = entry.get("tdms")
        if not isinstance(tdms, list) or not tdms:
            raise SchemaViolation(
                f"{where}.tdms: positives must carry at least one quadruple"
            )
        quads = []
        for j, q in enumerate(tdms):
            qwhere = f"{where}.tdms[{j}]"
            if not isinstance(q, dict):
                raise SchemaViolation(f"{qwhere}: expected an object")
            for f in _FIELDS:
                if f not in q:
                    raise SchemaViolation(f"{qwhere}.{f}: missing")
            quads.append(TdmsQuadruple(*(_require_str(q[f], f"{qwhere}.{f}") for f in _FIELDS)))
        if pid in by_id:
            log.warning("duplicate paper id %r: merging records", pid)
            by_id[pid].extend(quads)
        else:
            by_id[pid] = quads
            order.append(pid)

    records = []
    for pid in order:
        seen: set[TdmsQuadruple] = set()
        deduped = []
        for q in by_id[pid]:
            if q not in seen:
                seen.add(q)
                deduped.append(q)
        records.append(PaperRecord(pid, True, tuple(deduped)))
    return records


def load_negative_ids(path: str | Path) -> list[str]:
    ids = []
    seen = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        pid = line.strip()
        if pid and pid not in seen:
            seen.add(pid)
            ids.append(pid)
    return ids


def attach_negatives(records: list[PaperRecord], negative_ids: list[str]) -> list[PaperRecord]:
    """Append no-leaderboard records carrying the unanswerable label."""
    positive_ids = {r.paper_id for r in records}
    overlap = positive_ids.intersection(negative_ids)
    if overlap:
        raise OverlapError(
            "ids appear both as positives and negatives: " + ", ".join(sorted(overlap))
        )
    out = list(records)
    seen = set(positive_ids)
    for pid in negative_ids:
        if pid in seen:
            continue
        seen.add(pid)
        out.append(PaperRecord(pid, False, ()))
    return out


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def make_splits(records: list[PaperRecord], test_fraction: float, seed: int) -> CorpusSplit:
    """Seeded held-out split with the zero-shot purity rule.

    A held-out positive lands in test_zeroshot only when none of its TDM
    triples occurs in any train paper; held-out negatives are distributed
    between the two test buckets by the same seeded draw.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = random.Random(seed)
    positives = [r for r in records if r.has_leaderboard]
    negatives = [r for r in records if not r.has_leaderboard]

    def held_out(pool: list[PaperRecord]) -> set[str]:
        if not pool:
            return set()
        k = min(len(pool), math.ceil(round(test_fraction * len(pool), 9)))
        shuffled = list(pool)
        rng.shuffle(shuffled)
        return {r.paper_id for r in shuffled[:k]}

    test_pos_ids = held_out(positives)
    test_neg_ids = held_out(negatives)

    train = [r for r in records if r.paper_id not in test_pos_ids | test_neg_ids]
    train_triples: set[tuple[str, str, str]] = set()
    for r in train:
        train_triples |= r.tdm_keys()

    fewshot: list[PaperRecord] = []
    zeroshot: list[PaperRecord] = []
    for r in records:
        if r.paper_id in test_pos_ids:
            if r.tdm_keys() and r.tdm_keys().isdisjoint(train_triples):
                zeroshot.append(r)
            else:
                fewshot.append(r)
        elif r.paper_id in test_neg_ids:
            (fewshot if rng.random() < 0.5 else zeroshot).append(r)

    split = CorpusSplit(tuple(train), tuple(fewshot), tuple(zeroshot), seed)
    for name in SPLIT_NAMES:
        if not split.bucket(name):
            log.warning("degenerate split: bucket %r is empty (seed=%d)", name, seed)
    return split


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def compute_stats(records: list[PaperRecord]) -> CorpusStats:
    """Corpus statistics over one record list (typically one split bucket).

    TDM triples are quadruples with the score dropped; both TDM and TDMS
    occurrences are counted after per-paper deduplication.
    """
    positives = [r for r in records if r.has_leaderboard]
    papers_with = len(positives)
    papers_without = len(records) - papers_with

    total_tdm = 0
    total_tdms = 0
    all_triples: set[tuple[str, str, str]] = set()
    tasks: set[str] = set()
    datasets: set[str] = set()
    metrics: set[str] = set()
    for r in positives:
        triples = r.tdm_keys()
        quads = {q.key() for q in r.quadruples}
        total_tdm += len(triples)
        total_tdms += len(quads)
        all_triples |= triples
        for t, d, m in triples:
            tasks.add(t)
            datasets.add(d)
            metrics.add(m)

    return CorpusStats(
        papers_with=papers_with,
        papers_without=papers_without,
        total_tdm_triples=total_tdm,
        distinct_tdm_triples=len(all_triples),
        distinct_tasks=len(tasks),
        distinct_datasets=len(datasets),
        distinct_metrics=len(metrics),
        avg_tdm_per_paper=total_tdm / papers_with if papers_with else 0.0,
        avg_tdms_per_paper=total_tdms / papers_with if papers_with else 0.0,
    )


_STATS_ROWS = (
    ("Papers w/ leaderboards", "papers_with", "d"),
    ("Papers w/o leaderboards", "papers_without", "d"),
    ("Total TDM-triples", "total_tdm_triples", "d"),
    ("Distinct TDM-triples", "distinct_tdm_triples", "d"),
    ("Distinct Tasks", "distinct_tasks", "d"),
    ("Distinct Datasets", "distinct_datasets", "d"),
    ("Distinct Metrics", "distinct_metrics", "d"),
    ("Avg. no. of TDM per paper", "avg_tdm_per_paper", ".2f"),
    ("Avg. no. of TDMS per paper", "avg_tdms_per_paper", ".2f"),
)


def stats_table(columns: dict[str, CorpusStats]) -> str:
    """Aligned-column text table, one column per record bucket."""
    names = list(columns)
    label_w = max(len(label) for label, _, _ in _STATS_ROWS)
    widths = [max(len(n), 14) for n in names]
    lines = [
        " " * label_w + "  " + "  ".join(n.rjust(w) for n, w in zip(names, widths))
    ]
    for label, attr, fmt in _STATS_ROWS:
        cells = [format(getattr(columns[n], attr), fmt).rjust(w) for n, w in zip(names, widths)]
        lines.append(label.ljust(label_w) + "  " + "  ".join(cells))
    return "\n".join(lines)
