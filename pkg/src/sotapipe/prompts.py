"""Instruction templates and prompt-set construction.

The 15 instruction patterns (8 SQuAD_v2, 7 DROP) ship as a versioned data
file. Patterns that carry no explicit ``{Context}`` placeholder get the
context prepended followed by a blank line; patterns without ``{Question}``
get the question appended (before a trailing ``Answer:`` cue, if any).
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .annotations import PaperRecord, TdmsQuadruple
from .contexts import ContextKind, build_context
from .errors import EmptyBucket, EmptyGold, UnboundPlaceholder

SOTA_QUESTION = (
    "What are the values for the following properties to construct a "
    "Leaderboard for the model introduced in this article: task, dataset, "
    "metric, and score?"
)

UNANSWERABLE = "unanswerable"

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z]+)\}")
_ALLOWED_PLACEHOLDERS = {"Context", "Question"}


def sota_question() -> str:
    """The single task question instantiated into every instruction."""
    return SOTA_QUESTION


@dataclass(frozen=True)
class InstructionTemplate:
    template_id: str
    family: str  # "SQuAD_v2" or "DROP"
    pattern: str  # always contains both {Context} and {Question}

    def __post_init__(self):
        names = set(_PLACEHOLDER_RE.findall(self.pattern))
        unknown = names - _ALLOWED_PLACEHOLDERS
        if unknown:
            raise UnboundPlaceholder(
                f"template {self.template_id}: unsupported placeholder(s) "
                + ", ".join(sorted(unknown))
            )


def _complete_pattern(text: str) -> str:
    pattern = text
    if "{Context}" not in pattern:
        pattern = "{Context}\n\n" + pattern
    if "{Question}" not in pattern:
        if pattern.endswith("Answer:"):
            pattern = pattern[: -len("Answer:")].rstrip() + "\n{Question}\nAnswer:"
        else:
            pattern = pattern + "\n{Question}"
    return pattern


def load_templates(path: str | Path | None = None) -> tuple[InstructionTemplate, ...]:
    """Load the instruction set; validates the 8 + 7 family composition."""
    if path is None:
        raw = resources.files("sotapipe.data").joinpath("instruction_templates.json").read_text(
            encoding="utf-8"
        )
    else:
        raw = Path(path).read_text(encoding="utf-8")
    doc = json.loads(raw)
    templates = tuple(
        InstructionTemplate(t["id"], t["family"], _complete_pattern(t["text"]))
        for t in doc["templates"]
    )
    families = [t.family for t in templates]
    if len(templates) != 15 or families.count("SQuAD_v2") != 8 or families.count("DROP") != 7:
        raise ValueError(
            f"expected 15 templates (8 SQuAD_v2 + 7 DROP), found {len(templates)}"
        )
    return templates


_DEFAULT_TEMPLATES: tuple[InstructionTemplate, ...] | None = None


def default_templates() -> tuple[InstructionTemplate, ...]:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = load_templates()
    return _DEFAULT_TEMPLATES


def render(template: InstructionTemplate, context_text: str, question: str) -> str:
    """Substitute both placeholders; everything else is preserved verbatim."""
    return template.pattern.replace("{Context}", context_text).replace("{Question}", question)


# ---------------------------------------------------------------------------
# gold answers
# ---------------------------------------------------------------------------

def serialize_gold(quadruples: Sequence[TdmsQuadruple]) -> str:
    """Canonical compact JSON array in annotation order."""
    if not quadruples:
        raise EmptyGold("gold quadruple list is empty; use the unanswerable label")
    return json.dumps(
        [
            {"Task": q.task, "Dataset": q.dataset, "Metric": q.metric, "Score": q.score}
            for q in quadruples
        ],
        separators=(",", ":"),
        ensure_ascii=False,
    )


@dataclass(frozen=True)
class GoldAnswer:
    quadruples: tuple[TdmsQuadruple, ...]
    text: str  # canonical serialization, or the literal "unanswerable"

    @property
    def unanswerable(self) -> bool:
        return not self.quadruples

    @classmethod
    def for_record(cls, record: PaperRecord) -> "GoldAnswer":
        if record.has_leaderboard:
            return cls(record.quadruples, serialize_gold(record.quadruples))
        return cls((), UNANSWERABLE)


def gold_from_text(text: str) -> GoldAnswer:
    """Inverse of the canonical gold serialization (see serialize_gold)."""
    if text.strip().casefold() == UNANSWERABLE:
        return GoldAnswer((), UNANSWERABLE)
    rows = json.loads(text)
    quadruples = tuple(
        TdmsQuadruple(r["Task"], r["Dataset"], r["Metric"], r["Score"]) for r in rows
    )
    return GoldAnswer(quadruples, text)


@dataclass(frozen=True)
class PromptInstance:
    instance_id: str  # paper_id "#" template_id "#" context_kind
    paper_id: str
    template_id: str
    context_kind: ContextKind
    prompt: str
    gold: GoldAnswer

    def to_dict(self) -> dict:
        return {
            "id": self.instance_id,
            "paper_id": self.paper_id,
            "template_id": self.template_id,
            "context_kind": self.context_kind.value,
            "prompt": self.prompt,
            "gold": self.gold.text,
        }


def instance_id(paper_id: str, template_id: str, kind: ContextKind) -> str:
    return f"{paper_id}#{template_id}#{ContextKind(kind).value}"


# ---------------------------------------------------------------------------
# prompt sets
# ---------------------------------------------------------------------------

def _sample_size(fraction: float, n: int) -> int:
    # round() guards against float noise in fraction * n before the ceiling
    return min(n, math.ceil(round(fraction * n, 9)))


def build_prompt_set(
    bucket: Sequence[PaperRecord],
    kind: ContextKind,
    sample_fraction: float = 1.0,
    seed: int = 0,
    templates: Sequence[InstructionTemplate] | None = None,
    families: dict[str, list[str]] | None = None,
) -> list[PromptInstance]:
    """Instantiate every template over a seeded per-template paper sample.

    Positives and negatives are sampled separately; each template draws its
    own sample (seed xor template index), so at fractions below 1 different
    templates cover different paper subsets. Output size is
    ``15 * (ceil(f * n_pos) + ceil(f * n_neg))``.
    """
    if not bucket:
        raise EmptyBucket("cannot build a prompt set from an empty bucket")
    if not 0 < sample_fraction <= 1:
        raise ValueError(f"sample_fraction must be in (0, 1], got {sample_fraction}")
    kind = ContextKind(kind)
    templates = tuple(templates if templates is not None else default_templates())
    question = sota_question()

    positives = [r for r in bucket if r.has_leaderboard]
    negatives = [r for r in bucket if not r.has_leaderboard]

    context_text: dict[str, str] = {}
    gold: dict[str, GoldAnswer] = {}
    for record in bucket:
        if record.source is None:
            raise ValueError(f"paper {record.paper_id} has no segmented source attached")
        context_text[record.paper_id] = build_context(record.source, kind, families).text
        gold[record.paper_id] = GoldAnswer.for_record(record)

    n_pos = _sample_size(sample_fraction, len(positives))
    n_neg = _sample_size(sample_fraction, len(negatives))

    instances: list[PromptInstance] = []
    for idx, template in enumerate(templates):
        rng = random.Random(seed ^ idx)
        chosen = list(positives) if n_pos == len(positives) else rng.sample(positives, n_pos)
        chosen += list(negatives) if n_neg == len(negatives) else rng.sample(negatives, n_neg)
        for record in chosen:
            prompt = render(template, context_text[record.paper_id], question)
            instances.append(
                PromptInstance(
                    instance_id=instance_id(record.paper_id, template.template_id, kind),
                    paper_id=record.paper_id,
                    template_id=template.template_id,
                    context_kind=kind,
                    prompt=prompt,
                    gold=gold[record.paper_id],
                )
            )
    return instances
