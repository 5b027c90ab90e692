"""Aligned text tables over evaluation reports.

One table mirrors the structured-summary setting (ROUGE + general accuracy);
two more mirror the fine-grained setting (per-element F1 and precision under
both match modes), with splits side by side.
"""

from __future__ import annotations

from .scoring import FIELDS, EvalReport, MetricBlock

_ROUGE_COLS = ("Rouge1", "Rouge2", "RougeL", "RougeLsum", "Gen-Acc")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    for row in [header] + rows:
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                               for i, (cell, w) in enumerate(zip(row, widths))))
        if row is header:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _rouge_cells(block: MetricBlock) -> list[str]:
    return [
        _fmt(block.rouge1),
        _fmt(block.rouge2),
        _fmt(block.rougeL),
        _fmt(block.rougeLsum),
        _fmt(block.general_accuracy),
    ]


def _element_cells(block: MetricBlock, mode: str, metric: str) -> list[str]:
    return [_fmt(getattr(block.elements[mode][f], metric)) for f in FIELDS]


def _row_blocks(report: EvalReport, per_template: bool) -> list[tuple[str, MetricBlock]]:
    rows = [("all", report.overall)]
    if per_template:
        rows += list(report.per_template.items())
    return rows


def render_rouge_table(reports: list[EvalReport], per_template: bool = False) -> str:
    """Structured-summary scores; columns grouped per split."""
    splits = sorted({r.split for r in reports})
    header = ["Context/Template"] + [f"{s}:{c}" for s in splits for c in _ROUGE_COLS]
    rows = []
    kinds = sorted({r.context_kind for r in reports}, key=lambda k: k.value)
    for kind in kinds:
        by_split = {r.split: r for r in reports if r.context_kind == kind}
        for label, _ in _row_blocks(next(iter(by_split.values())), per_template):
            cells = [f"{kind.value}" + ("" if label == "all" else f"/{label}")]
            for s in splits:
                rep = by_split.get(s)
                block = None
                if rep is not None:
                    block = rep.overall if label == "all" else rep.per_template.get(label)
                cells += _rouge_cells(block) if block else ["-"] * len(_ROUGE_COLS)
            rows.append(cells)
    return _table(header, rows)


def render_element_table(
    reports: list[EvalReport], metric: str = "f1", per_template: bool = False
) -> str:
    """Per-element scores (metric = f1 / precision / recall), both match modes."""
    splits = sorted({r.split for r in reports})
    header = ["Context/Template", "Mode"] + [f"{s}:{f}" for s in splits for f in FIELDS]
    rows = []
    kinds = sorted({r.context_kind for r in reports}, key=lambda k: k.value)
    for kind in kinds:
        by_split = {r.split: r for r in reports if r.context_kind == kind}
        for label, _ in _row_blocks(next(iter(by_split.values())), per_template):
            for mode in ("Exact", "Partial"):
                cells = [f"{kind.value}" + ("" if label == "all" else f"/{label}"), mode]
                for s in splits:
                    rep = by_split.get(s)
                    block = None
                    if rep is not None:
                        block = rep.overall if label == "all" else rep.per_template.get(label)
                    cells += _element_cells(block, mode, metric) if block else ["-"] * len(FIELDS)
                rows.append(cells)
    return _table(header, rows)


def render_full_report(reports: list[EvalReport], per_template: bool = False) -> str:
    parts = [
        "Structured summary generation (ROUGE) and leaderboard classification (general accuracy)",
        render_rouge_table(reports, per_template),
        "",
        "Per-element extraction, F1",
        render_element_table(reports, "f1", per_template),
        "",
        "Per-element extraction, precision",
        render_element_table(reports, "precision", per_template),
    ]
    return "\n".join(parts) + "\n"
