from __future__ import annotations

import json
from pathlib import Path

import pytest

from sota_adapter.model import ModelSpec, init_checkpoint


@pytest.fixture(scope="session")
def stub_checkpoint(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("ckpt") / "stub"
    return init_checkpoint(
        path, ModelSpec(d_model=32, n_layer=2, n_head=2, max_positions=2048), seed=11
    )


@pytest.fixture()
def tiny_prompts(tmp_path) -> Path:
    rows = [
        {
            "id": f"p{i}#squad_1#DocTAET",
            "paper_id": f"p{i}",
            "template_id": "squad_1",
            "context_kind": "DocTAET",
            "prompt": f"Paper {i}: the model scores 9{i}.{i} F1. Extract the quadruple.",
            "gold": f'[{{"Task":"t{i}","Dataset":"d{i}","Metric":"F1","Score":"9{i}.{i}"}}]',
        }
        for i in range(5)
    ]
    path = tmp_path / "prompts.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def train_file(tmp_path) -> Path:
    rows = [
        {
            "id": f"t{i}#drop_3#DocTAET",
            "prompt": f"Score {i % 10} here.",
            "gold": "unanswerable" if i % 3 == 0 else f'[{{"Task":"a","Dataset":"b","Metric":"c","Score":"{i}"}}]',
        }
        for i in range(20)
    ]
    path = tmp_path / "train.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path
