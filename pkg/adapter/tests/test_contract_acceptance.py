"""Secondary acceptance: the adapter honors the pipeline's external contracts.

The pipeline package is exercised only through its external interfaces: the
CLI (subprocess), the prompt/prediction JSONL schemas, and the completion
HTTP contract. Its import_predictions is the contract checker named by the
conformance criterion.
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import threading
from pathlib import Path

import pytest

from sota_adapter.runner import AdapterConfig, batch_generate, finetune
from sota_adapter.server import build_server

REPO_ROOT = Path(__file__).resolve().parents[2]
FIXTURES = REPO_ROOT / "tests" / "fixtures"

pytest.importorskip("sotapipe", reason="pipeline package must be installed for contract tests")


def _pass(name: str) -> None:
    print(f"\nACCEPTANCE[{name}]: PASS")


def _sotapipe(*args: str) -> None:
    exe = shutil.which("sotapipe")
    cmd = [exe] if exe else [sys.executable, "-m", "sotapipe.cli"]
    result = subprocess.run(
        [*cmd, *args], capture_output=True, text=True, timeout=300
    )
    assert result.returncode == 0, f"sotapipe {args[0]} failed: {result.stderr}"


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory) -> Path:
    """Prompt sets produced by the real pipeline CLI over the fixture corpus."""
    assert FIXTURES.is_dir(), "pipeline fixture corpus not found"
    base = tmp_path_factory.mktemp("pipeline")
    out = base / "out"
    config = base / "pipeline.toml"
    config.write_text(
        "\n".join(
            [
                f'corpus_dir = "{FIXTURES / "corpus"}"',
                f'annotations_path = "{FIXTURES / "annotations.json"}"',
                f'negatives_path = "{FIXTURES / "negatives.txt"}"',
                f'output_dir = "{out}"',
                'context_kinds = ["DocTAET"]',
                "seed = 0",
                "test_fraction = 0.35",
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    for stage in ("ingest", "label", "split", "prompts"):
        _sotapipe(stage, "--config", str(config))
    return out


def test_batch_mode_passes_import_predictions(stub_checkpoint, pipeline_out, tmp_path):
    from sotapipe.gateway import import_predictions

    prompts_path = pipeline_out / "prompts" / "test_fewshot_DocTAET.jsonl"
    rows = [json.loads(l) for l in prompts_path.read_text().splitlines()]
    known_ids = {r["id"] for r in rows}
    assert len(rows) == 15 * 4  # 3 positives + 1 negative in the few-shot bucket

    out = tmp_path / "preds.jsonl"
    config = AdapterConfig(checkpoint_id=str(stub_checkpoint), context_length=512, max_new_tokens=4)
    n = batch_generate(prompts_path, config, out)
    assert n == len(rows)

    predictions = import_predictions(out, known_ids=known_ids)  # zero schema errors
    assert {p.instance_id for p in predictions} == known_ids
    _pass("adapter-batch-contract")


def test_serve_mode_end_to_end_produces_eval_report(stub_checkpoint, pipeline_out):
    server_config = AdapterConfig(
        checkpoint_id=str(stub_checkpoint), context_length=512, max_new_tokens=4, mode="serve"
    )
    server = build_server(server_config, port=0)
    host, port = server.server_address[:2]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        config = pipeline_out.parent / "endpoint.toml"
        config.write_text(
            (pipeline_out.parent / "pipeline.toml").read_text()
            + "\n".join(
                [
                    "[endpoint]",
                    f'base_url = "http://{host}:{port}"',
                    'model_name = "tiny-byte-lm"',
                    "timeout = 60.0",
                    "max_retries = 1",
                    "max_in_flight = 2",
                    "retry_backoff = 0.05",
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        _sotapipe("infer", "--config", str(config), "--split", "test_fewshot")
        _sotapipe("eval", "--config", str(config), "--split", "test_fewshot")
    finally:
        server.shutdown()
        server.server_close()

    report_path = pipeline_out / "eval" / "test_fewshot_DocTAET.json"
    report = json.loads(report_path.read_text())
    assert report["split"] == "test_fewshot"
    assert report["context_kind"] == "DocTAET"
    assert report["overall"]["n"] == 15 * 4
    assert len(report["per_template"]) == 15
    for key in ("rouge1", "rouge2", "rougeL", "rougeLsum", "general_accuracy"):
        assert 0.0 <= report["overall"][key] <= 100.0
    assert set(report["overall"]["elements"]) == {"Exact", "Partial"}
    _pass("adapter-serve-e2e")


def test_finetune_smoke_with_default_hyperparameters(stub_checkpoint, train_file, tmp_path, caplog):
    # defaults: context 2400, batch 2, grad accum 4 (effective 8), 5 epochs, lr 1e-4
    config = AdapterConfig(checkpoint_id=str(stub_checkpoint), max_new_tokens=4, mode="finetune")
    with caplog.at_level("INFO", logger="sota_adapter"):
        out = finetune(train_file, config, tmp_path / "ft")
    assert any("effective batch size: 8" in m for m in caplog.messages)
    state = json.loads((out / "training_state.json").read_text())
    assert state["effective_batch_size"] == 8
    records = [json.loads(l) for l in (out / "training_log.jsonl").read_text().splitlines()]
    assert len(records) >= config.epochs  # at least one optimizer step per epoch
    _pass("adapter-finetune-smoke")
