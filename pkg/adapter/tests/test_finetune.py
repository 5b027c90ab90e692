from __future__ import annotations

import json

from sota_adapter.model import load_checkpoint
from sota_adapter.runner import AdapterConfig, finetune, generate_one


def _config(checkpoint, **kw) -> AdapterConfig:
    defaults = dict(
        checkpoint_id=str(checkpoint), context_length=128, max_new_tokens=4,
        mode="finetune", epochs=1,
    )
    defaults.update(kw)
    return AdapterConfig(**defaults)


def test_smoke_run_saves_checkpoint_and_logs_loss(stub_checkpoint, train_file, tmp_path):
    out = finetune(train_file, _config(stub_checkpoint), tmp_path / "ft")
    names = {p.name for p in out.iterdir()}
    assert {"adapter.pt", "config.json", "weights.pt", "training_log.jsonl",
            "training_state.json"} <= names
    records = [json.loads(l) for l in (out / "training_log.jsonl").read_text().splitlines()]
    assert records, "no training steps logged"
    assert [r["step"] for r in records] == list(range(1, len(records) + 1))
    assert all(isinstance(r["loss"], float) and r["loss"] > 0 for r in records)


def test_effective_batch_size_8_logged_at_defaults(stub_checkpoint, train_file, tmp_path, caplog):
    config = _config(stub_checkpoint)  # batch_size 2 x grad_accum 4 from defaults
    assert config.effective_batch_size == 8
    with caplog.at_level("INFO", logger="sota_adapter"):
        finetune(train_file, config, tmp_path / "ft")
    assert any(
        "effective batch size: 8" in m and "batch_size=2" in m and "4" in m
        for m in caplog.messages
    )


def test_resume_continues_step_counter(stub_checkpoint, train_file, tmp_path):
    out_dir = tmp_path / "ft"
    finetune(train_file, _config(stub_checkpoint), out_dir)
    first = json.loads((out_dir / "training_state.json").read_text())["step"]
    assert first > 0
    finetune(train_file, _config(stub_checkpoint), out_dir, resume=True)
    second = json.loads((out_dir / "training_state.json").read_text())["step"]
    assert second == 2 * first
    steps = [json.loads(l)["step"] for l in (out_dir / "training_log.jsonl").read_text().splitlines()]
    assert steps == list(range(1, second + 1))


def test_finetuned_checkpoint_generates(stub_checkpoint, train_file, tmp_path):
    out_dir = finetune(train_file, _config(stub_checkpoint), tmp_path / "ft")
    model = load_checkpoint(out_dir)
    text, _ = generate_one(model, "Score 3 here.", _config(out_dir, mode="batch"))
    assert isinstance(text, str)


def test_adapter_changes_weights_relative_to_base(stub_checkpoint, train_file, tmp_path):
    out_dir = finetune(train_file, _config(stub_checkpoint, epochs=2), tmp_path / "ft")
    import torch

    state = torch.load(out_dir / "adapter.pt", weights_only=True)
    assert any("lora_a" in k for k in state) and any("lora_b" in k for k in state)
    assert any(t.abs().sum() > 0 for k, t in state.items() if "lora_b" in k), (
        "lora_b never moved away from its zero initialization"
    )
