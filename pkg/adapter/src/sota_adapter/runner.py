"""Batch inference and finetuning over prompt-set JSONL files.

File contracts match the pipeline gateway: prompts arrive as JSONL rows with
``id``/``prompt`` (training rows also carry ``gold``), predictions leave as
``{"id", "output"}`` rows. Prompts longer than the context length are
truncated from the head so the question tail survives.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn
from transformers.optimization import Adafactor, AdafactorSchedule

from . import model as m
from .errors import AcceleratorUnavailable, OutOfMemory
from .lora import attach_lora, save_adapter_weights, trainable_parameters
from .model import load_checkpoint

log = logging.getLogger("sota_adapter")

TRAINING_LOG = "training_log.jsonl"
TRAINING_STATE = "training_state.json"


@dataclass(frozen=True)
class AdapterConfig:
    checkpoint_id: str
    context_length: int = 2400
    batch_size: int = 2
    grad_accum: int = 4
    epochs: int = 5
    learning_rate: float = 1e-4
    mode: str = "batch"  # serve | batch | finetune
    max_new_tokens: int = 512
    lora_rank: int = 4
    quantize: bool = False

    def __post_init__(self):
        if self.context_length <= 0:
            raise ValueError("context_length must be positive")
        if self.mode not in ("serve", "batch", "finetune"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def effective_batch_size(self) -> int:
        return self.batch_size * self.grad_accum


def _load_rows(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def truncate_prompt_ids(ids: list[int], context_length: int) -> tuple[list[int], bool]:
    """Keep the prompt tail (question + answer cue) when over budget."""
    if len(ids) <= context_length:
        return ids, False
    return ids[-context_length:], True


def generate_one(model: m.TinyCausalLM, prompt: str, config: AdapterConfig) -> tuple[str, bool]:
    ids = m.encode(prompt)
    budget = min(config.context_length, model.spec.max_positions - config.max_new_tokens - 2)
    ids, truncated = truncate_prompt_ids(ids, max(budget, 8))
    out_ids = model.generate([m.BOS] + ids, config.max_new_tokens)
    return m.decode(out_ids), truncated


def batch_generate(prompts_path: str | Path, config: AdapterConfig, out_path: str | Path) -> int:
    """One prediction line per input id, greedy decoding; returns line count."""
    model = load_checkpoint(config.checkpoint_id)
    rows = _load_rows(prompts_path)
    n_truncated = 0
    start = time.perf_counter()
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in rows:
            try:
                output, truncated = generate_one(model, row["prompt"], config)
            except (torch.OutOfMemoryError, MemoryError) as e:
                raise OutOfMemory(f"generation failed for id {row.get('id')}: {e}") from e
            n_truncated += truncated
            if truncated:
                log.info("truncated prompt %s to the last %d tokens", row.get("id"), config.context_length)
            fh.write(json.dumps({"id": row["id"], "output": output}, ensure_ascii=False) + "\n")
    log.info(
        "generated %d predictions (%d truncated) in %.1fs",
        len(rows), n_truncated, time.perf_counter() - start,
    )
    return len(rows)


# ---------------------------------------------------------------------------
# finetuning
# ---------------------------------------------------------------------------

def _example_tensors(row: dict, config: AdapterConfig) -> tuple[list[int], int]:
    """Token ids for prompt+answer and the index where the answer begins."""
    prompt_ids = m.encode(row["prompt"])
    answer_ids = m.encode("\n" + row.get("gold", "")) + [m.EOS]
    budget = max(config.context_length - len(answer_ids), 8)
    prompt_ids, _ = truncate_prompt_ids(prompt_ids, budget)
    ids = [m.BOS] + prompt_ids + answer_ids
    return ids, 1 + len(prompt_ids)


def _batches(examples: list, size: int):
    for i in range(0, len(examples), size):
        yield examples[i : i + size]


def _collate(batch: list[tuple[list[int], int]]) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(ids) for ids, _ in batch)
    inputs = torch.full((len(batch), width), m.PAD, dtype=torch.long)
    labels = torch.full((len(batch), width), -100, dtype=torch.long)
    for i, (ids, answer_start) in enumerate(batch):
        inputs[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        labels[i, answer_start : len(ids)] = torch.tensor(ids[answer_start:], dtype=torch.long)
    return inputs, labels


def finetune(
    train_path: str | Path,
    config: AdapterConfig,
    out_dir: str | Path,
    resume: bool = False,
) -> Path:
    """Low-rank adaptation with the Adafactor recipe; saves adapter weights.

    The optimizer pairs relative-step Adafactor (scale_parameter, warmup_init)
    with an AdafactorSchedule seeded at ``learning_rate``. Loss is recorded per
    optimizer step; resuming continues the step counter.
    """
    if config.quantize and not torch.cuda.is_available():
        raise AcceleratorUnavailable("quantized finetuning requires a CUDA device")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = load_checkpoint(config.checkpoint_id)
    attach_lora(model, rank=config.lora_rank)

    step = 0
    state_path = out_dir / TRAINING_STATE
    if resume and state_path.exists():
        state = json.loads(state_path.read_text(encoding="utf-8"))
        step = state["step"]
        from .lora import load_adapter_weights

        load_adapter_weights(model, out_dir / m.ADAPTER_FILE)
        log.info("resuming from step %d", step)

    log.info(
        "effective batch size: %d (batch_size=%d x gradient_accumulation=%d)",
        config.effective_batch_size, config.batch_size, config.grad_accum,
    )

    optimizer = Adafactor(
        trainable_parameters(model),
        lr=None,
        scale_parameter=True,
        relative_step=True,
        warmup_init=True,
    )
    schedule = AdafactorSchedule(optimizer, initial_lr=config.learning_rate)

    rows = _load_rows(train_path)
    examples = [_example_tensors(row, config) for row in rows]
    loss_fn = nn.CrossEntropyLoss(ignore_index=-100)
    model.train()

    log_path = out_dir / TRAINING_LOG
    mode = "a" if resume and log_path.exists() else "w"
    with open(log_path, mode, encoding="utf-8") as log_file:
        for epoch in range(config.epochs):
            accumulated = 0
            running_loss = 0.0
            for batch in _batches(examples, config.batch_size):
                inputs, labels = _collate(batch)
                logits = model(inputs)
                loss = loss_fn(
                    logits[:, :-1].reshape(-1, logits.shape[-1]),
                    labels[:, 1:].reshape(-1),
                )
                (loss / config.grad_accum).backward()
                running_loss += float(loss.detach())
                accumulated += 1
                if accumulated == config.grad_accum:
                    step = _optimizer_step(
                        optimizer, schedule, log_file, step, epoch,
                        running_loss / accumulated,
                    )
                    accumulated = 0
                    running_loss = 0.0
            if accumulated:  # flush the trailing partial accumulation
                step = _optimizer_step(
                    optimizer, schedule, log_file, step, epoch, running_loss / accumulated
                )

    save_adapter_weights(model, out_dir / m.ADAPTER_FILE)
    for name in (m.CONFIG_FILE, m.WEIGHTS_FILE):
        source = Path(config.checkpoint_id) / name
        (out_dir / name).write_bytes(source.read_bytes())
    state_path.write_text(
        json.dumps(
            {
                "step": step,
                "effective_batch_size": config.effective_batch_size,
                "epochs": config.epochs,
                "base_checkpoint": str(config.checkpoint_id),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    log.info("saved adapter checkpoint to %s (step %d)", out_dir, step)
    return out_dir


def _optimizer_step(optimizer, schedule, log_file, step: int, epoch: int, loss: float) -> int:
    optimizer.step()
    optimizer.zero_grad()
    step += 1
    record = {"step": step, "epoch": epoch, "loss": round(loss, 6), "lr": schedule.get_lr()[0]}
    log_file.write(json.dumps(record) + "\n")
    log_file.flush()
    log.info("step %d epoch %d loss %.4f", step, epoch, loss)
    return step
