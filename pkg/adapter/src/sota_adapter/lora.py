"""Minimal low-rank adapters over the attention q/v projections.

The base weights stay frozen; only the rank-decomposed deltas train. On CPU
stub models the 4-bit quantization step of the full recipe is skipped, which
keeps finetuning runnable anywhere.
"""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn

from .model import TinyCausalLM

TARGET_PROJECTIONS = ("q_proj", "v_proj")


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int = 4, alpha: float = 8.0):
        super().__init__()
        self.base = base
        self.rank = rank
        self.scale = alpha / rank
        self.lora_a = nn.Parameter(torch.randn(rank, base.in_features) * 0.01)
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        for p in self.base.parameters():
            p.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + (x @ self.lora_a.T @ self.lora_b.T) * self.scale


def attach_lora(model: TinyCausalLM, rank: int = 4, alpha: float = 8.0) -> int:
    """Wrap the target projections in-place; returns the adapter count."""
    for p in model.parameters():
        p.requires_grad_(False)
    count = 0
    for block in model.blocks:
        for name in TARGET_PROJECTIONS:
            base = getattr(block.attn, name)
            if isinstance(base, LoRALinear):
                continue
            setattr(block.attn, name, LoRALinear(base, rank, alpha))
            count += 1
    return count


def trainable_parameters(model: TinyCausalLM):
    return [p for p in model.parameters() if p.requires_grad]


def adapter_state(model: TinyCausalLM) -> dict[str, torch.Tensor]:
    return {
        name: tensor
        for name, tensor in model.state_dict().items()
        if "lora_a" in name or "lora_b" in name
    }


def save_adapter_weights(model: TinyCausalLM, path: str | Path) -> None:
    torch.save(adapter_state(model), path)


def load_adapter_weights(model: TinyCausalLM, path: str | Path) -> None:
    state = torch.load(path, weights_only=True)
    missing = model.load_state_dict(state, strict=False).unexpected_keys
    if missing:
        raise ValueError(f"unexpected adapter tensors: {missing}")
