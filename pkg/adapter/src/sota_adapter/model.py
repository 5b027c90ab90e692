"""A tiny byte-level causal language model with directory checkpoints.

Stub-scale stand-in for a real instruction-tuned LLM: the architecture is a
standard decoder (token + position embeddings, pre-norm attention/MLP blocks,
tied-ish LM head) over a 259-symbol byte vocabulary, so checkpoints are
self-contained and runs are CPU-deterministic.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn

from .errors import CheckpointLoadError

PAD, BOS, EOS = 256, 257, 258
VOCAB_SIZE = 259

CONFIG_FILE = "config.json"
WEIGHTS_FILE = "weights.pt"
ADAPTER_FILE = "adapter.pt"


def encode(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def decode(ids: list[int]) -> str:
    return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")


@dataclass(frozen=True)
class ModelSpec:
    d_model: int = 32
    n_layer: int = 2
    n_head: int = 2
    max_positions: int = 4096
    vocab_size: int = VOCAB_SIZE


class CausalSelfAttention(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.n_head = spec.n_head
        d = spec.d_model
        self.q_proj = nn.Linear(d, d)
        self.k_proj = nn.Linear(d, d)
        self.v_proj = nn.Linear(d, d)
        self.o_proj = nn.Linear(d, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        hd = d // self.n_head

        def split(proj):
            return proj(x).view(b, t, self.n_head, hd).transpose(1, 2)

        out = F.scaled_dot_product_attention(
            split(self.q_proj), split(self.k_proj), split(self.v_proj), is_causal=True
        )
        return self.o_proj(out.transpose(1, 2).reshape(b, t, d))


class Block(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        d = spec.d_model
        self.ln1 = nn.LayerNorm(d)
        self.attn = CausalSelfAttention(spec)
        self.ln2 = nn.LayerNorm(d)
        self.up_proj = nn.Linear(d, 4 * d)
        self.down_proj = nn.Linear(4 * d, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        return x + self.down_proj(F.gelu(self.up_proj(self.ln2(x))))


class TinyCausalLM(nn.Module):
    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        self.tok_emb = nn.Embedding(spec.vocab_size, spec.d_model)
        self.pos_emb = nn.Embedding(spec.max_positions, spec.d_model)
        self.blocks = nn.ModuleList(Block(spec) for _ in range(spec.n_layer))
        self.ln_f = nn.LayerNorm(spec.d_model)
        self.lm_head = nn.Linear(spec.d_model, spec.vocab_size, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        t = ids.shape[1]
        pos = torch.arange(t, device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.ln_f(x))

    @torch.no_grad()
    def generate(self, prompt_ids: list[int], max_new_tokens: int) -> list[int]:
        """Greedy decoding until EOS or the new-token budget."""
        self.eval()
        window = self.spec.max_positions - 1
        ids = list(prompt_ids)
        generated: list[int] = []
        for _ in range(max_new_tokens):
            context = torch.tensor([ids[-window:]], dtype=torch.long)
            logits = self(context)
            next_id = int(logits[0, -1].argmax())
            if next_id == EOS:
                break
            generated.append(next_id)
            ids.append(next_id)
        return generated


def init_checkpoint(path: str | Path, spec: ModelSpec = ModelSpec(), seed: int = 0) -> Path:
    """Create a deterministic randomly-initialized stub checkpoint directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)
    model = TinyCausalLM(spec)
    torch.save(model.state_dict(), path / WEIGHTS_FILE)
    config = {"kind": "tiny-byte-lm", "seed": seed, **asdict(spec)}
    (path / CONFIG_FILE).write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> TinyCausalLM:
    """Load a checkpoint directory; applies LoRA deltas when adapter.pt exists."""
    path = Path(path)
    config_path = path / CONFIG_FILE
    weights_path = path / WEIGHTS_FILE
    if not config_path.exists() or not weights_path.exists():
        raise CheckpointLoadError(f"{path} is not a checkpoint directory")
    try:
        config = json.loads(config_path.read_text(encoding="utf-8"))
        spec = ModelSpec(
            d_model=config["d_model"],
            n_layer=config["n_layer"],
            n_head=config["n_head"],
            max_positions=config["max_positions"],
            vocab_size=config["vocab_size"],
        )
        model = TinyCausalLM(spec)
        model.load_state_dict(torch.load(weights_path, weights_only=True))
    except (KeyError, ValueError, RuntimeError) as e:
        raise CheckpointLoadError(f"cannot load checkpoint {path}: {e}") from e
    adapter_path = path / ADAPTER_FILE
    if adapter_path.exists():
        from .lora import attach_lora, load_adapter_weights

        attach_lora(model)
        load_adapter_weights(model, adapter_path)
    return model
