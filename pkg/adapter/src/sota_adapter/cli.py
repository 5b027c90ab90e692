"""Command line for the adapter: init-stub, batch, serve, finetune."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import AdapterError
from .model import ModelSpec, init_checkpoint
from .runner import AdapterConfig, batch_generate, finetune
from .server import serve

log = logging.getLogger("sota_adapter")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", required=True, help="checkpoint directory")
    parser.add_argument("--context-length", type=int, default=2400)
    parser.add_argument("--max-new-tokens", type=int, default=512)


def _config(args: argparse.Namespace, mode: str, **extra) -> AdapterConfig:
    return AdapterConfig(
        checkpoint_id=args.checkpoint,
        context_length=args.context_length,
        max_new_tokens=args.max_new_tokens,
        mode=mode,
        **extra,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sota-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_init = sub.add_parser("init-stub", help="create a stub-scale random checkpoint")
    p_init.add_argument("--out", required=True)
    p_init.add_argument("--seed", type=int, default=0)
    p_init.add_argument("--d-model", type=int, default=32)
    p_init.add_argument("--layers", type=int, default=2)
    p_init.add_argument("--heads", type=int, default=2)
    p_init.add_argument("--max-positions", type=int, default=4096)

    p_batch = sub.add_parser("batch", help="file-in/file-out greedy generation")
    _add_config_flags(p_batch)
    p_batch.add_argument("--prompts", required=True)
    p_batch.add_argument("--out", required=True)

    p_serve = sub.add_parser("serve", help="expose the completion HTTP contract")
    _add_config_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8601)

    p_ft = sub.add_parser("finetune", help="low-rank adaptation on a prompt set")
    _add_config_flags(p_ft)
    p_ft.add_argument("--train", required=True)
    p_ft.add_argument("--out", required=True)
    p_ft.add_argument("--batch-size", type=int, default=2)
    p_ft.add_argument("--grad-accum", type=int, default=4)
    p_ft.add_argument("--epochs", type=int, default=5)
    p_ft.add_argument("--lr", type=float, default=1e-4)
    p_ft.add_argument("--lora-rank", type=int, default=4)
    p_ft.add_argument("--resume", action="store_true")
    p_ft.add_argument("--quantize", action="store_true")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "init-stub":
            spec = ModelSpec(
                d_model=args.d_model, n_layer=args.layers, n_head=args.heads,
                max_positions=args.max_positions,
            )
            path = init_checkpoint(args.out, spec, args.seed)
            log.info("wrote stub checkpoint to %s", path)
        elif args.command == "batch":
            batch_generate(args.prompts, _config(args, "batch"), args.out)
        elif args.command == "serve":
            serve(_config(args, "serve"), args.host, args.port)
        elif args.command == "finetune":
            config = _config(
                args, "finetune",
                batch_size=args.batch_size, grad_accum=args.grad_accum,
                epochs=args.epochs, learning_rate=args.lr,
                lora_rank=args.lora_rank, quantize=args.quantize,
            )
            finetune(args.train, config, args.out, resume=args.resume)
    except AdapterError as e:
        print(f"error: {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
