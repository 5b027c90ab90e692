"""Serve mode: the completion HTTP contract over a local checkpoint.

POST /completions with ``{"model", "prompt", "max_tokens", "temperature"}``
returns ``{"completions": [{"text": ...}], "model": ...}``. Requests are
handled sequentially; the calling gateway's in-flight bound provides
pipelining. Decoding is always greedy (temperature 0 semantics).
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from http.server import BaseHTTPRequestHandler, HTTPServer

from .model import load_checkpoint
from .runner import AdapterConfig, generate_one

log = logging.getLogger("sota_adapter")


def build_server(config: AdapterConfig, host: str = "127.0.0.1", port: int = 8601) -> HTTPServer:
    model = load_checkpoint(config.checkpoint_id)

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802 - http.server API
            if self.path.rstrip("/") != "/completions":
                self._reply(404, {"error": f"unknown path {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                prompt = body["prompt"]
            except (ValueError, KeyError) as e:
                self._reply(400, {"error": f"bad request: {e}"})
                return
            request_config = config
            max_tokens = body.get("max_tokens")
            if isinstance(max_tokens, int) and 0 < max_tokens < config.max_new_tokens:
                request_config = replace(config, max_new_tokens=max_tokens)
            text, _ = generate_one(model, prompt, request_config)
            self._reply(
                200,
                {"model": body.get("model", "tiny-byte-lm"), "completions": [{"text": text}]},
            )

        def _reply(self, status: int, payload: dict) -> None:
            data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            log.debug("http: " + args[0] % args[1:])

    return HTTPServer((host, port), Handler)


def serve(config: AdapterConfig, host: str = "127.0.0.1", port: int = 8601) -> None:
    server = build_server(config, host, port)
    log.info("serving completions on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
