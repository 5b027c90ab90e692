"""Exchange prompts and predictions with external model runners.

Two transports: JSONL files (export/import) and a completion-style HTTP
endpoint (``POST {base_url}/completions`` with ``{model, prompt, max_tokens,
temperature}``). Remote runs retry transient failures with exponential
backoff, keep at most ``max_in_flight`` requests outstanding, and persist an
append-only event ledger so interrupted runs resume by ``run_id``.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .errors import EndpointUnreachable, SchemaViolation, UnknownInstanceId
from .jsonio import dump_jsonl, load_jsonl
from .prompts import PromptInstance
from .scoring import Prediction

log = logging.getLogger(__name__)

OK = "ok"
FAILED = "failed"
PENDING = "pending"


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str = "local"
    max_new_tokens: int = 512
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    retry_backoff: float = 0.5
    bearer_token: str | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass
class InstanceStatus:
    state: str = PENDING
    attempts: int = 0
    reason: str | None = None


@dataclass
class InferenceRun:
    run_id: str
    statuses: dict[str, InstanceStatus] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    def predictions(self) -> list[Prediction]:
        return [Prediction(iid, self.outputs[iid]) for iid in self.outputs]

    def ok_ids(self) -> set[str]:
        return {iid for iid, s in self.statuses.items() if s.state == OK}


# ---------------------------------------------------------------------------
# file transport
# ---------------------------------------------------------------------------

def export_prompts(instances: Sequence[PromptInstance], path: str | Path) -> int:
    """Write the prompt-set JSONL; byte-deterministic for identical input."""
    if not instances:
        raise ValueError("refusing to export an empty prompt set")
    return dump_jsonl((inst.to_dict() for inst in instances), path)


def import_predictions(path: str | Path, known_ids: set[str] | None = None) -> list[Prediction]:
    """Read a predictions JSONL ({id, output} per line).

    Unknown ids are rejected with their line number when `known_ids` is
    given; duplicate ids keep the last occurrence with a warning.
    """
    by_id: dict[str, str] = {}
    for lineno, row in load_jsonl(path):
        if not isinstance(row, dict) or "id" not in row:
            raise SchemaViolation(f"{path}:{lineno}: missing 'id'")
        if "output" not in row:
            raise SchemaViolation(f"{path}:{lineno}: missing 'output'")
        iid = row["id"]
        if not isinstance(iid, str) or not isinstance(row["output"], str):
            raise SchemaViolation(f"{path}:{lineno}: 'id' and 'output' must be strings")
        if known_ids is not None and iid not in known_ids:
            raise UnknownInstanceId(f"{path}:{lineno}: unknown instance id {iid!r}")
        if iid in by_id:
            log.warning("%s:%d: duplicate prediction for %s, keeping the last", path, lineno, iid)
        by_id[iid] = row["output"]
    return [Prediction(iid, out) for iid, out in by_id.items()]


# ---------------------------------------------------------------------------
# HTTP transport
# ---------------------------------------------------------------------------

def _extract_completion(payload: dict) -> str:
    completions = payload.get("completions", payload.get("choices"))
    if not isinstance(completions, list) or not completions:
        raise ValueError("response carries no completions")
    first = completions[0]
    if isinstance(first, str):
        return first
    if isinstance(first, dict) and isinstance(first.get("text"), str):
        return first["text"]
    raise ValueError("first completion carries no text")


class _EventLedger:
    """Append-only JSONL ledger of per-instance status events."""

    def __init__(self, path: Path | None):
        self.path = path
        self._lock = threading.Lock()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, event: dict) -> None:
        if self.path is None:
            return
        line = json.dumps(event, separators=(",", ":"), ensure_ascii=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def load_completed(self) -> dict[str, tuple[str, int]]:
        """instance_id -> (output, attempts) for events already marked ok."""
        done: dict[str, tuple[str, int]] = {}
        if self.path is None or not self.path.exists():
            return done
        for _, event in load_jsonl(self.path):
            if event.get("event") == OK:
                done[event["instance_id"]] = (event.get("output", ""), event.get("attempt", 1))
        return done


def run_remote(
    instances: Sequence[PromptInstance],
    config: EndpointConfig,
    run_id: str = "run",
    state_dir: str | Path | None = None,
) -> InferenceRun:
    """Post every prompt to the endpoint; resumable and bounded-concurrency.

    Transient failures (timeouts, connection errors, 5xx) are retried up to
    ``max_retries`` times with exponential backoff; 4xx responses mark the
    instance failed and the run continues. EndpointUnreachable is raised only
    when not a single request produced an HTTP response.
    """
    ledger = _EventLedger(Path(state_dir) / f"{run_id}.events.jsonl" if state_dir else None)
    run = InferenceRun(run_id)
    for inst in instances:
        run.statuses[inst.instance_id] = InstanceStatus()

    completed = ledger.load_completed()
    pending: list[PromptInstance] = []
    for inst in instances:
        prior = completed.get(inst.instance_id)
        if prior is not None:
            output, attempts = prior
            run.statuses[inst.instance_id] = InstanceStatus(OK, attempts)
            run.outputs[inst.instance_id] = output
        else:
            pending.append(inst)

    url = config.base_url.rstrip("/") + "/completions"
    headers = {"Content-Type": "application/json"}
    if config.bearer_token:
        headers["Authorization"] = f"Bearer {config.bearer_token}"
    got_response = threading.Event()
    if not pending:
        return run

    def work(inst: PromptInstance) -> tuple[str, InstanceStatus, str | None]:
        body = {
            "model": config.model_name,
            "prompt": inst.prompt,
            "max_tokens": config.max_new_tokens,
            "temperature": config.temperature,
        }
        status = InstanceStatus()
        for attempt in range(1, config.max_retries + 2):
            status.attempts = attempt
            retriable = None
            try:
                resp = requests.post(url, json=body, headers=headers, timeout=config.timeout)
                got_response.set()
                if resp.status_code >= 500:
                    retriable = f"server error {resp.status_code}"
                elif resp.status_code >= 400:
                    status.state = FAILED
                    status.reason = f"non-retriable status {resp.status_code}"
                    ledger.append(_event(run_id, inst, FAILED, attempt, status.reason))
                    return inst.instance_id, status, None
                else:
                    text = _extract_completion(resp.json())
                    status.state = OK
                    ledger.append(_event(run_id, inst, OK, attempt, output=text))
                    return inst.instance_id, status, text
            except (requests.Timeout, requests.ConnectionError) as e:
                retriable = type(e).__name__
            except (ValueError, json.JSONDecodeError) as e:
                got_response.set()
                status.state = FAILED
                status.reason = f"bad response payload: {e}"
                ledger.append(_event(run_id, inst, FAILED, attempt, status.reason))
                return inst.instance_id, status, None
            if attempt <= config.max_retries:
                ledger.append(_event(run_id, inst, "retry", attempt, retriable))
                time.sleep(config.retry_backoff * 2 ** (attempt - 1))
            else:
                status.state = FAILED
                status.reason = f"{retriable} after {attempt} attempts"
                ledger.append(_event(run_id, inst, FAILED, attempt, status.reason))
        return inst.instance_id, status, None

    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        for iid, status, text in pool.map(work, pending):
            run.statuses[iid] = status
            if text is not None:
                run.outputs[iid] = text

    if not got_response.is_set():
        raise EndpointUnreachable(
            f"no request against {config.base_url} produced an HTTP response"
        )
    n_failed = sum(1 for s in run.statuses.values() if s.state == FAILED)
    if n_failed:
        log.warning("run %s: %d/%d instances failed", run_id, n_failed, len(instances))
    return run


def _event(
    run_id: str,
    inst: PromptInstance,
    kind: str,
    attempt: int,
    reason: str | None = None,
    output: str | None = None,
) -> dict:
    event = {
        "run_id": run_id,
        "instance_id": inst.instance_id,
        "event": kind,
        "attempt": attempt,
        "ts": time.time(),
    }
    if reason is not None:
        event["reason"] = reason
    if output is not None:
        event["output"] = output
    return event
