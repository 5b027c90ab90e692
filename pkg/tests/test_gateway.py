from __future__ import annotations

import hashlib
import json
import threading

import pytest

from sotapipe.contexts import ContextKind
from sotapipe.errors import EndpointUnreachable, SchemaViolation, UnknownInstanceId
from sotapipe.gateway import (
    EndpointConfig,
    export_prompts,
    import_predictions,
    run_remote,
)
from sotapipe.prompts import UNANSWERABLE, GoldAnswer, PromptInstance

from mock_endpoint import MockEndpoint, completion


def _instances(n: int) -> list[PromptInstance]:
    gold = GoldAnswer((), UNANSWERABLE)
    return [
        PromptInstance(
            instance_id=f"p{i}#squad_1#DocTAET",
            paper_id=f"p{i}",
            template_id="squad_1",
            context_kind=ContextKind.DOC_TAET,
            prompt=f"PROMPT-{i}",
            gold=gold,
        )
        for i in range(n)
    ]


def _config(url: str, **kw) -> EndpointConfig:
    defaults = dict(base_url=url, model_name="mock", timeout=5.0,
                    max_retries=3, max_in_flight=3, retry_backoff=0.01)
    defaults.update(kw)
    return EndpointConfig(**defaults)


# ---------------------------------------------------------------------------
# file transport
# ---------------------------------------------------------------------------

def test_export_three_instances(tmp_path):
    path = tmp_path / "prompts.jsonl"
    export_prompts(_instances(3), path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    rows = [json.loads(line) for line in lines]
    assert [r["id"] for r in rows] == [i.instance_id for i in _instances(3)]


def test_export_round_trip(tmp_path):
    path = tmp_path / "prompts.jsonl"
    instances = _instances(5)
    export_prompts(instances, path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows == [i.to_dict() for i in instances]


def test_export_deterministic_hash(tmp_path):
    instances = _instances(75)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    export_prompts(instances, a)
    export_prompts(instances, b)
    assert len(a.read_text().splitlines()) == 75
    assert hashlib.sha256(a.read_bytes()).hexdigest() == hashlib.sha256(b.read_bytes()).hexdigest()


def test_import_mirror(tmp_path):
    path = tmp_path / "preds.jsonl"
    rows = [{"id": f"p{i}#squad_1#DocTAET", "output": f"out-{i}"} for i in range(4)]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    predictions = import_predictions(path)
    assert [p.instance_id for p in predictions] == [r["id"] for r in rows]
    assert [p.raw_output for p in predictions] == [r["output"] for r in rows]


def test_import_missing_output_names_line(tmp_path):
    path = tmp_path / "preds.jsonl"
    path.write_text('{"id": "a", "output": "x"}\n{"id": "b"}\n')
    with pytest.raises(SchemaViolation, match=":2"):
        import_predictions(path)


def test_import_duplicate_last_wins(tmp_path, caplog):
    path = tmp_path / "preds.jsonl"
    path.write_text('{"id": "a", "output": "first"}\n{"id": "a", "output": "second"}\n')
    with caplog.at_level("WARNING"):
        predictions = import_predictions(path)
    assert predictions == [type(predictions[0])("a", "second")]
    assert any("duplicate" in m for m in caplog.messages)


def test_import_unknown_id(tmp_path):
    path = tmp_path / "preds.jsonl"
    path.write_text('{"id": "ghost", "output": "x"}\n')
    with pytest.raises(UnknownInstanceId, match="ghost"):
        import_predictions(path, known_ids={"a"})


# ---------------------------------------------------------------------------
# remote runs
# ---------------------------------------------------------------------------

def test_echo_endpoint_all_ok():
    instances = _instances(6)
    with MockEndpoint(lambda body: completion(body["prompt"])) as mock:
        run = run_remote(instances, _config(mock.base_url))
    assert run.ok_ids() == {i.instance_id for i in instances}
    for inst in instances:
        assert run.outputs[inst.instance_id] == inst.prompt


def test_transient_failures_retried_and_permanent_400_isolated(tmp_path):
    instances = _instances(5)
    flaky_prompt = "PROMPT-1"
    bad_prompt = "PROMPT-3"
    failures = {"n": 0}
    lock = threading.Lock()

    def behavior(body):
        prompt = body["prompt"]
        if prompt == bad_prompt:
            return 400, {"error": "rejected"}
        if prompt == flaky_prompt:
            with lock:
                if failures["n"] < 2:
                    failures["n"] += 1
                    return 503, {"error": "busy"}
        return completion("answer:" + prompt)

    with MockEndpoint(behavior) as mock:
        run = run_remote(instances, _config(mock.base_url), run_id="r1", state_dir=tmp_path)

    statuses = run.statuses
    assert statuses["p3#squad_1#DocTAET"].state == "failed"
    assert "400" in statuses["p3#squad_1#DocTAET"].reason
    ok = {iid for iid, s in statuses.items() if s.state == "ok"}
    assert ok == {f"p{i}#squad_1#DocTAET" for i in (0, 1, 2, 4)}
    # the flaky instance succeeded on its third attempt: 2 retries logged
    assert statuses["p1#squad_1#DocTAET"].attempts == 3
    events = [json.loads(l) for l in (tmp_path / "r1.events.jsonl").read_text().splitlines()]
    retries = [e for e in events if e["event"] == "retry" and e["instance_id"] == "p1#squad_1#DocTAET"]
    assert len(retries) == 2


def test_bounded_concurrency():
    instances = _instances(12)
    with MockEndpoint(lambda body: completion("x"), latency=0.05) as mock:
        run_remote(instances, _config(mock.base_url, max_in_flight=3))
        assert mock.max_active <= 3
        assert mock.request_count == 12


def test_resumability(tmp_path):
    instances = _instances(4)
    bad = "PROMPT-2"

    def behavior(body):
        if body["prompt"] == bad:
            return 400, None
        return completion("ok")

    with MockEndpoint(behavior) as mock:
        first = run_remote(instances, _config(mock.base_url), run_id="rr", state_dir=tmp_path)
        assert len(first.ok_ids()) == 3
        count_after_first = mock.request_count
        second = run_remote(instances, _config(mock.base_url), run_id="rr", state_dir=tmp_path)
        # only the failed instance is re-requested
        assert mock.request_count == count_after_first + 1
    assert second.ok_ids() == first.ok_ids()
    assert second.outputs.keys() == first.outputs.keys()


def test_endpoint_unreachable():
    instances = _instances(2)
    config = _config("http://127.0.0.1:9", max_retries=0)
    with pytest.raises(EndpointUnreachable):
        run_remote(instances, config)


def test_every_instance_has_a_status():
    instances = _instances(3)
    with MockEndpoint(lambda body: completion("y")) as mock:
        run = run_remote(instances, _config(mock.base_url))
    assert set(run.statuses) == {i.instance_id for i in instances}


def test_openai_style_choices_accepted():
    with MockEndpoint(lambda body: (200, {"choices": [{"text": "alt"}]})) as mock:
        run = run_remote(_instances(1), _config(mock.base_url))
    assert list(run.outputs.values()) == ["alt"]
