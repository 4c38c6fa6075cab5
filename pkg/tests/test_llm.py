import json
import threading

import httpx
import pytest

from ptrlift.errors import ConfigError, ReplayLoadError, ReplayMiss, TransportError
from ptrlift.llm import (
    ChatCompletionsBackend,
    Completion,
    Conversation,
    Gateway,
    PriceSheet,
    ReplayBackend,
    Turn,
    Usage,
    UsageRecord,
    cost,
    estimate_tokens,
    load_replay,
    record_transcript,
)


def _script(*texts, usage=None):
    return [Turn("assistant", t, usage) for t in texts]


def test_replay_serves_turns_in_order():
    gw = Gateway(ReplayBackend({"c1": _script("first", "second", usage=Usage(10, 2))}))
    conv = gw.conversation("c1")
    assert gw.submit(conv, "q1") == "first"
    assert gw.submit(conv, "q2") == "second"
    assert gw.usage.rounds == 2
    assert [t.role for t in conv.turns] == ["user", "assistant", "user", "assistant"]


def test_record_then_replay_round_trip(tmp_path):
    class Echo:
        def complete(self, conv):
            return Completion(f"answer {conv.assistant_turns + 1}", Usage(5, 1))

    live = Gateway(Echo(), record_dir=tmp_path)
    conv = live.conversation("ptr")
    answers = [live.submit(conv, f"q{i}") for i in range(4)]

    replay = Gateway(load_replay(tmp_path))
    again = replay.conversation("ptr")
    assert [replay.submit(again, f"q{i}") for i in range(4)] == answers
    assert replay.usage == live.usage
    with pytest.raises(ReplayMiss) as miss:
        replay.submit(again, "q4")
    assert miss.value.turn == 5
    # the failed submission leaves the conversation unchanged
    assert len(again.turns) == 8


def test_empty_and_missing_replay_dirs(tmp_path):
    gw = Gateway(load_replay(tmp_path))
    with pytest.raises(ReplayMiss):
        gw.submit(gw.conversation("any"), "hello")
    with pytest.raises(ConfigError):
        load_replay(tmp_path / "absent")


def test_malformed_transcript(tmp_path):
    (tmp_path / "c.jsonl").write_text('{"role": "assistant", "text": "ok"}\n{"role": "assistant"\n')
    with pytest.raises(ReplayLoadError) as err:
        load_replay(tmp_path)
    assert err.value.line == 2


def test_transcript_file_layout(tmp_path):
    conv = Conversation("x")
    conv.add_user("hi")
    conv.add_assistant("yo", Usage(3, 4))
    path = record_transcript(conv, tmp_path)
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert lines == [
        {"role": "user", "text": "hi"},
        {"role": "assistant", "text": "yo", "usage": {"input_tokens": 3, "output_tokens": 4, "estimated": False}},
    ]


def test_conversation_alternation():
    conv = Conversation("x")
    with pytest.raises(ValueError):
        conv.add_assistant("too early")


def test_usage_is_additive():
    gw = Gateway(ReplayBackend({"a": [Turn("assistant", "1", Usage(100, 7)), Turn("assistant", "2", Usage(50, 3))]}))
    conv = gw.conversation("a")
    gw.submit(conv, "x", project="p", pointer="a", phase="rewrite")
    gw.submit(conv, "y", project="p", pointer="a", phase="compile-fix")
    assert (gw.usage.input_tokens, gw.usage.output_tokens) == (150, 10)
    assert gw.usage_for(phase="compile-fix").input_tokens == 50
    assert gw.usage_for(project="p").rounds == 2


def test_missing_usage_is_estimated():
    gw = Gateway(ReplayBackend({"a": [Turn("assistant", "abcdefgh")]}))
    gw.submit(gw.conversation("a"), "1234")
    assert gw.usage == UsageRecord(estimate_tokens("1234"), estimate_tokens("abcdefgh"), 1, True)


def test_decoding_parameters_are_fixed():
    gw = Gateway(ReplayBackend({}), temperature=0.0)
    conv = gw.conversation("a")
    conv.temperature = 0.7
    with pytest.raises(ValueError):
        gw.submit(conv, "x")


def test_concurrent_submissions_are_counted_once_each():
    scripts = {f"c{i}": [Turn("assistant", "r", Usage(1, 1))] * 20 for i in range(8)}
    gw = Gateway(ReplayBackend(scripts))

    def worker(cid):
        conv = gw.conversation(cid)
        for _ in range(20):
            gw.submit(conv, "q", pointer=cid)

    threads = [threading.Thread(target=worker, args=(cid,)) for cid in scripts]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert gw.usage.rounds == 160 and gw.usage.input_tokens == 160


@pytest.mark.parametrize(
    "tokens_in, tokens_out, published",
    [(46_068, 13_336, 0.015), (81_371, 27_257, 0.029), (0, 0, 0.0)],
)
def test_cost(tokens_in, tokens_out, published):
    assert abs(cost(UsageRecord(tokens_in, tokens_out)) - published) <= 0.0005


def test_negative_rates_rejected():
    with pytest.raises(ValueError):
        PriceSheet(-1, 0)


# -- HTTP backend ----------------------------------------------------------

def _backend(handler, **kw):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return ChatCompletionsBackend("http://model.test/v1", api_key="k", client=client, sleep=lambda s: None, **kw)


def test_http_backend_success():
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers["authorization"]
        return httpx.Response(200, json={
            "choices": [{"message": {"content": "&[i32]"}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 3},
        })

    gw = Gateway(_backend(handler))
    assert gw.submit(gw.conversation("a"), "question") == "&[i32]"
    assert seen["body"]["temperature"] == 0.0 and seen["body"]["model"] == "gpt-4o-mini"
    assert seen["body"]["messages"] == [{"role": "user", "content": "question"}]
    assert seen["auth"] == "Bearer k"
    assert gw.usage == UsageRecord(12, 3, 1, False)


def test_http_backend_unreachable_after_three_retries():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("refused", request=request)

    gw = Gateway(_backend(handler))
    conv = gw.conversation("a")
    with pytest.raises(TransportError):
        gw.submit(conv, "q")
    assert len(calls) == 4 and conv.turns == []


def test_http_backend_retries_rate_limits():
    replies = iter([httpx.Response(429), httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})])
    gw = Gateway(_backend(lambda r: next(replies)))
    assert gw.submit(gw.conversation("a"), "q") == "ok"


def test_http_backend_client_error_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    with pytest.raises(TransportError):
        _backend(handler).complete(Conversation("a", turns=[Turn("user", "q")]))
    assert len(calls) == 1


def test_http_backend_needs_a_key(monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    with pytest.raises(ConfigError):
        ChatCompletionsBackend()
