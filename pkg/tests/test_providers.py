import json

import httpx
import numpy as np
import pytest

from app.core.config import load_settings
from app.core.exceptions import ConfigError, ContractError, ProviderError
from app.schemas.engine import ProviderConfig
from app.services.provider_service import MemoryProvider, ProviderService
from app.services.remote_provider_service import RemoteProvider
from app.services.stub_provider_service import NO_CONTEXT, StubProvider

# ==========================================
# 1. TEST STUB PROVIDER
# ==========================================

def test_stub_buckets_are_fixed():
    """Test keyed BLAKE2b bucket assignment at d=256"""
    stub = StubProvider(dim=256)
    assert [stub.bucket(t) for t in ("alpha", "beta", "gamma", "delta")] == [51, 251, 224, 50]

def test_stub_embedding_is_normalized_bag_of_words():
    """Test repeated tokens and punctuation stripping"""
    stub = StubProvider(dim=256)
    vec = np.asarray(stub.embed_batch(["Alpha, alpha!"])[0])
    assert vec[51] == pytest.approx(1.0)
    assert np.count_nonzero(vec) == 1

def test_stub_is_deterministic(stub):
    """Test equal inputs give bit-identical vectors"""
    assert stub.embed_batch(["alpha alpha"]) == stub.embed_batch(["alpha alpha"])

def test_stub_disjoint_tokens_are_orthogonal(stub):
    """Test cosine of texts with no shared bucket"""
    a, b = stub.embed_batch(["alpha", "beta"])
    assert ProviderService.cosine(a, b) == 0.0

def test_stub_rejects_blank_text(stub):
    """Test empty strings are a contract violation"""
    with pytest.raises(ContractError):
        stub.embed_batch(["fine", "  "])

def test_stub_summary_uses_first_sentences(stub):
    """Test summary format"""
    summary = stub.summarize(["Cats purr. They sleep.", "Dogs bark loudly. Then run."], level=2)
    assert summary == "SUMMARY[2]: Cats purr. Dogs bark loudly."

def test_stub_summary_without_period_keeps_twenty_words(stub):
    """Test fallback to the first 20 words"""
    text = " ".join(f"w{i}" for i in range(30))
    assert stub.summarize([text], 1) == "SUMMARY[1]: " + " ".join(f"w{i}" for i in range(20))

def test_stub_select_by_threshold(stub):
    """Test cosine >= tau_sel selection"""
    picked = stub.select_relevant("alpha", [("x", "alpha"), ("y", "beta"), ("z", "alpha beta")])
    assert picked == {"x", "z"}

def test_stub_select_needs_candidates(stub):
    """Test empty candidate list"""
    with pytest.raises(ContractError):
        stub.select_relevant("alpha", [])

def test_stub_answer(stub):
    """Test best blocks first, and the no-context reply"""
    assert stub.answer("alpha", []) == NO_CONTEXT
    answer = stub.answer("alpha", ["beta", "alpha", "gamma", "delta"])
    assert answer.split("\n\n")[0] == "alpha"
    assert len(answer.split("\n\n")) == 3

def test_stub_satisfies_provider_protocol(stub):
    """Test structural typing"""
    assert isinstance(stub, MemoryProvider)

def test_create_stub_uses_engine_dimension():
    """Test factory wiring from settings"""
    provider = ProviderService.create(load_settings(embedding_dim=64), stub=True)
    assert len(provider.embed_batch(["alpha"])[0]) == 64

def test_cosine_of_zero_vector():
    """Test the zero-vector convention"""
    assert ProviderService.cosine([0.0, 0.0], [1.0, 0.0]) == 0.0

# ==========================================
# 2. TEST REMOTE PROVIDER (mock transport)
# ==========================================

@pytest.fixture
def provider_config(monkeypatch) -> ProviderConfig:
    monkeypatch.setenv("CAM_TEST_KEY", "sk-test")
    return ProviderConfig(
        endpoint_url="https://llm.example/v1",
        api_key_env_name="CAM_TEST_KEY",
        max_retries=2,
        retry_backoff=0,
    )


def chat_reply(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def embedding_reply(inputs) -> dict:
    # reversed on purpose: the client must reorder by index
    rows = [{"index": i, "embedding": [float(i), 1.0]} for i in range(len(inputs))]
    return {"data": list(reversed(rows))}


def test_missing_api_key(monkeypatch):
    """Test that no key in the environment is a config error"""
    monkeypatch.delenv("CAM_MISSING_KEY", raising=False)
    with pytest.raises(ConfigError):
        RemoteProvider(ProviderConfig(endpoint_url="https://x", api_key_env_name="CAM_MISSING_KEY"))

def test_embeddings_are_reordered_and_split(provider_config):
    """Test index ordering and sub-batches of 100"""
    sizes = []

    def handler(request: httpx.Request) -> httpx.Response:
        assert request.url.path == "/v1/embeddings"
        assert request.headers["authorization"] == "Bearer sk-test"
        inputs = json.loads(request.content)["input"]
        sizes.append(len(inputs))
        return httpx.Response(200, json=embedding_reply(inputs))

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    vectors = provider.embed_batch([f"text {i}" for i in range(150)])
    assert sizes == [100, 50]
    assert vectors[0] == [0.0, 1.0]
    assert vectors[149] == [49.0, 1.0]

def test_retries_then_succeeds(provider_config):
    """Test 429 and 503 are retried"""
    statuses = iter([429, 503, 200])

    def handler(request: httpx.Request) -> httpx.Response:
        status = next(statuses)
        if status != 200:
            return httpx.Response(status, json={"error": "busy"})
        return httpx.Response(200, json=chat_reply("A summary."))

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    assert provider.summarize(["text"], 1) == "A summary."

def test_retries_exhausted(provider_config):
    """Test max_retries + 1 attempts, then ProviderError with the status"""
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(1)
        return httpx.Response(500)

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderError) as excinfo:
        provider.embed_batch(["text"])
    assert len(calls) == 3
    assert excinfo.value.status_code == 500
    assert "(HTTP 500)" in str(excinfo.value)

def test_client_errors_fail_at_once(provider_config):
    """Test 401 is not retried"""
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(1)
        return httpx.Response(401)

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderError) as excinfo:
        provider.answer("q", ["block"])
    assert len(calls) == 1
    assert excinfo.value.status_code == 401

def test_transport_errors_are_retried(provider_config):
    """Test connection failures count as retryable"""
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(1)
        raise httpx.ConnectError("refused", request=request)

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderError) as excinfo:
        provider.summarize(["x"], 1)
    assert len(calls) == 3
    assert excinfo.value.status_code is None

def test_chat_is_deterministic_request(provider_config):
    """Test temperature 0, model name and level in the prompt"""
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen.update(json.loads(request.content))
        return httpx.Response(200, json=chat_reply("ok"))

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    provider.summarize(["first", "second"], 3)
    assert seen["temperature"] == 0
    assert seen["model"] == "gpt-4o-mini"
    assert "level 3" in seen["messages"][0]["content"]
    assert seen["messages"][1]["content"] == "first\n\nsecond"

def test_selection_parsing(provider_config):
    """Test JSON array replies, unknown ids dropped, and the substring fallback"""
    replies = iter(['Here you go: ["n1", "n9"]', "I would pick n2 only"])

    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json=chat_reply(next(replies)))

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    candidates = [("n1", "one"), ("n2", "two")]
    assert provider.select_relevant("q", candidates) == {"n1"}
    assert provider.select_relevant("q", candidates) == {"n2"}

def test_selection_fallback_matches_whole_ids(provider_config):
    """Test an id inside a longer id is not picked"""
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json=chat_reply("Relevant: d#0000012 and A1:000003."))

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    candidates = [("d#000001", "one"), ("d#0000012", "two"), ("A1:000003", "three"), ("A1:00000", "four")]
    assert provider.select_relevant("q", candidates) == {"d#0000012", "A1:000003"}

def test_dimension_change_is_rejected(provider_config):
    """Test a provider switching dimension mid-session"""
    dims = iter([2, 3])

    def handler(request: httpx.Request) -> httpx.Response:
        dim = next(dims)
        return httpx.Response(200, json={"data": [{"index": 0, "embedding": [1.0] * dim}]})

    provider = RemoteProvider(provider_config, transport=httpx.MockTransport(handler))
    provider.embed_batch(["a"])
    with pytest.raises(ProviderError):
        provider.embed_batch(["b"])
