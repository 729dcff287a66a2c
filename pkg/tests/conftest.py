import threading
from typing import Dict, List, Optional, Sequence, Set

import numpy as np
import pytest

from app.core.exceptions import ProviderError
from app.schemas.corpus import Chunk
from app.schemas.engine import EngineConfig
from app.services.bench_service import MARKER_REPEATS, TOPICS, VOCAB_PER_CHUNK, BenchService
from app.services.hierarchy_service import MemoryEngine
from app.services.stub_provider_service import StubProvider


# =========================================================
# Providers
# =========================================================

class TableProvider(StubProvider):
    """Stub provider with hand-picked vectors for known texts."""

    def __init__(self, table: Dict[str, Sequence[float]], dim: int, tau_sel: float = 0.30):
        super().__init__(dim=dim, tau_sel=tau_sel)
        self.table = {text: np.asarray(vec, dtype=np.float64) for text, vec in table.items()}

    def embed(self, text: str) -> np.ndarray:
        if text in self.table:
            return self.table[text]
        return super().embed(text)


class CountingProvider:
    """Wraps a provider, counts calls, and optionally fails at one call index."""

    def __init__(self, inner, fail_at: Optional[int] = None):
        self.inner = inner
        self.fail_at = fail_at
        self.calls: List[str] = []
        self._lock = threading.Lock()

    def _tick(self, name: str) -> None:
        with self._lock:
            index = len(self.calls)
            self.calls.append(name)
        if self.fail_at is not None and index == self.fail_at:
            raise ProviderError(f"injected failure at call {index} ({name})", status_code=503)

    def embed_batch(self, texts):
        self._tick("embed_batch")
        return self.inner.embed_batch(texts)

    def summarize(self, texts, level):
        self._tick("summarize")
        return self.inner.summarize(texts, level)

    def select_relevant(self, query, candidates) -> Set[str]:
        self._tick("select_relevant")
        return self.inner.select_relevant(query, candidates)

    def answer(self, query, context_blocks):
        self._tick("answer")
        return self.inner.answer(query, context_blocks)


@pytest.fixture
def stub() -> StubProvider:
    return StubProvider(dim=256)


# =========================================================
# Configs
# =========================================================

@pytest.fixture
def config() -> EngineConfig:
    return EngineConfig(workers=1)


def make_chunk(doc_id: str, seq: int, text: str) -> Chunk:
    return Chunk(doc_id=doc_id, seq_index=seq, text=text, approx_tokens=len(text.split()))


# =========================================================
# Butterfly: two triangles sharing one chunk
# =========================================================

BUTTERFLY_TEXTS = {
    "a": "apples grow on trees",
    "b": "orchards full of apples",
    "c": "rivers reach the sea",
    "d": "the sea takes every river",
    "v": "apples floating down a river",
}


def butterfly_table(dim: int = 8) -> Dict[str, List[float]]:
    e1, e2 = np.zeros(dim), np.zeros(dim)
    e1[0], e2[1] = 1.0, 1.0
    mixed = (e1 + e2) / np.sqrt(2.0)
    vectors = {"a": e1, "b": e1, "c": e2, "d": e2, "v": mixed}
    return {BUTTERFLY_TEXTS[key]: vec.tolist() for key, vec in vectors.items()}


@pytest.fixture
def butterfly_config() -> EngineConfig:
    return EngineConfig(theta=0.3, min_level_size=1, embedding_dim=8, workers=1)


@pytest.fixture
def butterfly_provider() -> TableProvider:
    return TableProvider(butterfly_table(8), dim=8)


@pytest.fixture
def butterfly_chunks() -> List[Chunk]:
    # one document per chunk: no positional proximity between them
    return [make_chunk(key, 0, text) for key, text in BUTTERFLY_TEXTS.items()]


@pytest.fixture
def butterfly_engine(butterfly_config, butterfly_provider, butterfly_chunks) -> MemoryEngine:
    engine = MemoryEngine(butterfly_config, butterfly_provider)
    engine.integrate_batch(butterfly_chunks)
    return engine


# =========================================================
# Synthetic corpora
# =========================================================

@pytest.fixture(scope="session")
def synthetic_corpus():
    """200 chunks, four stub-separable topic blocks of 50."""
    return BenchService.synthetic_corpus(200, seed=7)


@pytest.fixture(scope="session")
def mixed_chunks() -> List[Chunk]:
    """
    Topic blocks of 10 chunks cycling through the topics, with one bridge chunk
    ("t1 t1 t1 t2 t2 t2") between consecutive blocks. Bridges link to the last
    chunk before them and the first chunk after them, which are not linked to
    each other.
    """
    vocab = BenchService.topic_vocabulary(StubProvider(dim=256))
    rng = np.random.default_rng(11)
    chunks: List[Chunk] = []
    seq = 0
    block = 0
    while seq < 200:
        topic = TOPICS[block % len(TOPICS)]
        for _ in range(10):
            if seq >= 200:
                break
            words = [topic] * MARKER_REPEATS + list(rng.choice(vocab[topic], VOCAB_PER_CHUNK))
            chunks.append(make_chunk("mixed", seq, " ".join(words)))
            seq += 1
        following = TOPICS[(block + 1) % len(TOPICS)]
        if seq < 200:
            text = " ".join([topic] * MARKER_REPEATS + [following] * MARKER_REPEATS)
            chunks.append(make_chunk("mixed", seq, text))
            seq += 1
        block += 1
    return chunks
