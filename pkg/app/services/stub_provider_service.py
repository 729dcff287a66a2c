import hashlib
import string
from functools import lru_cache
from typing import List, Sequence, Set

import numpy as np

from app.core.exceptions import ContractError
from app.services.provider_service import Candidate, ProviderService

_HASH_KEY = b"cam-stub-v1"
NO_CONTEXT = "NO_CONTEXT"


@lru_cache(maxsize=65536)
def _token_hash(token: str) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    return int.from_bytes(digest, "little")


class StubProvider:
    """
    Deterministic offline provider: hashed bag-of-words embeddings, first-sentence
    summaries, cosine-threshold selection. Stateless, so safe across threads.
    """

    def __init__(self, dim: int = 256, tau_sel: float = 0.30):
        self.dim = dim
        self.tau_sel = tau_sel

    @staticmethod
    def tokens(text: str) -> List[str]:
        cleaned = (t.lower().strip(string.punctuation) for t in text.split())
        return [t for t in cleaned if t]

    def bucket(self, token: str) -> int:
        return _token_hash(token) % self.dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in self.tokens(text):
            vec[self.bucket(token)] += 1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def embed_batch(self, texts: Sequence[str]) -> List[List[float]]:
        if any(not t.strip() for t in texts):
            raise ContractError("embed_batch needs non-empty texts")
        return [self.embed(t).tolist() for t in texts]

    def summarize(self, texts: Sequence[str], level: int) -> str:
        if not texts:
            raise ContractError("summarize needs at least one text")
        return " ".join([f"SUMMARY[{level}]:"] + [self._first_sentence(t) for t in texts])

    @staticmethod
    def _first_sentence(text: str) -> str:
        stop = text.find(".")
        if stop >= 0:
            return text[:stop + 1].strip()
        return " ".join(text.split()[:20])

    def select_relevant(self, query: str, candidates: Sequence[Candidate]) -> Set[str]:
        if not candidates:
            raise ContractError("select_relevant needs at least one candidate")
        q = self.embed(query)
        return {
            node_id for node_id, text in candidates
            if ProviderService.cosine(q, self.embed(text)) >= self.tau_sel
        }

    def answer(self, query: str, context_blocks: Sequence[str]) -> str:
        if not context_blocks:
            return NO_CONTEXT
        q = self.embed(query)
        scored = [(-ProviderService.cosine(q, self.embed(b)), i) for i, b in enumerate(context_blocks)]
        best = sorted(scored)[:3]
        return "\n\n".join(context_blocks[i] for _, i in best)
