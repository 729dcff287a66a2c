import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set

import httpx
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception,
    stop_after_attempt,
    wait_exponential,
)

from app.core.exceptions import ConfigError, ContractError, ProviderError
from app.schemas.engine import ProviderConfig
from app.services.provider_service import Candidate

logger = logging.getLogger(__name__)

PROMPTS_DIR = Path(__file__).resolve().parent.parent / "prompts"
EMBED_BATCH_LIMIT = 100


def _is_retryable(exc: BaseException) -> bool:
    if isinstance(exc, httpx.HTTPStatusError):
        code = exc.response.status_code
        return code == 429 or code >= 500
    return isinstance(exc, httpx.TransportError)


def load_prompt(name: str) -> str:
    return (PROMPTS_DIR / f"{name}.txt").read_text(encoding="utf-8").strip()


class RemoteProvider:
    """
    OpenAI-compatible embeddings + chat-completions client.

    Every request is retried at most `max_retries` times on transport errors,
    429 and 5xx; other HTTP errors fail at once.
    """

    def __init__(self, config: ProviderConfig, transport: Optional[httpx.BaseTransport] = None):
        api_key = os.environ.get(config.api_key_env_name)
        if not api_key:
            raise ConfigError(
                f"{config.api_key_env_name} is not set; export it or run with --stub-providers"
            )
        self.config = config
        self.dim: Optional[int] = None
        self._client = httpx.Client(
            base_url=config.endpoint_url.rstrip("/") + "/",
            timeout=config.timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}"},
        )
        self._prompts = {name: load_prompt(name) for name in ("summarize", "select", "answer")}

    def close(self) -> None:
        self._client.close()

    # =========================================================
    # Transport
    # =========================================================

    def _post(self, path: str, body: Dict[str, Any]) -> Dict[str, Any]:
        retryer = Retrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential(multiplier=self.config.retry_backoff, max=30),
            retry=retry_if_exception(_is_retryable),
            before_sleep=before_sleep_log(logger, logging.DEBUG),
            reraise=True,
        )
        try:
            for attempt in retryer:
                with attempt:
                    response = self._client.post(path, json=body)
                    response.raise_for_status()
                    return response.json()
        except httpx.HTTPStatusError as e:
            raise ProviderError(f"{path} failed", status_code=e.response.status_code) from e
        except httpx.TransportError as e:
            raise ProviderError(f"{path} unreachable: {e}") from e
        except ValueError as e:
            raise ProviderError(f"{path} returned malformed JSON") from e

    def _chat(self, system_prompt: str, user_content: str) -> str:
        body = {
            "model": self.config.chat_model_name,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_content},
            ],
            "temperature": 0,
        }
        data = self._post("chat/completions", body)
        try:
            content = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as e:
            raise ProviderError("chat/completions response has no message content") from e
        return content.strip()

    # =========================================================
    # Provider operations
    # =========================================================

    def embed_batch(self, texts: Sequence[str]) -> List[List[float]]:
        if any(not t.strip() for t in texts):
            raise ContractError("embed_batch needs non-empty texts")
        vectors: List[List[float]] = []
        for start in range(0, len(texts), EMBED_BATCH_LIMIT):
            part = list(texts[start:start + EMBED_BATCH_LIMIT])
            data = self._post("embeddings", {"model": self.config.embed_model_name, "input": part})
            try:
                rows = sorted(data["data"], key=lambda row: row["index"])
                batch = [list(map(float, row["embedding"])) for row in rows]
            except (KeyError, TypeError) as e:
                raise ProviderError("embeddings response is malformed") from e
            if len(batch) != len(part):
                raise ProviderError(f"embeddings returned {len(batch)} vectors for {len(part)} inputs")
            vectors.extend(batch)
        for vec in vectors:
            if self.dim is None:
                self.dim = len(vec)
            elif len(vec) != self.dim:
                raise ProviderError(f"embedding dimension changed from {self.dim} to {len(vec)}")
        return vectors

    def summarize(self, texts: Sequence[str], level: int) -> str:
        if not texts:
            raise ContractError("summarize needs at least one text")
        summary = self._chat(self._prompts["summarize"].format(level=level), "\n\n".join(texts))
        if not summary:
            raise ProviderError("summarizer returned an empty summary")
        return summary

    def select_relevant(self, query: str, candidates: Sequence[Candidate]) -> Set[str]:
        if not candidates:
            raise ContractError("select_relevant needs at least one candidate")
        listing = "\n".join(f"[{node_id}] {text}" for node_id, text in candidates)
        reply = self._chat(self._prompts["select"], f"Question: {query}\n\nCandidates:\n{listing}")
        return self._parse_selection(reply, [node_id for node_id, _ in candidates])

    @staticmethod
    def _parse_selection(reply: str, ids: List[str]) -> Set[str]:
        match = re.search(r"\[.*\]", reply, re.DOTALL)
        if match:
            try:
                picked = json.loads(match.group(0))
                if isinstance(picked, list):
                    return {str(x) for x in picked} & set(ids)
            except json.JSONDecodeError:
                pass
        # whole ids only: d#000001 must not match inside d#0000012
        return {node_id for node_id in ids if re.search(rf"(?<![\w#:]){re.escape(node_id)}(?![\w#:])", reply)}

    def answer(self, query: str, context_blocks: Sequence[str]) -> str:
        context = "\n\n---\n\n".join(context_blocks) if context_blocks else "(no memory context)"
        reply = self._chat(self._prompts["answer"], f"Context:\n{context}\n\nQuestion: {query}")
        if not reply:
            raise ProviderError("answer call returned nothing")
        return reply
