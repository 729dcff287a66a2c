import logging
from typing import List, Optional, Protocol, Sequence, Set, Tuple, runtime_checkable

import httpx
import numpy as np

from app.core.config import Settings

logger = logging.getLogger(__name__)

Candidate = Tuple[str, str]


@runtime_checkable
class MemoryProvider(Protocol):
    """Embedding, summarization, selection and answering backend."""

    def embed_batch(self, texts: Sequence[str]) -> List[List[float]]: ...

    def summarize(self, texts: Sequence[str], level: int) -> str: ...

    def select_relevant(self, query: str, candidates: Sequence[Candidate]) -> Set[str]: ...

    def answer(self, query: str, context_blocks: Sequence[str]) -> str: ...


class ProviderService:

    @staticmethod
    def cosine(a: Sequence[float], b: Sequence[float]) -> float:
        """Cosine similarity; 0.0 when either vector is zero."""
        va = np.asarray(a, dtype=np.float64)
        vb = np.asarray(b, dtype=np.float64)
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(va, vb) / (na * nb))

    @staticmethod
    def create(
        settings: Settings,
        stub: bool = False,
        transport: Optional[httpx.BaseTransport] = None,
    ) -> MemoryProvider:
        """
        Build the provider selected on the command line.

        Raises:
            ConfigError: remote provider requested without an API key in the environment
        """
        # imported here: both modules import ProviderService
        from app.services.remote_provider_service import RemoteProvider
        from app.services.stub_provider_service import StubProvider

        if stub:
            logger.info(f"Using offline stub providers (d={settings.engine.embedding_dim})")
            return StubProvider(dim=settings.engine.embedding_dim, tau_sel=settings.engine.tau_sel)
        logger.info(f"Using remote providers at {settings.api_base}")
        return RemoteProvider(settings.provider_config(), transport=transport)
