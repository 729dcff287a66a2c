import heapq
import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from app.core.exceptions import ContractError, EmptyMemoryError, ProviderError, RetrievalError
from app.models.hierarchy import MemoryHierarchy
from app.schemas.memory import MemoryNode
from app.schemas.retrieval import CandidateRound, RetrievalTrace
from app.services.ingest_service import IngestService
from app.services.provider_service import MemoryProvider

logger = logging.getLogger(__name__)


class RetrievalService:
    """
    Prune-and-grow retrieval: global top-s localization, then selector-guided
    expansion to same-level neighbours and children.
    """

    @staticmethod
    def _node_index(h: MemoryHierarchy) -> Dict[str, MemoryNode]:
        return {nid: node for lvl in h.levels for nid, node in lvl.graph.nodes.items()}

    @staticmethod
    def localize(
        query: str,
        h: MemoryHierarchy,
        provider: MemoryProvider,
        s: Optional[int] = None,
    ) -> List[str]:
        """
        Exact top-s nodes over all levels by cosine to the query; ties by id.

        Raises:
            EmptyMemoryError: the hierarchy has no nodes
        """
        if h.is_empty():
            raise EmptyMemoryError()
        s = s or h.config.s

        index = RetrievalService._node_index(h)
        ids = sorted(index)
        matrix = np.array([index[i].embedding for i in ids], dtype=np.float64)
        if query.strip():
            q = np.asarray(provider.embed_batch([query])[0], dtype=np.float64)
        else:
            # blank text embeds to the zero vector; every cosine is 0
            q = np.zeros(matrix.shape[1], dtype=np.float64)
        if matrix.shape[1] != q.shape[0]:
            raise ContractError(f"query embedding has dimension {q.shape[0]}, memory uses {matrix.shape[1]}")

        denom = np.linalg.norm(matrix, axis=1) * np.linalg.norm(q)
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.where(denom > 0, (matrix @ q) / denom, 0.0)
        best = heapq.nsmallest(s, ((-float(scores[i]), node_id) for i, node_id in enumerate(ids)))
        return [node_id for _, node_id in best]

    @staticmethod
    def _select(query: str, ids: Sequence[str], index: Dict[str, MemoryNode], provider: MemoryProvider) -> Set[str]:
        try:
            picked = provider.select_relevant(query, [(i, index[i].text) for i in ids])
        except ProviderError as e:
            raise RetrievalError(f"selector failed during exploration: {e}") from e
        return set(picked) & set(ids)

    @staticmethod
    def explore(
        query: str,
        candidates: Sequence[str],
        h: MemoryHierarchy,
        provider: MemoryProvider,
        max_hops: Optional[int] = None,
    ) -> RetrievalTrace:
        """
        Grow the activated set P from the localized candidates.

        Each round offers the same-level neighbours and children of every node
        in P that were never offered before. Stops when a round activates
        nothing, nothing new can be offered, or max_hops rounds have run.

        Raises:
            RetrievalError: the selector failed (no partial result)
        """
        max_hops = h.config.max_hops if max_hops is None else max_hops
        index = RetrievalService._node_index(h)
        trace = RetrievalTrace(query=query)

        offered: Set[str] = set(candidates)
        activated = RetrievalService._select(query, candidates, index, provider)
        trace.candidate_rounds.append(CandidateRound(offered=list(candidates), activated=sorted(activated)))
        order: List[str] = sorted(activated)

        while activated and trace.hops_used < max_hops:
            frontier: Set[str] = set()
            for node_id in order:
                node = index[node_id]
                frontier.update(h.levels[node.level].graph.neighbors(node_id))
                frontier.update(node.members)
            frontier -= offered
            if not frontier:
                break
            trace.hops_used += 1
            ring = sorted(frontier)
            offered |= frontier
            activated = RetrievalService._select(query, ring, index, provider)
            trace.candidate_rounds.append(CandidateRound(offered=ring, activated=sorted(activated)))
            order.extend(sorted(activated))

        trace.final_activation = order
        return trace

    @staticmethod
    def context_order(node: MemoryNode) -> Tuple:
        """Abstractions first (highest level), then narrative position."""
        return (-node.level,) + node.sort_key()

    @staticmethod
    def respond(query: str, h: MemoryHierarchy, provider: MemoryProvider) -> Tuple[str, RetrievalTrace]:
        """
        Localize, explore, then answer from the activated nodes.

        Blocks are kept in context order until the next one would exceed the
        context budget; everything from there on is dropped whole.
        """
        candidates = RetrievalService.localize(query, h, provider)
        trace = RetrievalService.explore(query, candidates, h, provider)

        index = RetrievalService._node_index(h)
        nodes = sorted((index[i] for i in trace.final_activation), key=RetrievalService.context_order)
        budget, used = h.config.context_budget, 0
        for position, node in enumerate(nodes):
            cost = IngestService.approx_tokens(node.text)
            if used + cost > budget:
                trace.truncated_blocks = len(nodes) - position
                logger.warning(f"Context budget {budget} reached: dropped {trace.truncated_blocks} block(s)")
                break
            used += cost
            trace.context_blocks.append(node.text)

        answer = provider.answer(query, trace.context_blocks)
        return answer, trace
