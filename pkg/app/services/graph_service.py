import heapq
import logging
import math
from typing import Dict, List, Sequence, Set, Tuple

import numpy as np

from app.core.exceptions import ContractError
from app.models.level_graph import LevelGraph
from app.schemas.corpus import Chunk
from app.schemas.engine import EngineConfig
from app.schemas.memory import Edge, ExpansionDelta, MemoryNode, NodeKind
from app.services.provider_service import ProviderService

logger = logging.getLogger(__name__)


class GraphService:
    """
    Foundational semantic network: composite scoring and batch expansion.
    """

    @staticmethod
    def chunk_node(chunk: Chunk, embedding: Sequence[float]) -> MemoryNode:
        return MemoryNode(
            node_id=chunk.node_id,
            level=0,
            kind=NodeKind.CHUNK,
            text=chunk.text,
            embedding=tuple(embedding),
            doc_id=chunk.doc_id,
            seq_index=chunk.seq_index,
        )

    @staticmethod
    def proximity(a: MemoryNode, b: MemoryNode, sigma: float) -> float:
        if a.doc_id != b.doc_id:
            return 0.0
        gap = a.seq_index - b.seq_index
        return math.exp(-(gap * gap) / (2.0 * sigma * sigma))

    @staticmethod
    def pair_score(a: MemoryNode, b: MemoryNode, cfg: EngineConfig) -> float:
        """
        alpha * clamp(cosine) + (1 - alpha) * positional proximity.

        Proximity is exp(-(i - j)^2 / (2 sigma^2)) inside one document and 0
        across documents, so the score lies in [0, 1] and is symmetric.
        """
        if a.level != 0 or b.level != 0:
            raise ContractError(f"pair_score is defined on level-0 chunks, got {a.node_id}, {b.node_id}")
        if len(a.embedding) != len(b.embedding):
            raise ContractError(
                f"embedding dimension mismatch: {len(a.embedding)} vs {len(b.embedding)}"
            )
        cos = min(max(ProviderService.cosine(a.embedding, b.embedding), 0.0), 1.0)
        return cfg.alpha * cos + (1.0 - cfg.alpha) * GraphService.proximity(a, b, cfg.sigma)

    @staticmethod
    def expand(level0: LevelGraph, new_nodes: Sequence[MemoryNode], cfg: EngineConfig) -> ExpansionDelta:
        """
        Link each new chunk to its top-k partners among existing and new chunks.

        Candidates must score above theta; ties in score go to the smaller id.
        Reciprocal picks collapse to one undirected edge. Nothing is mutated.

        Raises:
            ContractError: duplicate chunk id or embedding dimension mismatch
        """
        new_nodes = list(new_nodes)
        if not new_nodes:
            return ExpansionDelta()

        ids_new = [n.node_id for n in new_nodes]
        if len(set(ids_new)) != len(ids_new) or any(i in level0 for i in ids_new):
            raise ContractError("batch contains a chunk id that is already in memory or repeated")

        dim = len(new_nodes[0].embedding)
        if level0.index.dim is not None and level0.index.dim != dim:
            raise ContractError(f"embedding dimension mismatch: {dim} vs {level0.index.dim}")
        if any(len(n.embedding) != dim for n in new_nodes):
            raise ContractError("embedding dimension mismatch inside the batch")

        old_vecs, old_norms, old_docs, old_seqs = level0.index.view()
        doc_codes = dict(level0.index.doc_codes)
        new_vecs = np.array([n.embedding for n in new_nodes], dtype=np.float64)
        new_norms = np.linalg.norm(new_vecs, axis=1)
        new_docs = np.array([doc_codes.setdefault(n.doc_id, len(doc_codes)) for n in new_nodes], dtype=np.int64)
        new_seqs = np.array([n.seq_index for n in new_nodes], dtype=np.float64)

        pool_vecs = np.vstack([old_vecs.reshape(-1, dim), new_vecs])
        pool_norms = np.concatenate([old_norms, new_norms])
        pool_docs = np.concatenate([old_docs, new_docs])
        pool_seqs = np.concatenate([old_seqs, new_seqs])
        pool_ids = list(level0.index.ids) + ids_new
        n_old = len(level0.index.ids)

        # pool x batch score matrix
        denom = np.outer(pool_norms, new_norms)
        with np.errstate(divide="ignore", invalid="ignore"):
            cos = np.where(denom > 0, (pool_vecs @ new_vecs.T) / denom, 0.0)
        cos = np.clip(cos, 0.0, 1.0)
        gap = pool_seqs[:, None] - new_seqs[None, :]
        prox = np.where(
            pool_docs[:, None] == new_docs[None, :],
            np.exp(-(gap * gap) / (2.0 * cfg.sigma * cfg.sigma)),
            0.0,
        )
        scores = cfg.alpha * cos + (1.0 - cfg.alpha) * prox
        for col in range(len(new_nodes)):
            scores[n_old + col, col] = -np.inf

        pairs: Set[Tuple[str, str]] = set()
        for col, node_id in enumerate(ids_new):
            rows = np.nonzero(scores[:, col] > cfg.theta)[0]
            best = heapq.nsmallest(cfg.k, ((-scores[r, col], pool_ids[r]) for r in rows))
            for _, other in best:
                pairs.add((node_id, other) if node_id < other else (other, node_id))

        lookup: Dict[str, MemoryNode] = {n.node_id: n for n in new_nodes}
        edges: List[Edge] = []
        for u, v in sorted(pairs):
            a = lookup.get(u) or level0.nodes[u]
            b = lookup.get(v) or level0.nodes[v]
            weight = GraphService.pair_score(a, b, cfg)
            if weight > cfg.theta:
                edges.append((u, v, weight))

        logger.debug(f"Expansion: {len(new_nodes)} chunks, {len(edges)} edges against {n_old} prior nodes")
        return ExpansionDelta(new_nodes=new_nodes, new_edges=edges)

    @staticmethod
    def affected_set(delta: ExpansionDelta, level0: LevelGraph) -> Set[str]:
        """New nodes plus the pre-existing endpoints of new edges."""
        affected = {n.node_id for n in delta.new_nodes}
        for u, v, _ in delta.new_edges:
            affected.update((u, v))
        return affected
