from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple

import numpy as np

from app.core.exceptions import ContractError, UnknownNodeError
from app.schemas.memory import Edge, GraphDelta, MemoryNode, NodeKind


class EmbeddingMatrix:
    """
    Append-only row store of level-0 embeddings used for exact top-k scans.

    Clones share the underlying buffer: a clone only ever writes rows beyond
    the size its parent saw, so committed snapshots keep reading valid rows.
    """

    def __init__(self, dim: Optional[int] = None):
        self.dim = dim
        self.ids: List[str] = []
        self.doc_codes: Dict[str, int] = {}
        self._vectors: Optional[np.ndarray] = None
        self._norms: Optional[np.ndarray] = None
        self._docs: Optional[np.ndarray] = None
        self._seqs: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.ids)

    def clone(self) -> "EmbeddingMatrix":
        twin = EmbeddingMatrix(self.dim)
        twin.ids = list(self.ids)
        twin.doc_codes = dict(self.doc_codes)
        twin._vectors, twin._norms = self._vectors, self._norms
        twin._docs, twin._seqs = self._docs, self._seqs
        return twin

    def append(self, nodes: List[MemoryNode]) -> None:
        if not nodes:
            return
        if self.dim is None:
            self.dim = len(nodes[0].embedding)
        size, need = len(self.ids), len(self.ids) + len(nodes)
        capacity = 0 if self._vectors is None else self._vectors.shape[0]
        if need > capacity:
            self._grow(max(need, 2 * capacity, 64), size)
        for offset, node in enumerate(nodes):
            if len(node.embedding) != self.dim:
                raise ContractError(
                    f"embedding dimension {len(node.embedding)} != {self.dim} for {node.node_id}"
                )
            row = size + offset
            vec = np.asarray(node.embedding, dtype=np.float64)
            self._vectors[row] = vec
            self._norms[row] = np.linalg.norm(vec)
            self._docs[row] = self.doc_codes.setdefault(node.doc_id, len(self.doc_codes))
            self._seqs[row] = node.seq_index
            self.ids.append(node.node_id)

    def _grow(self, capacity: int, size: int) -> None:
        vectors = np.zeros((capacity, self.dim), dtype=np.float64)
        norms = np.zeros(capacity, dtype=np.float64)
        docs = np.zeros(capacity, dtype=np.int64)
        seqs = np.zeros(capacity, dtype=np.float64)
        if self._vectors is not None and size:
            vectors[:size] = self._vectors[:size]
            norms[:size] = self._norms[:size]
            docs[:size] = self._docs[:size]
            seqs[:size] = self._seqs[:size]
        self._vectors, self._norms, self._docs, self._seqs = vectors, norms, docs, seqs

    def view(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        n = len(self.ids)
        if self._vectors is None:
            empty = np.zeros(0)
            return np.zeros((0, self.dim or 0)), empty, empty.astype(np.int64), empty
        return self._vectors[:n], self._norms[:n], self._docs[:n], self._seqs[:n]


class LevelGraph:
    """
    Weighted undirected graph among the nodes of one level (G_l).

    adjacency[u][v] == adjacency[v][u] == weight; no self loops.
    """

    def __init__(self, level: int):
        self.level = level
        self.nodes: Dict[str, MemoryNode] = {}
        self.adjacency: Dict[str, Dict[str, float]] = {}
        self.index = EmbeddingMatrix()

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def clone(self) -> "LevelGraph":
        twin = LevelGraph(self.level)
        twin.nodes = dict(self.nodes)
        twin.adjacency = {u: dict(nbrs) for u, nbrs in self.adjacency.items()}
        twin.index = self.index.clone()
        return twin

    # ---------------------------------------------------------
    # Reads
    # ---------------------------------------------------------

    def node(self, node_id: str) -> MemoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"node {node_id} not present at level {self.level}") from None

    def neighbors(self, node_id: str) -> Dict[str, float]:
        return self.adjacency.get(node_id, {})

    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency.values()) // 2

    def edges(self) -> Iterator[Edge]:
        for u in sorted(self.adjacency):
            for v, w in sorted(self.adjacency[u].items()):
                if u < v:
                    yield (u, v, w)

    def common_neighbors(self, u: str, v: str) -> Set[str]:
        return set(self.neighbors(u)) & set(self.neighbors(v))

    # ---------------------------------------------------------
    # Writes
    # ---------------------------------------------------------

    def add_node(self, node: MemoryNode) -> None:
        if node.level != self.level:
            raise ContractError(f"node {node.node_id} has level {node.level}, graph is level {self.level}")
        if node.node_id in self.nodes:
            raise ContractError(f"node {node.node_id} already present at level {self.level}")
        self.nodes[node.node_id] = node
        self.adjacency[node.node_id] = {}
        if node.kind == NodeKind.CHUNK:
            self.index.append([node])

    def replace_node(self, node: MemoryNode) -> None:
        if node.node_id not in self.nodes:
            raise UnknownNodeError(f"node {node.node_id} not present at level {self.level}")
        self.nodes[node.node_id] = node

    def remove_node(self, node_id: str) -> List[str]:
        """Drop a node and its edges; returns its former neighbours."""
        if self.level == 0:
            raise ContractError("level-0 chunks are never removed")
        self.node(node_id)
        former = sorted(self.adjacency.pop(node_id, {}))
        for nbr in former:
            self.adjacency[nbr].pop(node_id, None)
        del self.nodes[node_id]
        return former

    def add_edge(self, u: str, v: str, weight: float) -> None:
        if u == v:
            raise ContractError(f"self-loop on {u}")
        if u not in self.nodes or v not in self.nodes:
            raise UnknownNodeError(f"edge ({u}, {v}) references an unknown node")
        self.adjacency[u][v] = weight
        self.adjacency[v][u] = weight

    def remove_edge(self, u: str, v: str) -> None:
        self.adjacency.get(u, {}).pop(v, None)
        self.adjacency.get(v, {}).pop(u, None)

    def apply(self, delta: GraphDelta) -> Set[str]:
        """
        Apply a change set and return the nodes whose ego-network may have changed.

        That is: added/removed/updated-structure nodes, former neighbours of removed
        nodes, endpoints of changed edges and their common neighbours before and after.
        """
        affected: Set[str] = set()
        changed_pairs = [(u, v) for u, v, _ in delta.added_edges] + list(delta.removed_edges)

        for u, v in changed_pairs:
            if u in self.nodes and v in self.nodes:
                affected |= self.common_neighbors(u, v)

        for node_id in delta.removed_nodes:
            affected.add(node_id)
            affected.update(self.remove_node(node_id))
        for node in delta.added_nodes:
            self.add_node(node)
            affected.add(node.node_id)
        for node in delta.updated_nodes:
            self.replace_node(node)
        for u, v in delta.removed_edges:
            self.remove_edge(u, v)
        for u, v, w in delta.added_edges:
            self.add_edge(u, v, w)

        for u, v in changed_pairs:
            affected.update((u, v))
            if u in self.nodes and v in self.nodes:
                affected |= self.common_neighbors(u, v)
        return affected

    def iter_nodes(self) -> Iterable[MemoryNode]:
        for node_id in sorted(self.nodes):
            yield self.nodes[node_id]
