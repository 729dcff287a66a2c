from typing import Dict, Iterator, List, Set, Tuple

from app.core.exceptions import InvariantError
from app.schemas.replica import Replica, ReplicaEdge, ReplicaId


def canonical_edge(a: ReplicaId, b: ReplicaId) -> ReplicaEdge:
    return (a, b) if a <= b else (b, a)


class ReplicaNetwork:
    """
    Disentangled network of one level: each node split into one replica per
    ego-network component, replica edges in bijection with the level's edges.
    """

    def __init__(self, level: int):
        self.level = level
        self.replicas: Dict[str, Dict[ReplicaId, Replica]] = {}
        # node -> neighbour -> replica of node whose component holds that neighbour
        self.member_index: Dict[str, Dict[str, ReplicaId]] = {}
        self.adjacency: Dict[ReplicaId, Set[ReplicaId]] = {}

    def clone(self) -> "ReplicaNetwork":
        twin = ReplicaNetwork(self.level)
        twin.replicas = {node: dict(reps) for node, reps in self.replicas.items()}
        twin.member_index = {node: dict(idx) for node, idx in self.member_index.items()}
        twin.adjacency = {rid: set(nbrs) for rid, nbrs in self.adjacency.items()}
        return twin

    def __len__(self) -> int:
        return len(self.adjacency)

    def __contains__(self, rid: ReplicaId) -> bool:
        return rid in self.adjacency

    # ---------------------------------------------------------
    # Reads
    # ---------------------------------------------------------

    def replicas_of(self, node_id: str) -> List[Replica]:
        reps = self.replicas.get(node_id, {})
        return [reps[rid] for rid in sorted(reps)]

    def replica(self, rid: ReplicaId) -> Replica:
        try:
            return self.replicas[rid.node][rid]
        except KeyError:
            raise InvariantError(f"replica {rid} is not part of level {self.level}") from None

    def replica_for(self, node_id: str, neighbor_id: str) -> ReplicaId:
        """The replica of node_id whose component contains neighbor_id."""
        try:
            return self.member_index[node_id][neighbor_id]
        except KeyError:
            raise InvariantError(
                f"stale replica set: {neighbor_id} is in no component of {node_id} (level {self.level})"
            ) from None

    def neighbors(self, rid: ReplicaId) -> Set[ReplicaId]:
        return self.adjacency.get(rid, set())

    def components(self, members: Set[ReplicaId]) -> List[Set[ReplicaId]]:
        """Connected components of the subnetwork induced by `members`, by smallest member."""
        unseen = set(members)
        found: List[Set[ReplicaId]] = []
        for start in sorted(members):
            if start not in unseen:
                continue
            unseen.discard(start)
            comp, stack = {start}, [start]
            while stack:
                r = stack.pop()
                for n in self.neighbors(r):
                    if n in unseen:
                        unseen.discard(n)
                        comp.add(n)
                        stack.append(n)
            found.append(comp)
        return found

    def all_replicas(self) -> List[ReplicaId]:
        return sorted(self.adjacency)

    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency.values()) // 2

    def edges(self) -> Iterator[ReplicaEdge]:
        for rid in sorted(self.adjacency):
            for other in sorted(self.adjacency[rid]):
                if rid < other:
                    yield (rid, other)

    def incident_edges(self, node_id: str) -> Set[ReplicaEdge]:
        edges: Set[ReplicaEdge] = set()
        for rid in self.replicas.get(node_id, {}):
            for other in self.adjacency.get(rid, ()):
                edges.add(canonical_edge(rid, other))
        return edges

    # ---------------------------------------------------------
    # Writes (single writer)
    # ---------------------------------------------------------

    def put_replica(self, replica: Replica) -> None:
        rid = replica.replica_id
        self.replicas.setdefault(rid.node, {})[rid] = replica
        self.adjacency.setdefault(rid, set())
        index = self.member_index.setdefault(rid.node, {})
        for member in replica.component:
            index[member] = rid

    def drop_replica(self, rid: ReplicaId) -> None:
        if self.adjacency.get(rid):
            raise InvariantError(f"replica {rid} still has edges")
        self.adjacency.pop(rid, None)
        reps = self.replicas.get(rid.node, {})
        replica = reps.pop(rid, None)
        index = self.member_index.get(rid.node, {})
        if replica is not None:
            for member in replica.component:
                if index.get(member) == rid:
                    del index[member]
        if not reps:
            self.replicas.pop(rid.node, None)
            self.member_index.pop(rid.node, None)

    def add_edge(self, a: ReplicaId, b: ReplicaId) -> None:
        if a.node == b.node:
            raise InvariantError(f"replica self-loop on node {a.node}")
        self.adjacency[a].add(b)
        self.adjacency[b].add(a)

    def remove_edge(self, a: ReplicaId, b: ReplicaId) -> None:
        self.adjacency.get(a, set()).discard(b)
        self.adjacency.get(b, set()).discard(a)

    def signature(self) -> Tuple[tuple, tuple]:
        """Canonical (replicas, edges) view used for equality checks."""
        reps = tuple(
            (rid.node, rid.anchor, tuple(sorted(self.replica(rid).component)))
            for rid in self.all_replicas()
        )
        edges = tuple((a.node, a.anchor, b.node, b.anchor) for a, b in self.edges())
        return reps, edges
