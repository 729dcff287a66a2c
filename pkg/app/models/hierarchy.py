from dataclasses import dataclass, field
from typing import Dict, List, Set

from app.core.exceptions import InvariantError, UnknownNodeError
from app.models.cluster_registry import ClusterRegistry
from app.models.level_graph import LevelGraph
from app.models.replica_network import ReplicaNetwork
from app.schemas.engine import EngineConfig
from app.schemas.memory import NodeKind


def abstraction_id(level: int, label: int) -> str:
    """Id of the abstraction node that summarizes `label` of level-1; `level` is its own level."""
    return f"A{level}:{label:06d}"


@dataclass
class MemoryLevel:
    graph: LevelGraph
    replicas: ReplicaNetwork
    registry: ClusterRegistry

    @classmethod
    def empty(cls, level: int) -> "MemoryLevel":
        return cls(LevelGraph(level), ReplicaNetwork(level), ClusterRegistry(level))

    def clone(self) -> "MemoryLevel":
        return MemoryLevel(self.graph.clone(), self.replicas.clone(), self.registry.clone())


@dataclass
class UpwardMapping:
    """Many-to-many map from level-l nodes to the abstractions of level l+1."""
    level: int
    map: Dict[str, Set[str]] = field(default_factory=dict)

    def multi_parent_nodes(self) -> List[str]:
        return sorted(node for node, parents in self.map.items() if len(parents) >= 2)


class MemoryHierarchy:
    """M = ({G_l}, {psi_l}): every level's graph, replica network and clusters."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.levels: List[MemoryLevel] = [MemoryLevel.empty(0)]

    def clone(self) -> "MemoryHierarchy":
        twin = MemoryHierarchy(self.config)
        twin.levels = [lvl.clone() for lvl in self.levels]
        return twin

    @property
    def level_count(self) -> int:
        return len(self.levels)

    @property
    def top(self) -> int:
        return len(self.levels) - 1

    def node_count(self) -> int:
        return sum(len(lvl.graph) for lvl in self.levels)

    def is_empty(self) -> bool:
        return self.node_count() == 0

    def add_level(self) -> MemoryLevel:
        level = MemoryLevel.empty(len(self.levels))
        self.levels.append(level)
        return level

    def find_node(self, node_id: str):
        for lvl in self.levels:
            if node_id in lvl.graph:
                return lvl.graph.nodes[node_id]
        raise UnknownNodeError(f"node {node_id} not present in memory")

    # ---------------------------------------------------------
    # Upward mappings
    # ---------------------------------------------------------

    def psi(self, level: int, node_id: str) -> Set[str]:
        if level < 0 or level >= len(self.levels):
            raise UnknownNodeError(f"level {level} does not exist")
        lvl = self.levels[level]
        if node_id not in lvl.graph:
            raise UnknownNodeError(f"node {node_id} not present at level {level}")
        if level + 1 >= len(self.levels):
            return set()
        return {
            abstraction_id(level + 1, lvl.registry.label(rep.replica_id))
            for rep in lvl.replicas.replicas_of(node_id)
        }

    def upward(self, level: int) -> UpwardMapping:
        mapping = UpwardMapping(level)
        for node_id in sorted(self.levels[level].graph.nodes):
            mapping.map[node_id] = self.psi(level, node_id)
        return mapping

    # ---------------------------------------------------------
    # Full-walk checker
    # ---------------------------------------------------------

    def check_consistency(self) -> None:
        """
        Walk every level and cross-reference graphs, replicas, labels and
        abstractions.

        Raises:
            InvariantError: on the first dangling id or broken invariant found
        """
        for lvl in self.levels:
            self._check_graph(lvl.graph)
            self._check_replicas(lvl)
            self._check_labels(lvl)
        for level in range(1, len(self.levels)):
            self._check_abstractions(level)

    def _check_graph(self, g: LevelGraph) -> None:
        if set(g.adjacency) != set(g.nodes):
            raise InvariantError(f"level {g.level}: adjacency and node table disagree")
        for u, nbrs in g.adjacency.items():
            node = g.nodes[u]
            if node.level != g.level or (node.kind == NodeKind.CHUNK) != (g.level == 0):
                raise InvariantError(f"level {g.level}: node {u} has the wrong level or kind")
            for v, w in nbrs.items():
                if u == v:
                    raise InvariantError(f"level {g.level}: self-loop on {u}")
                if g.adjacency.get(v, {}).get(u) != w:
                    raise InvariantError(f"level {g.level}: edge ({u}, {v}) is not symmetric")
                if g.level == 0 and not w > self.config.theta:
                    raise InvariantError(f"level 0: edge ({u}, {v}) weight {w} <= theta")

    def _check_replicas(self, lvl: MemoryLevel) -> None:
        g, rn = lvl.graph, lvl.replicas
        if set(rn.replicas) != set(g.nodes):
            raise InvariantError(f"level {g.level}: replica owners differ from graph nodes")
        for node_id, reps in rn.replicas.items():
            seen: Set[str] = set()
            for rid, rep in reps.items():
                if rid != rep.replica_id or rid.node != node_id:
                    raise InvariantError(f"level {g.level}: replica {rid} filed under {node_id}")
                if rid not in rn.adjacency:
                    raise InvariantError(f"level {g.level}: replica {rid} missing from adjacency")
                if seen & rep.component:
                    raise InvariantError(f"level {g.level}: components of {node_id} overlap")
                seen |= rep.component
            if seen != set(g.neighbors(node_id)):
                raise InvariantError(f"level {g.level}: components of {node_id} do not cover its neighbours")
        if rn.edge_count() != g.edge_count():
            raise InvariantError(
                f"level {g.level}: {rn.edge_count()} replica edges for {g.edge_count()} edges"
            )
        for a, b in rn.edges():
            if b.node not in g.neighbors(a.node):
                raise InvariantError(f"level {g.level}: replica edge {a}-{b} has no original edge")
            if rn.replica_for(a.node, b.node) != a or rn.replica_for(b.node, a.node) != b:
                raise InvariantError(f"level {g.level}: replica edge {a}-{b} is mis-mapped")

    def _check_labels(self, lvl: MemoryLevel) -> None:
        rn, reg = lvl.replicas, lvl.registry
        if set(reg.label_of) != set(rn.adjacency):
            raise InvariantError(f"level {rn.level}: labels do not cover the replica set")
        for label, reps in reg.members.items():
            for rid in reps:
                if reg.label_of.get(rid) != label:
                    raise InvariantError(f"level {rn.level}: replica {rid} filed under label {label}")
            if label >= reg.next_label:
                raise InvariantError(f"level {rn.level}: label {label} not below next_label")
            if reps and len(rn.components(reps)) > 1:
                raise InvariantError(f"level {rn.level}: cluster {label} is not connected")

    def _check_abstractions(self, level: int) -> None:
        below, upper = self.levels[level - 1], self.levels[level].graph
        expected = {abstraction_id(level, label): label for label in below.registry.live_labels()}
        if set(expected) != set(upper.nodes):
            missing = sorted(set(expected) - set(upper.nodes))[:3]
            extra = sorted(set(upper.nodes) - set(expected))[:3]
            raise InvariantError(f"level {level}: abstractions out of sync (missing {missing}, extra {extra})")
        for node_id, label in expected.items():
            members = tuple(sorted({rid.node for rid in below.registry.members[label]}))
            if upper.nodes[node_id].members != members:
                raise InvariantError(f"level {level}: members of {node_id} differ from its cluster")
