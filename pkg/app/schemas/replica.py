from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, NamedTuple, Set, Tuple

from pydantic import BaseModel, ConfigDict


class ReplicaId(NamedTuple):
    """Canonical replica identity: (node, smallest member of its component).

    The sentinel anchor "" marks the single replica of an isolated node.
    """
    node: str
    anchor: str

    def __str__(self) -> str:
        return f"{self.node}^{self.anchor or '0'}"


ISOLATED = ""


class Replica(BaseModel):
    replica_id: ReplicaId
    component: FrozenSet[str]

    model_config = ConfigDict(frozen=True)


ReplicaEdge = Tuple[ReplicaId, ReplicaId]


@dataclass
class ReplicaDelta:
    added: List[ReplicaId] = field(default_factory=list)
    removed: List[ReplicaId] = field(default_factory=list)
    # same id, different component
    updated: List[ReplicaId] = field(default_factory=list)
    # new replica -> old replica whose label it took over
    inherited: Dict[ReplicaId, ReplicaId] = field(default_factory=dict)
    # label carried by each removed replica at removal time
    removed_labels: Dict[ReplicaId, int] = field(default_factory=dict)
    added_edges: List[ReplicaEdge] = field(default_factory=list)
    removed_edges: List[ReplicaEdge] = field(default_factory=list)
    recomputed: List[str] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.added or self.removed or self.updated
                    or self.added_edges or self.removed_edges)

    def touched_replicas(self) -> Set[ReplicaId]:
        """Replicas whose neighbourhood changed (endpoints of changed replica edges)."""
        touched: Set[ReplicaId] = set()
        for a, b in self.added_edges:
            touched.update((a, b))
        for a, b in self.removed_edges:
            touched.update((a, b))
        return touched
