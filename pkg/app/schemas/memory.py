from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, List, Tuple

from pydantic import BaseModel, Field, ConfigDict, model_validator

# (u, v, weight) with u < v
Edge = Tuple[str, str, float]


class NodeKind(str, Enum):
    CHUNK = "chunk"
    ABSTRACTION = "abstraction"


class MemoryNode(BaseModel):
    """A node of some level's graph: a raw chunk (level 0) or an abstraction summary."""
    node_id: str = Field(..., min_length=1)
    level: int = Field(..., ge=0)
    kind: NodeKind
    text: str
    embedding: Tuple[float, ...]
    doc_id: Optional[str] = None
    seq_index: Optional[int] = Field(None, ge=0)
    members: Tuple[str, ...] = ()

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def kind_matches_level(self):
        is_chunk = self.kind == NodeKind.CHUNK
        positioned = self.doc_id is not None and self.seq_index is not None
        if is_chunk != (self.level == 0) or is_chunk != positioned:
            raise ValueError("kind=chunk <=> level=0 <=> doc_id and seq_index present")
        if not is_chunk and not self.members:
            raise ValueError("abstraction nodes need at least one member")
        return self

    def sort_key(self) -> tuple:
        """Narrative order: document, position, then id."""
        return (self.doc_id or "", -1 if self.seq_index is None else self.seq_index, self.node_id)


@dataclass
class ExpansionDelta:
    """Result of foundational expansion; applied by the caller."""
    new_nodes: List[MemoryNode] = field(default_factory=list)
    new_edges: List[Edge] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not self.new_nodes and not self.new_edges


@dataclass
class GraphDelta:
    """Generic change set for one level graph."""
    added_nodes: List[MemoryNode] = field(default_factory=list)
    removed_nodes: List[str] = field(default_factory=list)
    updated_nodes: List[MemoryNode] = field(default_factory=list)
    added_edges: List[Edge] = field(default_factory=list)
    removed_edges: List[Tuple[str, str]] = field(default_factory=list)

    @classmethod
    def from_expansion(cls, delta: ExpansionDelta) -> "GraphDelta":
        return cls(added_nodes=list(delta.new_nodes), added_edges=list(delta.new_edges))

    def is_empty(self) -> bool:
        return not (self.added_nodes or self.removed_nodes or self.updated_nodes
                    or self.added_edges or self.removed_edges)
