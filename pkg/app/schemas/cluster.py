from dataclasses import dataclass, field
from enum import Enum
from typing import List, Set

from pydantic import BaseModel, Field

from app.schemas.replica import ReplicaId


class ChangeKind(str, Enum):
    CREATED = "created"
    UPDATED = "updated"
    DISSOLVED = "dissolved"


class ClusterChange(BaseModel):
    label: int = Field(..., ge=0)
    member_node_ids: List[str] = []
    change_kind: ChangeKind


@dataclass
class PropagationOutcome:
    modified: Set[int] = field(default_factory=set)
    rounds: int = 0
    converged: bool = True
    label_changes: int = 0
    # every replica whose vote was evaluated (the ripple closure)
    evaluated: Set[ReplicaId] = field(default_factory=set)
