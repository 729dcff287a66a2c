from typing import Dict, Iterable, List, Set

from app.core.exceptions import InvariantError
from app.schemas.replica import ReplicaId


class ClusterRegistry:
    """Cluster labels of one level's replicas."""

    def __init__(self, level: int):
        self.level = level
        self.label_of: Dict[ReplicaId, int] = {}
        self.members: Dict[int, Set[ReplicaId]] = {}
        # labels whose member texts changed since their summary was written
        self.dirty: Set[int] = set()
        # labels reported to the level above at least once
        self.published: Set[int] = set()
        self.next_label = 0

    def clone(self) -> "ClusterRegistry":
        twin = ClusterRegistry(self.level)
        twin.label_of = dict(self.label_of)
        twin.members = {label: set(reps) for label, reps in self.members.items()}
        twin.dirty = set(self.dirty)
        twin.published = set(self.published)
        twin.next_label = self.next_label
        return twin

    def fresh_label(self) -> int:
        label = self.next_label
        self.next_label += 1
        return label

    def label(self, rid: ReplicaId) -> int:
        try:
            return self.label_of[rid]
        except KeyError:
            raise InvariantError(f"replica {rid} carries no label at level {self.level}") from None

    def assign(self, rid: ReplicaId, label: int) -> None:
        previous = self.label_of.get(rid)
        if previous == label:
            return
        if previous is not None:
            self.members[previous].discard(rid)
        self.label_of[rid] = label
        self.members.setdefault(label, set()).add(rid)
        self.next_label = max(self.next_label, label + 1)

    def release(self, rid: ReplicaId) -> int:
        """Forget a replica; returns the label it carried."""
        label = self.label_of.pop(rid)
        self.members[label].discard(rid)
        return label

    def live_labels(self) -> List[int]:
        return sorted(label for label, reps in self.members.items() if reps)

    def labels_of(self, rids: Iterable[ReplicaId]) -> Set[int]:
        return {self.label_of[rid] for rid in rids if rid in self.label_of}
