import logging
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Optional, Set

from app.models.cluster_registry import ClusterRegistry
from app.models.replica_network import ReplicaNetwork
from app.schemas.cluster import ChangeKind, ClusterChange, PropagationOutcome
from app.schemas.replica import ReplicaId

logger = logging.getLogger(__name__)


class ClusterService:
    """
    Incremental label propagation over a replica network.
    """

    # =========================================================
    # Labels for new / vanished replicas
    # =========================================================

    @staticmethod
    def retire(removed: Iterable[ReplicaId], registry: ClusterRegistry) -> Dict[ReplicaId, int]:
        """Drop labels of removed replicas; returns replica -> label it carried."""
        return {rid: registry.release(rid) for rid in sorted(removed) if rid in registry.label_of}

    @staticmethod
    def init_labels(
        new_replicas: Iterable[ReplicaId],
        registry: ClusterRegistry,
        inherited: Optional[Mapping[ReplicaId, ReplicaId]] = None,
        retired: Optional[Mapping[ReplicaId, int]] = None,
    ) -> None:
        """
        Fresh singleton label for every new replica, unless it inherited one.
        Labelled replicas are left alone.
        """
        inherited = inherited or {}
        retired = retired or {}
        for rid in sorted(new_replicas):
            if rid in registry.label_of:
                continue
            source = inherited.get(rid)
            if source is not None and source in registry.label_of:
                registry.assign(rid, registry.label_of[source])
            elif source is not None and source in retired:
                registry.assign(rid, retired[source])
            else:
                registry.assign(rid, registry.fresh_label())

    # =========================================================
    # Propagation
    # =========================================================

    @staticmethod
    def vote(rid: ReplicaId, rn: ReplicaNetwork, labels: Mapping[ReplicaId, int]) -> int:
        """
        Majority label among rid's neighbours (unweighted).

        Ties keep the current label if it is among the winners, else the smallest
        label wins. A replica whose label is absent around it only listens to
        neighbours that are anchored in their own label or precede it in id order.
        """
        current = labels[rid]
        nbrs = rn.neighbors(rid)
        if not nbrs:
            return current
        counts = Counter(labels[n] for n in nbrs)
        if current not in counts:
            voters = [n for n in nbrs if n < rid or ClusterService._anchored(n, rn, labels)]
            if not voters:
                return current
            counts = Counter(labels[n] for n in voters)
        top = max(counts.values())
        if counts.get(current) == top:
            return current
        return min(label for label, c in counts.items() if c == top)

    @staticmethod
    def _anchored(rid: ReplicaId, rn: ReplicaNetwork, labels: Mapping[ReplicaId, int]) -> bool:
        own = labels[rid]
        return any(labels[n] == own for n in rn.neighbors(rid))

    @staticmethod
    def propagate(
        seed: Iterable[ReplicaId],
        rn: ReplicaNetwork,
        registry: ClusterRegistry,
        max_iters: int,
        fresh: Iterable[ReplicaId] = (),
    ) -> PropagationOutcome:
        """
        Synchronous label propagation restricted to the active set.

        The active set starts at `seed`; whenever an existing (non-fresh) replica
        changes label its neighbours join the active set. Stops after a round with
        no change or after max_iters rounds.

        Returns:
            PropagationOutcome with every label whose member set changed
        """
        fresh = set(fresh)
        active: Set[ReplicaId] = {rid for rid in seed if rid in rn}
        outcome = PropagationOutcome()
        if not active:
            return outcome
        labels = registry.label_of

        outcome.converged = False
        for _ in range(max_iters):
            outcome.rounds += 1
            outcome.evaluated |= active
            # Jacobi round: every vote reads the pre-round labels
            proposals = {rid: ClusterService.vote(rid, rn, labels) for rid in sorted(active)}
            changed = {rid: lab for rid, lab in proposals.items() if lab != labels[rid]}
            if not changed:
                outcome.converged = True
                break
            for rid, lab in changed.items():
                outcome.modified.update((labels[rid], lab))
                registry.assign(rid, lab)
                outcome.label_changes += 1
                if rid not in fresh:
                    active |= rn.neighbors(rid)

        if not outcome.converged:
            logger.warning(
                f"Level {rn.level}: label propagation stopped at the {max_iters}-round cap"
            )
        return outcome

    # =========================================================
    # Finalization
    # =========================================================

    @staticmethod
    def components(members: Set[ReplicaId], rn: ReplicaNetwork) -> List[Set[ReplicaId]]:
        """Connected components of the replica subgraph induced by `members`, by smallest member."""
        return rn.components(members)

    @staticmethod
    def finalize(
        modified: Iterable[int],
        rn: ReplicaNetwork,
        registry: ClusterRegistry,
    ) -> List[ClusterChange]:
        """
        Repair connectivity of the modified clusters and report them with node ids.

        A disconnected cluster keeps its label on the component holding its
        smallest replica; the other components get fresh labels (reported as
        created). Empty published clusters are reported dissolved.
        """
        changes: List[ClusterChange] = []
        queue = sorted(set(modified))
        for label in queue:
            members = registry.members.get(label, set())
            if not members:
                registry.members.pop(label, None)
                registry.dirty.discard(label)
                if label in registry.published:
                    registry.published.discard(label)
                    changes.append(ClusterChange(label=label, change_kind=ChangeKind.DISSOLVED))
                continue

            parts = ClusterService.components(members, rn)
            for part in parts[1:]:
                split_label = registry.fresh_label()
                for rid in part:
                    registry.assign(rid, split_label)
                changes.append(ClusterService._report(split_label, registry))
            changes.append(ClusterService._report(label, registry))

        changes.sort(key=lambda c: c.label)
        return changes

    @staticmethod
    def _report(label: int, registry: ClusterRegistry) -> ClusterChange:
        kind = ChangeKind.UPDATED if label in registry.published else ChangeKind.CREATED
        registry.published.add(label)
        registry.dirty.discard(label)
        nodes = sorted({rid.node for rid in registry.members[label]})
        return ClusterChange(label=label, member_node_ids=nodes, change_kind=kind)
