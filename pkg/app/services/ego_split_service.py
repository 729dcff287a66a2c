import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, FrozenSet, Iterable, List, Set

from app.models.level_graph import LevelGraph
from app.models.replica_network import ReplicaNetwork, canonical_edge
from app.schemas.engine import EngineConfig
from app.schemas.replica import ISOLATED, Replica, ReplicaDelta, ReplicaEdge, ReplicaId

logger = logging.getLogger(__name__)

Component = FrozenSet[str]


class EgoSplitService:
    """
    Ego-centric disentanglement: one replica per connected component of a
    node's ego-network, replica edges remapped from the original edges.
    """

    @staticmethod
    def ego_components(v: str, g: LevelGraph) -> List[Component]:
        """
        Connected components of the subgraph induced by v's neighbours (v excluded),
        ordered by smallest member. Edge weights are ignored.
        """
        nbrs = set(g.neighbors(v))
        components: List[Component] = []
        unseen = set(nbrs)
        for start in sorted(nbrs):
            if start not in unseen:
                continue
            unseen.discard(start)
            stack, comp = [start], {start}
            while stack:
                u = stack.pop()
                for w in g.neighbors(u):
                    if w in unseen:
                        unseen.discard(w)
                        comp.add(w)
                        stack.append(w)
            components.append(frozenset(comp))
        return components

    @staticmethod
    def node_components(v: str, g: LevelGraph, disentangle: bool = True) -> List[Component]:
        if disentangle:
            return EgoSplitService.ego_components(v, g)
        nbrs = g.neighbors(v)
        return [frozenset(nbrs)] if nbrs else []

    @staticmethod
    def replicas_from(v: str, components: List[Component]) -> List[Replica]:
        if not components:
            return [Replica(replica_id=ReplicaId(v, ISOLATED), component=frozenset())]
        return [Replica(replica_id=ReplicaId(v, min(c)), component=c) for c in components]

    @staticmethod
    def map_edge(u: str, v: str, g: LevelGraph, rn: ReplicaNetwork) -> ReplicaEdge:
        """
        (u^i, v^j) with v in C_u^i and u in C_v^j.

        Raises:
            InvariantError: replica sets are stale for this edge
        """
        return canonical_edge(rn.replica_for(u, v), rn.replica_for(v, u))

    @staticmethod
    def rebuild_replicas(
        affected: Iterable[str],
        g: LevelGraph,
        rn: ReplicaNetwork,
        cfg: EngineConfig,
    ) -> ReplicaDelta:
        """
        Recompute the replicas of the affected nodes and every replica edge incident to them.

        Component analysis runs as a parallel map over the affected nodes; the
        reconcile step is serial and in id order, so results do not depend on
        scheduling. A replica whose id survives keeps its label; a new replica
        inherits from the overlapping old replica with the smallest anchor.

        Args:
            affected: nodes whose ego-network may have changed (removed nodes allowed)
            g: level graph, already updated
            rn: replica network of the same level, updated in place

        Returns:
            ReplicaDelta with replica and replica-edge changes
        """
        delta = ReplicaDelta()
        targets = sorted(set(affected))
        if not targets:
            return delta
        present = [v for v in targets if v in g]

        def compute(v: str) -> List[Component]:
            return EgoSplitService.node_components(v, g, cfg.disentangle)

        if cfg.workers > 1 and len(present) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                computed = dict(zip(present, pool.map(compute, present)))
        else:
            computed = {v: compute(v) for v in present}
        delta.recomputed = list(present)

        # 1. detach every replica edge touching an affected node
        old_edges: Set[ReplicaEdge] = set()
        for v in targets:
            old_edges |= rn.incident_edges(v)
        for a, b in old_edges:
            rn.remove_edge(a, b)

        # 2. reconcile replica sets
        for v in targets:
            old: Dict[ReplicaId, Replica] = {r.replica_id: r for r in rn.replicas_of(v)}
            new = EgoSplitService.replicas_from(v, computed[v]) if v in computed else []
            new_ids = {r.replica_id for r in new}

            for rid in sorted(set(old) - new_ids):
                rn.drop_replica(rid)
                delta.removed.append(rid)
            if new:
                rn.member_index[v] = {}
            for rep in new:
                rid = rep.replica_id
                if rid in old:
                    if old[rid].component != rep.component:
                        delta.updated.append(rid)
                else:
                    delta.added.append(rid)
                    heir = EgoSplitService._inherit_from(rep, new, old)
                    if heir is not None:
                        delta.inherited[rid] = heir
                rn.put_replica(rep)

        # 3. remap edges incident to affected nodes
        new_edges: Set[ReplicaEdge] = set()
        for v in present:
            for u in g.neighbors(v):
                new_edges.add(EgoSplitService.map_edge(v, u, g, rn))
        for a, b in new_edges:
            rn.add_edge(a, b)

        delta.added_edges = sorted(new_edges - old_edges)
        delta.removed_edges = sorted(old_edges - new_edges)
        logger.debug(
            f"Level {rn.level}: {len(present)} ego recomputations, "
            f"+{len(delta.added)}/-{len(delta.removed)} replicas, "
            f"+{len(delta.added_edges)}/-{len(delta.removed_edges)} replica edges"
        )
        return delta

    @staticmethod
    def _inherit_from(rep: Replica, new: List[Replica], old: Dict[ReplicaId, Replica]):
        if not old:
            return None
        ordered = sorted(old)
        isolated_before = ordered == [ReplicaId(rep.replica_id.node, ISOLATED)]
        if isolated_before:
            # first fragment of a formerly isolated node takes its label
            return ordered[0] if rep is new[0] else None
        if not rep.component:
            # node became isolated
            return ordered[0]
        overlapping = [rid for rid in ordered if old[rid].component & rep.component]
        return overlapping[0] if overlapping else None

    @staticmethod
    def offline_split(g: LevelGraph, cfg: EngineConfig) -> ReplicaNetwork:
        """Replica network of a whole graph from scratch (full rebuild path)."""
        rn = ReplicaNetwork(g.level)
        EgoSplitService.rebuild_replicas(g.nodes.keys(), g, rn, cfg)
        return rn
