import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple

from app.core.exceptions import ProviderError
from app.core.store import MemoryStore
from app.models.hierarchy import MemoryHierarchy, abstraction_id
from app.schemas.cluster import ChangeKind, ClusterChange
from app.schemas.corpus import Chunk, Document
from app.schemas.engine import EngineConfig
from app.schemas.memory import Edge, GraphDelta, MemoryNode, NodeKind
from app.schemas.report import LevelReport, UpdateReport
from app.schemas.retrieval import RetrievalTrace
from app.services.cluster_service import ClusterService
from app.services.ego_split_service import EgoSplitService
from app.services.graph_service import GraphService
from app.services.ingest_service import IngestService
from app.services.provider_service import MemoryProvider
from app.services.retrieval_service import RetrievalService

logger = logging.getLogger(__name__)


@contextmanager
def _timed(entry: LevelReport, step: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        entry.step_seconds[step] = entry.step_seconds.get(step, 0.0) + time.perf_counter() - start


class HierarchyService:
    """
    The three-step development procedure, applied level by level.
    """

    @staticmethod
    def integrate_batch(
        h: MemoryHierarchy,
        chunks: Sequence[Chunk],
        provider: MemoryProvider,
        report: Optional[UpdateReport] = None,
    ) -> UpdateReport:
        """
        Integrate one batch of chunks into `h` in place.

        Step 1 links the chunks into the foundational network; steps 2-3 (replica
        rebuild, label propagation) then run on every level the change reaches,
        each level's cluster changes becoming the next level's node changes.

        Raises:
            ProviderError: embedding or summarization failed (h is then garbage;
                callers work on a copy)
        """
        report = report or UpdateReport()
        report.batch_chunks = len(chunks)
        if not chunks:
            report.level_count = h.level_count
            return report

        cfg = h.config
        entry = report.level(0)
        with _timed(entry, "embed"):
            vectors = provider.embed_batch([c.text for c in chunks])
            if len(vectors) != len(chunks):
                raise ProviderError(f"embedder returned {len(vectors)} vectors for {len(chunks)} chunks")
        with _timed(entry, "expand"):
            nodes = [GraphService.chunk_node(c, v) for c, v in zip(chunks, vectors)]
            expansion = GraphService.expand(h.levels[0].graph, nodes, cfg)

        delta = GraphDelta.from_expansion(expansion)
        level = 0
        while not delta.is_empty():
            delta = HierarchyService.develop_level(h, level, delta, provider, report)
            level += 1

        report.level_count = h.level_count
        report.levels.sort(key=lambda e: e.level)
        return report

    @staticmethod
    def develop_level(
        h: MemoryHierarchy,
        level: int,
        delta: GraphDelta,
        provider: MemoryProvider,
        report: UpdateReport,
    ) -> GraphDelta:
        """Apply `delta` at `level`, recluster locally, and return the delta for level + 1."""
        cfg = h.config
        lvl = h.levels[level]
        g, rn, registry = lvl.graph, lvl.replicas, lvl.registry
        entry = report.level(level)

        entry.nodes_added += len(delta.added_nodes)
        entry.nodes_removed += len(delta.removed_nodes)
        entry.nodes_updated += len(delta.updated_nodes)
        entry.edges_added += len(delta.added_edges)
        entry.edges_removed += len(delta.removed_edges)

        text_changed = [n.node_id for n in delta.updated_nodes if g.node(n.node_id).text != n.text]
        with _timed(entry, "apply"):
            affected = g.apply(delta)
        entry.affected_nodes += len(affected)

        # Step 2: replicas of the affected nodes
        with _timed(entry, "ego_split"):
            rd = EgoSplitService.rebuild_replicas(affected, g, rn, cfg)
        entry.replicas_recomputed += len(rd.recomputed)
        entry.replicas_added += len(rd.added)
        entry.replicas_removed += len(rd.removed)

        # Step 3: labels
        with _timed(entry, "label_propagation"):
            retired = ClusterService.retire(rd.removed, registry)
            rd.removed_labels = retired
            ClusterService.init_labels(rd.added, registry, rd.inherited, retired)
            for node_id in text_changed:
                registry.dirty |= registry.labels_of(rep.replica_id for rep in rn.replicas_of(node_id))

            touched = {rid for rid in rd.touched_replicas() | set(rd.updated) if rid in rn}
            seed = set(rd.added) | touched
            outcome = ClusterService.propagate(seed, rn, registry, cfg.max_lp_iters, fresh=rd.added)
            entry.label_evaluations += len(outcome.evaluated)
            entry.lp_rounds += outcome.rounds

            dirty = set(registry.dirty)
            modified = (outcome.modified | set(retired.values())
                        | registry.labels_of(seed) | dirty)
            changes = ClusterService.finalize(modified, rn, registry)
        entry.clusters_modified += len(changes)

        return HierarchyService._lift(h, level, changes, dirty, provider, report)

    @staticmethod
    def _lift(
        h: MemoryHierarchy,
        level: int,
        changes: List[ClusterChange],
        dirty: Set[int],
        provider: MemoryProvider,
        report: UpdateReport,
    ) -> GraphDelta:
        if level + 1 < h.level_count:
            if not changes:
                return GraphDelta()
            return HierarchyService.refresh_abstractions(h, changes, level, provider, report, dirty)

        if HierarchyService.level_should_grow(h, level) and h.config.may_grow_to(level + 1):
            h.add_level()
            registry = h.levels[level].registry
            created = [
                ClusterChange(
                    label=label,
                    member_node_ids=sorted({rid.node for rid in registry.members[label]}),
                    change_kind=ChangeKind.CREATED,
                )
                for label in registry.live_labels()
            ]
            logger.info(f"✓ Level {level + 1} created from {len(created)} clusters of level {level}")
            return HierarchyService.refresh_abstractions(h, created, level, provider, report, set())
        return GraphDelta()

    @staticmethod
    def level_should_grow(h: MemoryHierarchy, level: int) -> bool:
        """
        True iff the level has more than min_level_size clusters and nodes, and
        its clusters compress it (fewer clusters than nodes).
        """
        lvl = h.levels[level]
        floor = h.config.min_level_size
        clusters, nodes = len(lvl.registry.live_labels()), len(lvl.graph)
        return clusters > floor and nodes > floor and clusters < nodes

    @staticmethod
    def refresh_abstractions(
        h: MemoryHierarchy,
        changes: List[ClusterChange],
        level: int,
        provider: MemoryProvider,
        report: Optional[UpdateReport] = None,
        dirty: Optional[Set[int]] = None,
    ) -> GraphDelta:
        """
        Turn cluster changes at `level` into node and edge changes at `level + 1`.

        Created and updated clusters are (re)summarized and embedded, singletons
        promote their member verbatim, dissolved clusters drop their node.
        Inter-cluster edges are recomputed for every changed cluster.

        Args:
            changes: output of ClusterService.finalize at `level`
            dirty: labels whose member texts changed (forces a new summary)

        Returns:
            GraphDelta to apply at level + 1 (nothing is applied here)
        """
        report = report or UpdateReport()
        dirty = dirty or set()
        cfg = h.config
        up = level + 1
        below, upper = h.levels[level], h.levels[up].graph
        entry = report.level(up)
        delta = GraphDelta()

        pending = []
        refreshed: List[int] = []
        with _timed(entry, "summarize"):
            for change in changes:
                aid = abstraction_id(up, change.label)
                existing = upper.nodes.get(aid)
                if change.change_kind == ChangeKind.DISSOLVED:
                    if existing is not None:
                        delta.removed_nodes.append(aid)
                    continue

                refreshed.append(change.label)
                members = tuple(change.member_node_ids)
                if existing is not None and existing.members == members and change.label not in dirty:
                    continue
                member_nodes = sorted((below.graph.node(m) for m in members), key=MemoryNode.sort_key)
                if len(member_nodes) == 1:
                    only = member_nodes[0]
                    HierarchyService._place(delta, existing, MemoryNode(
                        node_id=aid, level=up, kind=NodeKind.ABSTRACTION,
                        text=only.text, embedding=only.embedding, members=members,
                    ))
                else:
                    pending.append((aid, members, [n.text for n in member_nodes], existing))

            if pending:
                def summarize(item) -> str:
                    return provider.summarize(item[2], up)

                with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                    summaries = list(pool.map(summarize, pending))
                vectors = provider.embed_batch(summaries)
                if len(vectors) != len(summaries):
                    raise ProviderError(f"embedder returned {len(vectors)} vectors for {len(summaries)} summaries")
                for (aid, members, _, existing), text, vec in zip(pending, summaries, vectors):
                    HierarchyService._place(delta, existing, MemoryNode(
                        node_id=aid, level=up, kind=NodeKind.ABSTRACTION,
                        text=text, embedding=tuple(vec), members=members,
                    ))
        entry.summaries_regenerated += len(pending)

        with _timed(entry, "links"):
            removed = set(delta.removed_nodes)
            added: Set[Edge] = set()
            dropped = set()
            for label in sorted(set(refreshed)):
                aid = abstraction_id(up, label)
                want = {
                    abstraction_id(up, below.registry.label_of[nbr])
                    for rid in below.registry.members[label]
                    for nbr in below.replicas.neighbors(rid)
                    if below.registry.label_of[nbr] != label
                }
                have = set(upper.neighbors(aid))
                for other in want - have:
                    added.add((min(aid, other), max(aid, other), 1.0))
                for other in have - want:
                    if other not in removed:
                        dropped.add((min(aid, other), max(aid, other)))
            delta.added_edges = sorted(added)
            delta.removed_edges = sorted(dropped)
        return delta

    @staticmethod
    def _place(delta: GraphDelta, existing: Optional[MemoryNode], node: MemoryNode) -> None:
        if existing is None:
            delta.added_nodes.append(node)
        elif existing != node:
            delta.updated_nodes.append(node)

    @staticmethod
    def stats(h: MemoryHierarchy) -> Dict[str, Any]:
        """Per-level counts plus the share of chunks with two or more parents."""
        levels = []
        for index, lvl in enumerate(h.levels):
            levels.append({
                "level": index,
                "nodes": len(lvl.graph),
                "edges": lvl.graph.edge_count(),
                "replicas": len(lvl.replicas),
                "clusters": len(lvl.registry.live_labels()),
            })
        multi = 0.0
        if h.level_count > 1 and len(h.levels[0].graph):
            multi = len(h.upward(0).multi_parent_nodes()) / len(h.levels[0].graph)
        return {"level_count": h.level_count, "levels": levels, "multi_parent_fraction": multi}


class MemoryEngine:
    """
    Embeddable façade: one memory, one provider, batch-atomic writes.
    """

    def __init__(
        self,
        config: EngineConfig,
        provider: MemoryProvider,
        hierarchy: Optional[MemoryHierarchy] = None,
    ):
        self.config = config
        self.provider = provider
        self.store = MemoryStore(config, hierarchy)

    @property
    def hierarchy(self) -> MemoryHierarchy:
        return self.store.snapshot

    def integrate_batch(self, chunks: Sequence[Chunk]) -> UpdateReport:
        """
        Integrate one batch atomically: on any failure the memory stays at the last commit.
        """
        report = UpdateReport(batch_chunks=len(chunks))
        if not chunks:
            report.level_count = self.hierarchy.level_count
            return report
        start = time.perf_counter()
        with self.store.session() as working:
            HierarchyService.integrate_batch(working, chunks, self.provider, report)
        report.wall_seconds = time.perf_counter() - start
        logger.info(
            f"✓ Batch of {len(chunks)} chunks committed in {report.wall_seconds:.3f}s "
            f"({report.level_count} levels, {report.summaries_regenerated} summaries)"
        )
        return report

    def integrate_documents(self, documents: Sequence[Document], batch_size: int) -> List[UpdateReport]:
        chunks = IngestService.split_documents(documents, self.config.chunk_size)
        return [self.integrate_batch(batch) for batch in IngestService.make_batches(chunks, batch_size)]

    def psi(self, level: int, node_id: str) -> Set[str]:
        return self.hierarchy.psi(level, node_id)

    def respond(self, query: str) -> Tuple[str, RetrievalTrace]:
        return RetrievalService.respond(query, self.hierarchy, self.provider)

    def explain(self, query: str) -> RetrievalTrace:
        return self.respond(query)[1]

    def stats(self) -> Dict[str, Any]:
        return HierarchyService.stats(self.hierarchy)

