import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from app.core.exceptions import ContractError
from app.schemas.bench import BenchResult
from app.schemas.corpus import Document
from app.schemas.engine import EngineConfig
from app.services.hierarchy_service import MemoryEngine
from app.services.ingest_service import IngestService
from app.services.stub_provider_service import StubProvider

logger = logging.getLogger(__name__)

TOPICS = ("alpha", "beta", "gamma", "delta")
MARKER_REPEATS = 3
VOCAB_PER_CHUNK = 13
CHUNK_WORDS = MARKER_REPEATS + VOCAB_PER_CHUNK
VOCAB_SIZE = 40
CSV_HEADER = "batch_size,mean_batch_s,p95_batch_s,replicas_recomputed_mean,offline_rebuild_s,speedup"


@dataclass
class SyntheticCorpus:
    documents: List[Document]
    # chunk node_id -> topic marker
    topic_of: Dict[str, str] = field(default_factory=dict)
    vocab: Dict[str, List[str]] = field(default_factory=dict)
    chunk_size: int = CHUNK_WORDS


class BenchService:
    """
    Seeded synthetic corpora and the batch-size scaling benchmark.
    """

    @staticmethod
    def topic_vocabulary(stub: StubProvider, topics: Sequence[str] = TOPICS, size: int = VOCAB_SIZE) -> Dict[str, List[str]]:
        """
        Per-topic words whose stub buckets never meet another topic's buckets,
        so chunks of different topics have cosine 0.

        Raises:
            ContractError: two topic markers share a bucket at this dimension
        """
        marker_buckets = {stub.bucket(t): t for t in topics}
        if len(marker_buckets) != len(topics):
            raise ContractError(f"topic markers collide at embedding_dim={stub.dim}")
        free = [b for b in range(stub.dim) if b not in marker_buckets]
        owner = {b: topics[i % len(topics)] for i, b in enumerate(free)}
        if len(free) < len(topics):
            raise ContractError(f"embedding_dim={stub.dim} too small for {len(topics)} topics")

        vocab: Dict[str, List[str]] = {}
        for topic in topics:
            words: List[str] = []
            j = 0
            while len(words) < size:
                word = f"{topic}{j:02d}"
                if owner.get(stub.bucket(word)) == topic:
                    words.append(word)
                j += 1
            vocab[topic] = words
        return vocab

    @staticmethod
    def synthetic_corpus(n_chunks: int, seed: int = 7, dim: int = 256, topics: Sequence[str] = TOPICS) -> SyntheticCorpus:
        """
        One document made of len(topics) contiguous topic blocks. Every chunk is
        its topic marker three times plus 13 words of that topic's vocabulary,
        so splitting the document at CHUNK_WORDS reproduces the chunks exactly.
        """
        rng = np.random.default_rng(seed)
        vocab = BenchService.topic_vocabulary(StubProvider(dim=dim), topics, VOCAB_SIZE)
        base, extra = divmod(n_chunks, len(topics))
        texts: List[str] = []
        labels: List[str] = []
        for i, topic in enumerate(topics):
            for _ in range(base + (1 if i < extra else 0)):
                words = [topic] * MARKER_REPEATS + list(rng.choice(vocab[topic], VOCAB_PER_CHUNK))
                texts.append(" ".join(words))
                labels.append(topic)

        doc = Document(doc_id="synthetic", text=" ".join(texts))
        corpus = SyntheticCorpus(documents=[doc], vocab=vocab)
        for seq, topic in enumerate(labels):
            corpus.topic_of[f"{doc.doc_id}#{seq:06d}"] = topic
        return corpus

    @staticmethod
    def bench(
        n_chunks: int,
        batch_sizes: Sequence[int],
        seed: int,
        config: EngineConfig,
    ) -> List[BenchResult]:
        """
        Ingest one synthetic corpus at each batch size with stub providers and
        compare the mean batch time to one offline build of the final state.
        """
        cfg = config.model_copy(update={"chunk_size": CHUNK_WORDS})
        corpus = BenchService.synthetic_corpus(n_chunks, seed=seed, dim=cfg.embedding_dim)
        chunks = IngestService.split_documents(corpus.documents, cfg.chunk_size)

        offline = MemoryEngine(cfg, StubProvider(cfg.embedding_dim, cfg.tau_sel))
        start = time.perf_counter()
        offline.integrate_batch(chunks)
        offline_s = time.perf_counter() - start
        logger.info(f"Offline build of {len(chunks)} chunks: {offline_s:.3f}s")

        results = []
        for batch_size in batch_sizes:
            engine = MemoryEngine(cfg, StubProvider(cfg.embedding_dim, cfg.tau_sel))
            times, recomputed, bounds = [], [], []
            for batch in IngestService.make_batches(chunks, batch_size):
                start = time.perf_counter()
                report = engine.integrate_batch(batch)
                times.append(time.perf_counter() - start)
                recomputed.append(report.level(0).replicas_recomputed)

                graph = engine.hierarchy.levels[0].graph
                new_ids = {c.node_id for c in batch}
                touched = set().union(*(graph.neighbors(v).keys() for v in new_ids)) - new_ids
                bounds.append(len(new_ids) + len(touched))

            result = BenchResult(
                batch_size=batch_size,
                per_batch_wall_time=times,
                replicas_recomputed=recomputed,
                affected_bound=bounds,
                offline_rebuild_time=offline_s,
            )
            logger.info(f"✓ batch_size={batch_size}: mean {result.mean_batch_s:.4f}s, speedup {result.speedup_ratio:.1f}x")
            results.append(result)
        return results

    @staticmethod
    def csv_lines(results: Sequence[BenchResult]) -> List[str]:
        lines = [CSV_HEADER]
        for r in results:
            p95 = float(np.percentile(r.per_batch_wall_time, 95))
            recomputed = float(np.mean(r.replicas_recomputed)) if r.replicas_recomputed else 0.0
            lines.append(
                f"{r.batch_size},{r.mean_batch_s:.6f},{p95:.6f},{recomputed:.2f},"
                f"{r.offline_rebuild_time:.6f},{r.speedup_ratio:.3f}"
            )
        return lines
