import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple

from pydantic import ValidationError

from app.core.exceptions import CamError, IntegrityError, InvariantError, SnapshotError, VersionError
from app.core.store import MemoryStore
from app.models.hierarchy import MemoryHierarchy
from app.schemas.engine import EngineConfig
from app.schemas.memory import MemoryNode
from app.schemas.replica import Replica, ReplicaId

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SECTIONS = ("NODES", "EDGES", "REPLICAS", "REDGES", "LABELS", "PSI")
TRAILER = "#SHA256 "


def canonical_json(value: Any) -> str:
    """Compact JSON with sorted keys and floats written with 17 significant digits."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        return "{" + ",".join(
            f"{json.dumps(str(k), ensure_ascii=False)}:{canonical_json(v)}" for k, v in sorted(value.items())
        ) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


class SnapshotService:
    """
    Versioned, checksummed snapshot files of a whole hierarchy.
    """

    # =========================================================
    # Writing
    # =========================================================

    @staticmethod
    def _records(h: MemoryHierarchy) -> Dict[str, List[Dict[str, Any]]]:
        records: Dict[str, List[Dict[str, Any]]] = {name: [] for name in SECTIONS}
        for level, lvl in enumerate(h.levels):
            for node in lvl.graph.iter_nodes():
                records["NODES"].append({
                    "id": node.node_id, "level": level, "kind": node.kind.value, "text": node.text,
                    "embedding": [float(x) for x in node.embedding], "doc_id": node.doc_id,
                    "seq_index": node.seq_index, "members": list(node.members),
                })
            for u, v, w in lvl.graph.edges():
                records["EDGES"].append({"level": level, "u": u, "v": v, "w": float(w)})
            for rid in lvl.replicas.all_replicas():
                rep = lvl.replicas.replica(rid)
                records["REPLICAS"].append({
                    "level": level, "node": rid.node, "anchor": rid.anchor,
                    "component": sorted(rep.component),
                })
                records["LABELS"].append({
                    "level": level, "node": rid.node, "anchor": rid.anchor,
                    "label": lvl.registry.label(rid),
                })
            for a, b in lvl.replicas.edges():
                records["REDGES"].append({"level": level, "a": list(a), "b": list(b)})
            if level + 1 < h.level_count:
                for node_id, parents in h.upward(level).map.items():
                    records["PSI"].append({"level": level, "node": node_id, "parents": sorted(parents)})
        return records

    @staticmethod
    def dumps(h: MemoryHierarchy) -> bytes:
        """Canonical snapshot bytes; equal hierarchies give equal bytes."""
        header = {
            "format_version": FORMAT_VERSION,
            "config": h.config.model_dump(mode="json"),
            "next_labels": [lvl.registry.next_label for lvl in h.levels],
        }
        lines = [canonical_json(header)]
        for name, rows in SnapshotService._records(h).items():
            lines.append(f"#SECTION {name} {len(rows)}")
            lines.extend(canonical_json(row) for row in rows)
        body = ("\n".join(lines) + "\n").encode("utf-8")
        return body + f"{TRAILER}{hashlib.sha256(body).hexdigest()}\n".encode("ascii")

    @staticmethod
    def digest(h: MemoryHierarchy) -> str:
        return hashlib.sha256(SnapshotService.dumps(h)).hexdigest()

    @staticmethod
    def save(h: MemoryHierarchy, path: str) -> None:
        """
        Write a snapshot atomically (temp file in the same directory + rename).

        Raises:
            InvariantError: the hierarchy fails the full-walk check
            SnapshotError: the file could not be written
        """
        h.check_consistency()
        data = SnapshotService.dumps(h)
        target = Path(path)
        tmp_name = None
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with tempfile.NamedTemporaryFile(dir=target.parent, prefix=f".{target.name}.", delete=False) as tmp:
                tmp_name = tmp.name
                tmp.write(data)
                tmp.flush()
                os.fsync(tmp.fileno())
            os.replace(tmp_name, target)
        except OSError as e:
            if tmp_name and os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise SnapshotError(f"could not write snapshot {path}: {e}") from e
        logger.info(f"✓ Snapshot saved to {path} ({len(data)} bytes, {h.node_count()} nodes)")

    @staticmethod
    def save_store(store: MemoryStore, path: str) -> None:
        with store.locked() as h:
            SnapshotService.save(h, path)

    # =========================================================
    # Reading
    # =========================================================

    @staticmethod
    def load(path: str) -> MemoryHierarchy:
        """
        Read and verify a snapshot.

        Raises:
            VersionError: unsupported format_version
            IntegrityError: truncated file, checksum mismatch, dangling reference
                or a hierarchy that fails the full-walk check
        """
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise SnapshotError(f"could not read snapshot {path}: {e}") from e
        h = SnapshotService.loads(data)
        logger.info(f"✓ Snapshot loaded from {path} ({h.level_count} levels, {h.node_count()} nodes)")
        return h

    @staticmethod
    def loads(data: bytes) -> MemoryHierarchy:
        text = data.decode("utf-8", errors="strict")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise IntegrityError("empty snapshot file")

        header = SnapshotService._json(lines[0], "header")
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise VersionError(f"unsupported snapshot format_version {version} (supported: {FORMAT_VERSION})")

        if not lines[-1].startswith(TRAILER):
            raise IntegrityError("truncated snapshot: checksum trailer missing")
        expected = lines[-1][len(TRAILER):].strip()
        body = ("\n".join(lines[:-1]) + "\n").encode("utf-8")
        actual = hashlib.sha256(body).hexdigest()
        if expected != actual:
            raise IntegrityError(f"checksum mismatch: expected {expected}, actual {actual}")

        try:
            config = EngineConfig(**header["config"])
        except (KeyError, TypeError, ValidationError) as e:
            raise IntegrityError(f"snapshot header carries an invalid config: {e}") from e

        next_labels = header.get("next_labels")
        if not isinstance(next_labels, list) or not all(isinstance(n, int) and n >= 0 for n in next_labels):
            raise IntegrityError("snapshot header carries no valid next_labels list")

        sections = dict(SnapshotService._sections(lines[1:-1]))
        try:
            h = SnapshotService._build(config, sections, next_labels)
            h.check_consistency()
        except (CamError, KeyError, TypeError, ValueError) as e:
            if isinstance(e, SnapshotError):
                raise
            raise IntegrityError(f"snapshot is inconsistent: {e}") from e
        return h

    @staticmethod
    def _json(line: str, where: str) -> Dict[str, Any]:
        try:
            value = json.loads(line)
        except json.JSONDecodeError as e:
            raise IntegrityError(f"malformed {where} record: {e}") from e
        if not isinstance(value, dict):
            raise IntegrityError(f"malformed {where} record")
        return value

    @staticmethod
    def _sections(lines: List[str]) -> Iterator[Tuple[str, List[Dict[str, Any]]]]:
        pos = 0
        for name in SECTIONS:
            if pos >= len(lines) or not lines[pos].startswith(f"#SECTION {name} "):
                raise IntegrityError(f"section {name} missing or out of order")
            count = int(lines[pos].split()[2])
            rows = lines[pos + 1:pos + 1 + count]
            if len(rows) != count or any(r.startswith("#") for r in rows):
                raise IntegrityError(f"section {name} declares {count} records")
            yield name, [SnapshotService._json(r, name) for r in rows]
            pos += 1 + count
        if pos != len(lines):
            raise IntegrityError("unexpected records after the last section")

    @staticmethod
    def _build(
        config: EngineConfig,
        sections: Dict[str, List[Dict[str, Any]]],
        next_labels: List[int],
    ) -> MemoryHierarchy:
        h = MemoryHierarchy(config)
        top = max((row["level"] for row in sections["NODES"]), default=0)
        if len(next_labels) <= top:
            raise IntegrityError(f"{len(next_labels)} label counters for {top + 1} levels")
        while h.level_count < len(next_labels):
            h.add_level()

        for row in sections["NODES"]:
            node = MemoryNode(
                node_id=row["id"], level=row["level"], kind=row["kind"], text=row["text"],
                embedding=tuple(float(x) for x in row["embedding"]), doc_id=row["doc_id"],
                seq_index=row["seq_index"], members=tuple(row["members"]),
            )
            h.levels[node.level].graph.add_node(node)
        for row in sections["EDGES"]:
            h.levels[row["level"]].graph.add_edge(row["u"], row["v"], float(row["w"]))
        for row in sections["REPLICAS"]:
            rid = ReplicaId(row["node"], row["anchor"])
            h.levels[row["level"]].replicas.put_replica(Replica(replica_id=rid, component=frozenset(row["component"])))
        for row in sections["REDGES"]:
            a, b = ReplicaId(*row["a"]), ReplicaId(*row["b"])
            rn = h.levels[row["level"]].replicas
            if a not in rn or b not in rn:
                raise IntegrityError(f"replica edge {a}-{b} references an unknown replica")
            rn.add_edge(a, b)
        for row in sections["LABELS"]:
            rid = ReplicaId(row["node"], row["anchor"])
            if rid not in h.levels[row["level"]].replicas:
                raise IntegrityError(f"label for unknown replica {rid}")
            h.levels[row["level"]].registry.assign(rid, int(row["label"]))
        for lvl, counter in zip(h.levels, next_labels):
            if counter < lvl.registry.next_label:
                raise IntegrityError(f"level {lvl.registry.level}: label counter {counter} below a live label")
            lvl.registry.next_label = counter
            lvl.registry.published = set(lvl.registry.live_labels())

        expected_psi = sum(len(lvl.graph) for lvl in h.levels[:-1])
        if len(sections["PSI"]) != expected_psi:
            raise IntegrityError(f"{len(sections['PSI'])} psi entries for {expected_psi} mapped nodes")
        for row in sections["PSI"]:
            if set(row["parents"]) != h.psi(row["level"], row["node"]):
                raise IntegrityError(f"psi entry for {row['node']} disagrees with the cluster labels")
        return h
