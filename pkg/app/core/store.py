# app/core/store.py

from contextlib import contextmanager
from threading import Lock
from typing import Generator, Optional
import logging

from app.models.hierarchy import MemoryHierarchy
from app.schemas.engine import EngineConfig

logger = logging.getLogger(__name__)


class MemoryStore:
    """
    Holds the last committed hierarchy.

    Writers work on a copy inside `session()`; readers keep using `snapshot`
    until the writer commits.
    """

    def __init__(self, config: EngineConfig, hierarchy: Optional[MemoryHierarchy] = None):
        self.config = config
        self._snapshot = hierarchy or MemoryHierarchy(config)
        self._writer = Lock()

    @property
    def snapshot(self) -> MemoryHierarchy:
        return self._snapshot

    @contextmanager
    def session(self) -> Generator[MemoryHierarchy, None, None]:
        """Writer session: commit on success, roll back on exception"""
        with self._writer:
            working = self._snapshot.clone()
            try:
                yield working
            except Exception as e:
                logger.warning(f"✗ Batch rolled back, memory left at last commit: {e}")
                raise
            self._snapshot = working

    @contextmanager
    def locked(self) -> Generator[MemoryHierarchy, None, None]:
        """Hold the writer lock while reading (snapshot saves)."""
        with self._writer:
            yield self._snapshot
