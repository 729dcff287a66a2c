import logging
import re
from pathlib import Path
from typing import Dict, List, Sequence

from pydantic import ValidationError

from app.core.exceptions import ContractError
from app.schemas.corpus import Chunk, Document
from app.schemas.engine import MemoryScope

logger = logging.getLogger(__name__)

_WORD = re.compile(r"\S+")


class IngestService:
    """
    Turns raw documents into positioned chunks and batches.
    """

    @staticmethod
    def approx_tokens(text: str) -> int:
        return len(text.split())

    @staticmethod
    def split_document(doc: Document, chunk_size: int) -> List[Chunk]:
        """
        Cut a document into consecutive word windows of at most chunk_size words.

        Chunk text is sliced from the original document, so whitespace inside a
        chunk is preserved and only the whitespace between chunks is dropped.

        Args:
            doc: Source document
            chunk_size: Maximum whitespace words per chunk (>= 16)

        Returns:
            Chunks with seq_index 0..n-1; empty list for an empty document
        """
        if chunk_size < 16:
            raise ContractError(f"chunk_size must be >= 16, got {chunk_size}")

        spans = [m.span() for m in _WORD.finditer(doc.text)]
        chunks: List[Chunk] = []
        for seq, start in enumerate(range(0, len(spans), chunk_size)):
            window = spans[start:start + chunk_size]
            chunks.append(Chunk(
                doc_id=doc.doc_id,
                seq_index=seq,
                text=doc.text[window[0][0]:window[-1][1]],
                approx_tokens=len(window),
            ))
        return chunks

    @staticmethod
    def split_documents(docs: Sequence[Document], chunk_size: int) -> List[Chunk]:
        chunks: List[Chunk] = []
        for doc in docs:
            chunks.extend(IngestService.split_document(doc, chunk_size))
        return chunks

    @staticmethod
    def make_batches(chunks: Sequence[Chunk], batch_size: int) -> List[List[Chunk]]:
        if batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {batch_size}")
        return [list(chunks[i:i + batch_size]) for i in range(0, len(chunks), batch_size)]

    # ---------------------------------------------------------
    # Input files
    # ---------------------------------------------------------

    @staticmethod
    def load_documents(path: str) -> List[Document]:
        """
        Read documents from a JSON-Lines file, a plain-text file, or a directory
        of plain-text files (doc_id = file stem, sorted by name).

        Raises:
            ContractError: missing path, malformed record or duplicate doc_id
        """
        source = Path(path)
        if not source.exists():
            raise ContractError(f"input not found: {path}")

        if source.is_dir():
            docs = [
                Document(doc_id=f.stem, text=f.read_text(encoding="utf-8"))
                for f in sorted(source.glob("*.txt"))
            ]
        elif source.suffix in (".jsonl", ".ndjson"):
            docs = IngestService._read_jsonl(source)
        else:
            docs = [Document(doc_id=source.stem, text=source.read_text(encoding="utf-8"))]

        seen = set()
        for doc in docs:
            if doc.doc_id in seen:
                raise ContractError(f"duplicate doc_id {doc.doc_id!r} in {path}")
            seen.add(doc.doc_id)

        logger.info(f"✓ Loaded {len(docs)} document(s) from {path}")
        return docs

    @staticmethod
    def _read_jsonl(source: Path) -> List[Document]:
        docs = []
        with source.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    docs.append(Document.model_validate_json(line))
                except ValidationError as e:
                    raise ContractError(f"{source}:{lineno}: invalid document record: {e.errors()[0]['msg']}") from e
        return docs

    @staticmethod
    def partition_by_scope(docs: Sequence[Document], scope: MemoryScope) -> Dict[str, List[Document]]:
        """Unified scope keeps one memory; document scope gives each document its own."""
        if scope == MemoryScope.DOCUMENT:
            return {doc.doc_id: [doc] for doc in docs}
        return {"memory": list(docs)}
