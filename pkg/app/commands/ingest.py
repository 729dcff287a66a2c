import argparse
import json
import logging
from pathlib import Path

from app.commands import add_common_flags, add_engine_flags, build_settings, override_engine
from app.schemas.engine import MemoryScope
from app.schemas.report import UpdateReport
from app.services.hierarchy_service import MemoryEngine
from app.services.ingest_service import IngestService
from app.services.provider_service import ProviderService
from app.services.snapshot_service import SnapshotService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("ingest", help="Chunk documents and integrate them batch by batch")
    parser.add_argument("--input", required=True, help="JSONL file, text file, or directory of .txt files")
    parser.add_argument("--out", help="Snapshot path (a directory with --scope document)")
    parser.add_argument("--snapshot", help="Continue from an existing snapshot")
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--scope", choices=[s.value for s in MemoryScope])
    add_engine_flags(parser)
    add_common_flags(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    settings = build_settings(args, batch_size=args.batch_size, scope=args.scope)
    documents = IngestService.load_documents(args.input)

    if settings.scope == MemoryScope.DOCUMENT:
        provider = ProviderService.create(settings, stub=args.stub_providers)
        out_dir = Path(args.out) if args.out else None
        summary = {}
        for doc_id, docs in IngestService.partition_by_scope(documents, settings.scope).items():
            engine = MemoryEngine(settings.engine, provider)
            summary[doc_id] = UpdateReport.merge(engine.integrate_documents(docs, settings.batch_size)).model_dump()
            if out_dir is not None:
                SnapshotService.save_store(engine.store, str(out_dir / f"{doc_id}.snap"))
        print(json.dumps(summary, indent=2))
        return 0

    hierarchy = None
    if args.snapshot:
        hierarchy = SnapshotService.load(args.snapshot)
        hierarchy.config = override_engine(hierarchy.config, args)
        # stub vectors must match the stored ones
        settings = settings.model_copy(update={"engine": hierarchy.config})
    provider = ProviderService.create(settings, stub=args.stub_providers)
    engine = MemoryEngine(settings.engine, provider, hierarchy)
    reports = engine.integrate_documents(documents, settings.batch_size)
    if args.out:
        SnapshotService.save_store(engine.store, args.out)
    print(UpdateReport.merge(reports).model_dump_json(indent=2))
    return 0
