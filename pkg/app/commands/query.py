import argparse

from app.commands import add_common_flags, add_engine_flags, build_settings, override_engine
from app.services.provider_service import ProviderService
from app.services.retrieval_service import RetrievalService
from app.services.snapshot_service import SnapshotService


def register(subparsers) -> None:
    parser = subparsers.add_parser("query", help="Answer a question from a memory snapshot")
    parser.add_argument("query", help="Question text")
    parser.add_argument("--snapshot", required=True)
    parser.add_argument("--explain", action="store_true", help="Also print the retrieval trace as JSON")
    add_engine_flags(parser)
    add_common_flags(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    settings = build_settings(args)
    hierarchy = SnapshotService.load(args.snapshot)
    hierarchy.config = override_engine(hierarchy.config, args)
    # stub vectors must match the stored ones
    settings = settings.model_copy(update={"engine": hierarchy.config})
    provider = ProviderService.create(settings, stub=args.stub_providers)

    answer, trace = RetrievalService.respond(args.query, hierarchy, provider)
    print(answer)
    if args.explain:
        print(trace.model_dump_json(indent=2))
    return 0
