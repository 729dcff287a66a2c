import argparse
import json

from app.commands import add_common_flags, build_settings
from app.services.hierarchy_service import HierarchyService
from app.services.snapshot_service import SnapshotService


def register(subparsers) -> None:
    parser = subparsers.add_parser("stats", help="Per-level counts of a snapshot")
    parser.add_argument("--snapshot", required=True)
    add_common_flags(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    build_settings(args)
    hierarchy = SnapshotService.load(args.snapshot)
    print(json.dumps(HierarchyService.stats(hierarchy), indent=2))
    return 0
