import argparse
import hashlib
import json
from pathlib import Path

from app.commands import add_common_flags, build_settings
from app.services.hierarchy_service import HierarchyService
from app.services.snapshot_service import FORMAT_VERSION, SnapshotService


def register(subparsers) -> None:
    parser = subparsers.add_parser("snapshot", help="Verify a snapshot and optionally re-save it")
    parser.add_argument("--snapshot", required=True)
    parser.add_argument("--out", help="Write a canonical copy here")
    add_common_flags(parser)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    build_settings(args)
    hierarchy = SnapshotService.load(args.snapshot)
    info = {
        "format_version": FORMAT_VERSION,
        "sha256": hashlib.sha256(Path(args.snapshot).read_bytes()).hexdigest(),
        **HierarchyService.stats(hierarchy),
    }
    if args.out:
        SnapshotService.save(hierarchy, args.out)
        info["written"] = args.out
    print(json.dumps(info, indent=2))
    return 0
