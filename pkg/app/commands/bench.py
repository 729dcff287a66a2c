import argparse
import logging
from typing import List

from app.commands import add_common_flags, add_engine_flags, build_settings
from app.core.exceptions import ConfigError
from app.services.bench_service import BenchService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="Batch-size scaling benchmark on a synthetic corpus (stub providers)")
    parser.add_argument("--chunks", type=int, default=2000)
    parser.add_argument("--batch-sizes", default="1,50,200", help="Comma-separated list")
    # the synthetic corpus fixes its own chunk size
    add_engine_flags(parser, chunking=False)
    add_common_flags(parser)
    parser.set_defaults(func=run)


def parse_batch_sizes(raw: str) -> List[int]:
    try:
        sizes = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--batch-sizes must be comma-separated integers, got {raw!r}") from None
    if not sizes or any(size < 1 for size in sizes):
        raise ConfigError(f"--batch-sizes must be positive integers, got {raw!r}")
    return sizes


def run(args: argparse.Namespace) -> int:
    settings = build_settings(args)
    if args.chunks < 1:
        raise ConfigError(f"--chunks must be >= 1, got {args.chunks}")
    if not args.stub_providers:
        logger.info("bench always runs on stub providers")
    results = BenchService.bench(args.chunks, parse_batch_sizes(args.batch_sizes), args.seed, settings.engine)
    for line in BenchService.csv_lines(results):
        print(line)
    return 0
