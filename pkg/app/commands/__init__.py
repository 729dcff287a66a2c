import argparse
import logging
from typing import Any, Dict

from pydantic import ValidationError

from app.core.config import Settings, load_settings
from app.core.exceptions import ConfigError
from app.schemas.engine import EngineConfig

logger = logging.getLogger(__name__)

# flag dest -> EngineConfig field
ENGINE_FLAGS = {
    "alpha": "alpha",
    "sigma": "sigma",
    "theta": "theta",
    "k": "k",
    "top_s": "s",
    "max_hops": "max_hops",
    "chunk_size": "chunk_size",
    "max_levels": "max_levels",
}


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (default: ./cam.toml if present)")
    parser.add_argument("--stub-providers", action="store_true", help="Use deterministic offline providers")
    parser.add_argument("--seed", type=int, default=7, help="Seed for synthetic data")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


def add_engine_flags(parser: argparse.ArgumentParser, chunking: bool = True) -> None:
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--theta", type=float)
    parser.add_argument("--k", type=int)
    parser.add_argument("--top-s", type=int)
    parser.add_argument("--max-hops", type=int)
    if chunking:
        parser.add_argument("--chunk-size", type=int)
    parser.add_argument("--max-levels", type=int)
    parser.add_argument("--no-disentangle", action="store_true", help="Skip ego-splitting (ablation)")


def engine_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = {
        field: getattr(args, dest)
        for dest, field in ENGINE_FLAGS.items()
        if getattr(args, dest, None) is not None
    }
    if getattr(args, "no_disentangle", False):
        overrides["disentangle"] = False
    return overrides


def build_settings(args: argparse.Namespace, **extra: Any) -> Settings:
    """Flags > env > config file > defaults."""
    settings = load_settings(args.config, **engine_overrides(args), **extra)
    if not args.verbose:
        logging.getLogger().setLevel(settings.log_level.upper())
    return settings


def override_engine(config: EngineConfig, args: argparse.Namespace) -> EngineConfig:
    """Re-validate a stored engine config with the flags given on the command line."""
    overrides = engine_overrides(args)
    if not overrides:
        return config
    try:
        return EngineConfig(**{**config.model_dump(), **overrides})
    except ValidationError as e:
        err = e.errors()[0]
        message = err.get("msg", "").replace("Value error, ", "")
        raise ConfigError(f"invalid configuration: {'.'.join(map(str, err.get('loc', ())))}: {message}") from e
