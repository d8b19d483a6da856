import argparse
import logging
import sys

from widthlab.config import settings
from widthlab.exceptions import ConfigError, InvariantViolation
from widthlab.handlers import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK
from widthlab.handlers.approx import router as approx_router
from widthlab.handlers.cover import router as cover_router
from widthlab.handlers.sobolev import router as sobolev_router
from widthlab.handlers.sweep import router as sweep_router
from widthlab.handlers.verify import router as verify_router
from widthlab.models import load_config

# Configure logging
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=settings.log_level
)
logger = logging.getLogger(__name__)


def _global_flags() -> argparse.ArgumentParser:
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--out", help="output directory")
    flags.add_argument("--seed", type=int, help="master seed, overrides the config")
    flags.add_argument("--format", choices=["csv", "json"])
    flags.add_argument("--jobs", type=int, help="worker processes for sweep cells")
    flags.add_argument("--svg", action="store_true", help="also write a log-log rate plot")
    flags.add_argument("--timing", action="store_true", help="fill the wall_time_s column")
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="widthlab", description="Convex n-width laboratory")
    subparsers = parser.add_subparsers(dest="command", required=True)
    flags = _global_flags()

    # Include routers
    for router in (cover_router, approx_router, sweep_router, sobolev_router, verify_router):
        router.register(subparsers, parents=[flags])
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the CLI."""
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = config.model_copy(update={"seed": args.seed})
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG

    logger.info(f"Running {args.command} for {config.name}")
    try:
        return args.handler(args, config)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except InvariantViolation as e:
        logger.error(f"Invariant violated: {e}")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
