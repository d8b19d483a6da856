# Handlers package
# Routers are imported directly in main.py

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from widthlab.config import settings
from widthlab.models import ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2

Handler = Callable[[argparse.Namespace, ExperimentConfig], int]


class Router:
    """One CLI subcommand: its name, help text and handler."""

    def __init__(self, name: str, help: str):
        self.name = name
        self.help = help
        self.handler: Handler | None = None

    def command(self, handler: Handler) -> Handler:
        self.handler = handler
        return handler

    def register(self, subparsers, parents: list[argparse.ArgumentParser]) -> argparse.ArgumentParser:
        if self.handler is None:
            raise RuntimeError(f"Router {self.name!r} has no handler")
        parser = subparsers.add_parser(self.name, help=self.help, parents=parents)
        parser.add_argument("--config", required=True, help="path to a JSON experiment config")
        parser.set_defaults(handler=self.handler)
        return parser


@dataclass(frozen=True)
class RunOptions:
    out_dir: Path
    format: str
    jobs: int
    svg: bool
    timing: bool


def run_options(args: argparse.Namespace, config: ExperimentConfig) -> RunOptions:
    """CLI flags over config values over settings."""
    out_dir = args.out or config.output.directory or settings.output_dir
    return RunOptions(
        out_dir=Path(out_dir),
        format=args.format or config.output.format or settings.output_format,
        jobs=args.jobs or settings.jobs,
        svg=args.svg or config.output.svg,
        timing=args.timing,
    )


def write_output(options: RunOptions, stem: str, text: str, suffix: str | None = None) -> Path:
    options.out_dir.mkdir(parents=True, exist_ok=True)
    path = options.out_dir / f"{stem}.{suffix or options.format}"
    path.write_text(text)
    logger.info(f"Wrote {path}")
    return path
