#!/usr/bin/env python3
"""
har-templates command line
Template selection (DTW / DTWsubseq, DPA / DBA) and template-distance
classification for human activity recognition
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Mapping, Optional

from rich.console import Console
from rich.logging import RichHandler

# Add modules to path
sys.path.insert(0, str(Path(__file__).parent))

from models.schemas import LoggingConfig  # noqa: E402
from modules.errors import ConfigError, HarTemplateError  # noqa: E402
from routers.commands import register_command_routes, resolve_args_config  # noqa: E402

logger = logging.getLogger("har_templates")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def setup_logging(log_config: LoggingConfig, console: Optional[Console] = None):
    """Rich console handler on stderr, plus a log file when configured"""
    handlers: List[logging.Handler] = [
        RichHandler(console=console or Console(stderr=True), show_path=False, rich_tracebacks=False)
    ]
    if log_config.file:
        log_dir = os.path.dirname(log_config.file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(log_config.file)
        file_handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
        handlers.append(file_handler)

    logging.basicConfig(level=getattr(logging, log_config.level), format="%(message)s", handlers=handlers, force=True)
    # numba's compiler logs at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="har-templates",
        description="Template selection and classification for human activity recognition",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_command_routes(subparsers)
    return parser


def main(argv: Optional[List[str]] = None, environ: Optional[Mapping[str, str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on data or format errors, 2 on usage or configuration errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        config = resolve_args_config(args, environ)
    except ConfigError as e:
        print(f"har-templates: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging(config.logging)
    try:
        return args.func(args, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except (HarTemplateError, OSError) as e:
        logger.error(f"{e.__class__.__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
