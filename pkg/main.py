"""
main.py — Mind-Wandering Entropy Detector — CLI Entry Point.

Subcommands:
  1. synth             — Write a synthetic EEG dataset (recordings + manifest)
  2. extract           — Extract the 424-per-channel feature matrix
  3. train             — Fit the classifier on all rows, report importances
  4. evaluate          — Leave-one-subject-out evaluation (optional random search)
  5. select-channels   — Channel ranking and the top-K channel curve
  6. select-features   — RFE vs IFE vs CIFE at matched k
  7. bench             — Forest training time vs channels, features and trees

Usage examples:
    python main.py synth
    python main.py extract --threads 4
    python main.py evaluate --seed 7 --output-dir runs/seed7
    python main.py select-features --config custom_config.yaml

Environment:
    LOG_LEVEL           Override log verbosity (default: INFO)

Exit codes:
    0 success | 1 internal | 2 config | 3 dataset | 4 undefined value | 5 selection
"""

import argparse
import logging
import logging.handlers
import os
import sys
from datetime import datetime
from pathlib import Path

import yaml

from src import __version__


def _configure_logging(log_dir: str = "logs", level: str = "INFO") -> None:
    """Set up rotating file handler and stream handler for the pipeline.

    Log level is read from the LOG_LEVEL environment variable or the `level`
    parameter.

    Args:
        log_dir: Directory to write log files into.
        level: Default log level string (DEBUG, INFO, WARNING, ERROR).
    """
    effective_level = os.environ.get("LOG_LEVEL", level).upper()
    numeric_level = getattr(logging, effective_level, logging.INFO)

    Path(log_dir).mkdir(parents=True, exist_ok=True)
    log_filename = Path(log_dir) / f"pipeline_{datetime.today().strftime('%Y%m%d')}.log"

    formatter = logging.Formatter(
        fmt="%(asctime)s | %(levelname)-8s | %(name)-30s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    # 10 MB per file, 7 backups
    file_handler = logging.handlers.RotatingFileHandler(
        log_filename, maxBytes=10 * 1024 * 1024, backupCount=7, encoding="utf-8"
    )
    file_handler.setFormatter(formatter)

    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.addHandler(file_handler)
    root_logger.addHandler(stream_handler)

    logging.getLogger("joblib").setLevel(logging.WARNING)


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Define and parse command-line arguments.

    Returns:
        Parsed argument namespace.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        default="config.yaml",
        metavar="PATH",
        help="Path to configuration YAML file (default: config.yaml)",
    )
    common.add_argument("--seed", type=int, default=None, help="Master seed (overrides runtime.seed)")
    common.add_argument("--threads", type=int, default=None, help="Worker count (overrides runtime.threads)")
    common.add_argument(
        "--output-dir",
        default=None,
        metavar="DIR",
        help="Report directory (overrides paths.output_dir); dataset directory for synth",
    )
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity level (default: INFO)",
    )

    parser = argparse.ArgumentParser(
        prog="mw-entropy-detector",
        description=(
            "Mind-Wandering Entropy Detector — "
            "entropy-assisted EEG features, random forest, channel and feature selection."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py synth
  python main.py extract --threads 4
  python main.py evaluate --seed 7
  python main.py select-channels --output-dir runs/channels
  python main.py bench --log-level DEBUG
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, help_text in (
        ("synth", "Write a synthetic dataset in the on-disk format"),
        ("extract", "Extract and save the feature matrix"),
        ("train", "Fit on all rows and report feature importances"),
        ("evaluate", "Leave-one-subject-out evaluation"),
        ("select-channels", "Rank channels and evaluate the top-K curve"),
        ("select-features", "Compare RFE, IFE and CIFE at matched k"),
        ("bench", "Forest training-time scaling benchmark"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)

    return parser.parse_args(argv)


def run_command(args: argparse.Namespace, logger: logging.Logger) -> int:
    """Run one subcommand and return its exit code.

    Pipeline errors map to their category's exit code; anything else is
    logged with a traceback and exits 1.
    """
    from src.errors import PipelineError
    from src.pipeline import (
        cli_overrides,
        cmd_bench,
        cmd_evaluate,
        cmd_extract,
        cmd_select,
        cmd_synth,
        cmd_train,
        load_config,
    )

    try:
        config = load_config(args.config, cli_overrides(args.seed, args.threads, args.output_dir))
    except FileNotFoundError as exc:
        logger.error("config error: %s", exc)
        return 2
    except PipelineError as exc:
        logger.error("%s error: %s", exc.category, exc)
        return exc.exit_code

    try:
        if args.command == "synth":
            cmd_synth(config, args.output_dir)
        elif args.command == "extract":
            cmd_extract(config)
        elif args.command == "train":
            cmd_train(config)
        elif args.command == "evaluate":
            cmd_evaluate(config)
        elif args.command == "select-channels":
            cmd_select(config, channels=True, features=False)
        elif args.command == "select-features":
            cmd_select(config, channels=False, features=True)
        elif args.command == "bench":
            cmd_bench(config)
    except PipelineError as exc:
        logger.error("%s error: %s", exc.category, exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        logger.error("dataset error: %s", exc)
        return 3
    except Exception as exc:
        logger.error("internal error: %s", exc, exc_info=True)
        return 1

    logger.info("=" * 60)
    logger.info("%s COMPLETE", args.command.upper())
    logger.info("=" * 60)
    return 0


def main(argv: list[str] | None = None) -> None:
    """Parse arguments, configure logging, and run the subcommand."""
    args = _parse_args(argv)

    # Config is read here only for the log directory
    try:
        with open(args.config, "r") as fh:
            cfg = yaml.safe_load(fh) or {}
        log_dir = cfg.get("paths", {}).get("log_dir", "logs")
    except Exception:
        log_dir = "logs"

    _configure_logging(log_dir=log_dir, level=args.log_level)
    logger = logging.getLogger(__name__)

    logger.info(
        "Mind-Wandering Entropy Detector v%s | %s",
        __version__,
        datetime.today().strftime("%Y-%m-%d %H:%M:%S"),
    )
    logger.info("Command: %s | Config: %s | Log level: %s", args.command, args.config, args.log_level)

    sys.exit(run_command(args, logger))


if __name__ == "__main__":
    main()
