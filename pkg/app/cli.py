# FILE: app/cli.py
# ============================================================================
"""Command-line experiment runner.

    python -m app.cli run --devices 10 --algo rnn-ugq --seed 1
    python -m app.cli compare runs/rnn-ugq-n10-s1 runs/dnn-op-n10-s1
    python -m app.cli matrix --devices 12 --frames 15000
"""
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.logging import configure_logging, get_logger
from app.exceptions import LabError
from app.schemas.experiment import ALGORITHMS, ExperimentConfig
from app.services.experiment import compare_runs, run_experiment, run_matrix

logger = get_logger(__name__)


def _add_run_options(parser: argparse.ArgumentParser, with_algo: bool = True) -> None:
    parser.add_argument("--devices", type=int, required=True, help="number of wireless devices N")
    parser.add_argument("--frames", type=int, default=None, help="frames to simulate (default by N)")
    if with_algo:
        parser.add_argument("--algo", choices=ALGORITHMS, default="rnn-ugq")
    parser.add_argument("--candidates", type=int, default=None, help="K candidates per frame (default N)")
    parser.add_argument("--sigma", type=float, default=settings.DEFAULT_SIGMA, help="quantizer noise")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--params", dest="params_file", default=None, help="SystemParams JSON file")
    parser.add_argument("--reference", choices=("auto", "exhaustive", "local-search"), default="auto")
    parser.add_argument("--smoothing-window", type=int, default=settings.SMOOTHING_WINDOW)
    parser.add_argument("--no-timing", dest="record_timing", action="store_false",
                        help="leave decision_time_s empty so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qaroo-lab", description=settings.APP_NAME)
    parser.add_argument("--log-level", default=None)
    parser.add_argument("--log-format", choices=("console", "json"), default=None)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment")
    _add_run_options(run)
    run.add_argument("--out", dest="out_dir", default=None, help=f"run directory (default {settings.OUTPUT_ROOT}/<run id>)")
    run.add_argument("--resume", default=None, help="checkpoint to restore before the first frame")

    compare = commands.add_parser("compare", help="merge run summaries")
    compare.add_argument("run_dirs", nargs="+")
    compare.add_argument("--out", default=None, help="write the table as CSV")

    matrix = commands.add_parser("matrix", help="run dnn/rnn x op/ugq and compare")
    _add_run_options(matrix, with_algo=False)
    matrix.add_argument("--out", dest="out_root", default=None, help="root for the four run directories")
    return parser


def _run_fields(args: argparse.Namespace) -> dict:
    return {
        "devices": args.devices,
        "frames": args.frames,
        "candidates": args.candidates,
        "sigma": args.sigma,
        "seed": args.seed,
        "params_file": args.params_file,
        "reference": args.reference,
        "smoothing_window": args.smoothing_window,
        "record_timing": args.record_timing,
    }


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_format)
    try:
        if args.command == "run":
            config = ExperimentConfig(
                algo=args.algo, out_dir=args.out_dir, resume=args.resume, **_run_fields(args)
            )
            out_dir = run_experiment(config)
            print(out_dir)
        elif args.command == "compare":
            compare_runs(args.run_dirs, out=args.out)
        elif args.command == "matrix":
            fields = _run_fields(args)
            run_matrix(
                fields.pop("devices"),
                seed=fields.pop("seed"),
                frames=fields.pop("frames"),
                out_root=args.out_root,
                **fields,
            )
    except ValidationError as exc:
        logger.error("invalid_config", errors=exc.errors(include_url=False))
        return 2
    except (LabError, OSError) as exc:
        logger.error("command_failed", command=args.command, error=str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
