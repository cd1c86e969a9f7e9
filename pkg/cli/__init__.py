import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from loguru import logger
from pydantic import ValidationError

from utils.config import settings
from utils.errors import PreimageError
from utils.logging import configure_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preimage-nn",
        description="Exact preimages of feed-forward networks with linear, PReLU and ReLU layers",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    query = commands.add_parser("preimage", help="compute (and optionally verify) the preimage of a target")
    query.add_argument("--model", required=True, type=Path, help="model file (JSON)")
    query.add_argument("--target", help="comma separated rationals, e.g. 3,-1/2 (use --target=-1 for a leading minus)")
    query.add_argument("--max-branches", type=int, default=None, help="stop after this many live branches")
    query.add_argument("--symbolic", action="store_true", help="keep the outputs as variables")
    query.add_argument("--verify", choices=["none", "roundtrip", "grid"], default="none")
    query.add_argument("--samples", type=int, default=settings.samples, help="round trip samples per branch")
    query.add_argument("--grid", default=None, help='grid for completeness scans, "lo:hi:step"')
    query.add_argument("--format", choices=["json", "text"], default="json", dest="output_format")
    query.add_argument("--out", type=Path, default=None, help="write the result here instead of stdout")
    query.add_argument("--seed", type=int, default=settings.seed)
    query.add_argument("--threads", type=int, default=settings.threads)

    bench = commands.add_parser("bench", help="measure branch growth on random networks")
    bench.add_argument("--shape", action="append", required=True, help="layer widths from input to output, e.g. 2-3-1")
    bench.add_argument("--activation", choices=["relu", "prelu"], default="relu")
    bench.add_argument("--seed", type=int, default=settings.seed)
    bench.add_argument("--csv", type=Path, default=None, dest="csv_path", help="also write the table as CSV")
    return parser


def _report_error(error: PreimageError) -> None:
    sys.stderr.write(json.dumps(error.to_dict(), default=str) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # Imported late so --help stays fast
    from cli.bench import cmd_bench
    from cli.preimage import RunConfig, cmd_preimage, cmd_verify

    try:
        configure_logging(settings.log)
        if args.command == "bench":
            return cmd_bench(args.shape, seed=args.seed, activation=args.activation, csv_path=args.csv_path)

        try:
            config = RunConfig(
                model_path=args.model,
                target=[args.target] if args.target else [],
                max_branches=args.max_branches,
                symbolic=args.symbolic,
                verify=args.verify,
                samples=args.samples,
                grid=args.grid,
                output_format=args.output_format,
                out=args.out,
                seed=args.seed,
                threads=args.threads,
            )
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise PreimageError(f"{location}: {first['msg']}", {"option": location})

        if config.verify != "none":
            return cmd_verify(config)
        return cmd_preimage(config)
    except PreimageError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        _report_error(e)
        return 1
    except ValueError as e:
        logger.error(str(e))
        sys.stderr.write(json.dumps({"error": "ValueError", "detail": str(e)}) + "\n")
        return 1
