import sys
from pathlib import Path
from typing import List, Literal, Optional

from loguru import logger
from pydantic import BaseModel, Field

from jobs.verification import VerificationJob
from models.preimage import BranchBudget, Preimage
from models.report import GridSpec, VerificationReport
from processors.model_loader import load_model
from processors.preimage_engine import compute_preimage
from utils.config import settings
from utils.errors import SchemaError
from utils.rationals import parse_rational_list
from utils.serialization import preimage_to_json, preimage_to_text, report_to_text

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


class RunConfig(BaseModel):
    model_path: Path
    target: List[str] = []
    max_branches: Optional[int] = Field(default=None, ge=1)
    symbolic: bool = False
    verify: Literal["none", "roundtrip", "grid"] = "none"
    samples: int = Field(default_factory=lambda: settings.samples, ge=1)
    grid: Optional[str] = None
    output_format: Literal["json", "text"] = "json"
    out: Optional[Path] = None
    seed: int = Field(default_factory=lambda: settings.seed)
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)

    @property
    def budget(self) -> BranchBudget:
        max_branches = self.max_branches if self.max_branches is not None else settings.max_branches
        return BranchBudget(max_branches, settings.max_forks, settings.strict_budget)


def _target_values(config: RunConfig):
    if not config.target:
        if config.symbolic:
            return None
        raise SchemaError("a target is required unless --symbolic is given")
    try:
        return parse_rational_list(",".join(config.target))
    except ValueError as e:
        raise SchemaError(f"invalid target: {e}", {"target": ",".join(config.target)})


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.write_text(text, encoding="utf-8")
    logger.info(f"Wrote result to {out}")


def _run(config: RunConfig):
    network = load_model(config.model_path)
    target = _target_values(config)
    preimage = compute_preimage(network, target, config.budget, symbolic=config.symbolic, threads=config.threads)
    return network, preimage


def _render(preimage: Preimage, config: RunConfig, report: Optional[VerificationReport] = None) -> str:
    if config.output_format == "text":
        text = preimage_to_text(preimage)
        if report is not None:
            text += "\n" + report_to_text(report)
        return text
    return preimage_to_json(preimage, report)


def cmd_preimage(config: RunConfig) -> int:
    """Compute and print the preimage; exit 2 when it is empty"""
    _, preimage = _run(config)
    _write(_render(preimage, config), config.out)
    if preimage.is_empty:
        logger.warning("Preimage is empty: the target is not reachable")
        return EXIT_EMPTY
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    """Compute the preimage, then check it; exit 0 only when every check passes"""
    if config.symbolic:
        raise SchemaError("verification needs a concrete target")
    network, preimage = _run(config)
    grid = GridSpec.parse(config.grid) if config.grid else None
    report = VerificationJob(network, preimage, config.seed, config.threads).run(config.verify, config.samples, grid)
    _write(_render(preimage, config, report), config.out)
    if not report.passed:
        logger.error(
            f"Verification failed: {len(report.round_trip_failures)} round trip failures, "
            f"{len(report.completeness_misses)} missing grid points, "
            f"{len(report.oracle_disagreements)} oracle disagreements"
        )
        return EXIT_ERROR
    if preimage.is_empty:
        logger.info("Preimage is empty; every check passed")
    return EXIT_OK
