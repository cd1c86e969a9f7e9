from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from pydantic import BaseModel

from utils.rationals import format_rational, parse_rational


@dataclass(frozen=True)
class GridSpec:
    """Every dimension scans lo, lo + step, ... up to hi inclusive"""

    lo: Fraction
    hi: Fraction
    step: Fraction

    def __post_init__(self):
        for name in ("lo", "hi", "step"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.step <= 0:
            raise ValueError(f"grid step must be positive, got {self.step}")
        if self.hi < self.lo:
            raise ValueError(f"grid upper end {self.hi} is below {self.lo}")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """"lo:hi:step", e.g. "-3:3:1/4" """
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must look like lo:hi:step, got {text!r}")
        lo, hi, step = (parse_rational(p) for p in parts)
        return cls(lo, hi, step)

    def points(self) -> List[Fraction]:
        count = int((self.hi - self.lo) / self.step)
        return [self.lo + k * self.step for k in range(count + 1)]

    def __str__(self) -> str:
        return f"{format_rational(self.lo)}:{format_rational(self.hi)}:{format_rational(self.step)}"


@dataclass(frozen=True)
class ProbablyInfeasible:
    """The oracle exhausted its candidates without finding a witness"""

    candidates_tried: int = 0

    def __bool__(self) -> bool:
        return False


class RoundTripFailure(BaseModel):
    branch_id: str
    assignment: Dict[str, str]
    output: List[str] = []


class VerificationReport(BaseModel):
    branches_checked: int = 0
    samples_per_branch: int = 0
    grid_points_checked: int = 0
    round_trip_failures: List[RoundTripFailure] = []
    completeness_misses: List[List[str]] = []
    oracle_disagreements: List[str] = []

    @property
    def passed(self) -> bool:
        return not (self.round_trip_failures or self.completeness_misses or self.oracle_disagreements)

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        return VerificationReport(
            branches_checked=max(self.branches_checked, other.branches_checked),
            samples_per_branch=max(self.samples_per_branch, other.samples_per_branch),
            grid_points_checked=self.grid_points_checked + other.grid_points_checked,
            round_trip_failures=self.round_trip_failures + other.round_trip_failures,
            completeness_misses=self.completeness_misses + other.completeness_misses,
            oracle_disagreements=self.oracle_disagreements + other.oracle_disagreements,
        )


def point_text(point: Tuple[Fraction, ...]) -> List[str]:
    return [format_rational(v) for v in point]
