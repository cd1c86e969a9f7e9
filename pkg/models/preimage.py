import threading
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterator, Optional, Tuple

from models.algebra import AffineExpr, AffineMap, VarId, VarKind, output_var
from models.constraints import InequalitySystem, SolvedBounds


class Sign(str, Enum):
    POSITIVE = "1"
    NON_POSITIVE = "0"


@dataclass(frozen=True)
class SignPattern:
    """One sign per unit of a piecewise layer; unit i is Positive iff bit i of `mask` is set"""

    layer_index: int
    mask: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"sign pattern width must be positive, got {self.width}")
        if not 0 <= self.mask < 2 ** self.width:
            raise ValueError(f"mask {self.mask} does not fit {self.width} units")

    @property
    def bits(self) -> Tuple[Sign, ...]:
        return tuple(Sign.POSITIVE if (self.mask >> i) & 1 else Sign.NON_POSITIVE for i in range(self.width))

    def is_positive(self, unit: int) -> bool:
        return bool((self.mask >> unit) & 1)

    def __len__(self) -> int:
        return self.width

    def __iter__(self) -> Iterator[Sign]:
        return iter(self.bits)

    def __str__(self) -> str:
        return format(self.mask, f"0{self.width}b")


@dataclass(frozen=True)
class BranchBudget:
    max_live_branches: Optional[int] = None
    max_forks: Optional[int] = None
    strict: bool = False

    def __post_init__(self):
        for name in ("max_live_branches", "max_forks"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be at least 1, got {value}")

    @property
    def unlimited(self) -> bool:
        return self.max_live_branches is None and self.max_forks is None


UNLIMITED = BranchBudget()


@dataclass(frozen=True)
class SolutionBranch:
    """input_map gives the network inputs over y, free and slack variables; constraints bound them"""

    patterns: Tuple[SignPattern, ...]
    input_map: AffineMap
    constraints: InequalitySystem
    solved: Optional[SolvedBounds] = None

    @property
    def branch_id(self) -> str:
        # Patterns are stored output-first; ids read in network order
        return "-".join(str(p) for p in sorted(self.patterns, key=lambda p: p.layer_index))

    def variables(self) -> Tuple[VarId, ...]:
        universe = set(self.constraints.universe) | set(self.input_map.input_universe)
        return tuple(sorted(universe))

    def free_vars(self) -> Tuple[VarId, ...]:
        return tuple(v for v in self.variables() if v.kind is VarKind.FREE)

    def slack_vars(self) -> Tuple[VarId, ...]:
        return tuple(v for v in self.variables() if v.kind is VarKind.SLACK)

    def pinned(self) -> Tuple[VarId, ...]:
        if self.solved is None:
            return ()
        return self.solved.pinned()


@dataclass
class EngineStats:
    forks: int = 0
    pruned: int = 0
    peak_constraints: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def observe(self, system: InequalitySystem) -> None:
        # Called from fork workers
        with self._lock:
            self.peak_constraints = max(self.peak_constraints, len(system))


@dataclass
class Preimage:
    """Feasible branches of the preimage, sorted by branch id.

    `target` is None in symbolic mode. `projected_target` is set when the
    target was unreachable and was replaced by its least-squares projection.
    """

    target: Optional[Tuple[Fraction, ...]]
    branches: Tuple[SolutionBranch, ...]
    enumerated_count: int
    omega_bound: int
    partial: bool = False
    projected_target: Optional[Tuple[Fraction, ...]] = None
    stats: EngineStats = field(default_factory=EngineStats)
    input_dim: int = 0
    output_dim: int = 0

    @property
    def is_empty(self) -> bool:
        return not self.branches

    def target_bindings(self) -> Dict[VarId, AffineExpr]:
        """y_i bound to the target values (the projected ones when projection happened)"""
        values = self.projected_target or self.target
        if values is None:
            return {}
        return {output_var(i): AffineExpr.const(v) for i, v in enumerate(values)}

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)
