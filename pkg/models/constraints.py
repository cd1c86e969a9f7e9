from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Tuple

from models.algebra import AffineExpr, Scalar, VarId, linear_combination


@dataclass(frozen=True)
class LinearConstraint:
    """`expr >= 0`, or `expr > 0` when strict.

    `origin` records the non-negative multipliers over the constraints of the
    system Fourier-Motzkin started from; it is bookkeeping only and takes no
    part in equality.
    """

    expr: AffineExpr
    strict: bool = False
    origin: Mapping[int, Fraction] = field(default_factory=dict, compare=False, hash=False)

    @classmethod
    def ge(cls, expr: AffineExpr) -> "LinearConstraint":
        return cls(expr, False)

    @classmethod
    def gt(cls, expr: AffineExpr) -> "LinearConstraint":
        return cls(expr, True)

    @classmethod
    def le(cls, expr: AffineExpr) -> "LinearConstraint":
        return cls(-expr, False)

    @classmethod
    def lt(cls, expr: AffineExpr) -> "LinearConstraint":
        return cls(-expr, True)

    @classmethod
    def equality(cls, expr: AffineExpr) -> Tuple["LinearConstraint", "LinearConstraint"]:
        """expr = 0 as the pair expr >= 0, -expr >= 0"""
        return (cls(expr, False), cls(-expr, False))

    @property
    def sense(self) -> str:
        return "gt" if self.strict else "ge"

    @property
    def is_ground(self) -> bool:
        return self.expr.is_constant

    def ground_holds(self) -> bool:
        value = self.expr.constant
        return value > 0 if self.strict else value >= 0

    def holds(self, assignment: Mapping[VarId, Scalar]) -> bool:
        value = self.expr.evaluate(assignment)
        return value > 0 if self.strict else value >= 0

    def variables(self) -> FrozenSet[VarId]:
        return self.expr.variables()

    def substitute(self, bindings: Mapping[VarId, AffineExpr]) -> "LinearConstraint":
        return LinearConstraint(self.expr.substitute(bindings), self.strict, self.origin)

    def __str__(self) -> str:
        return f"{self.expr} {'>' if self.strict else '>='} 0"


@dataclass(frozen=True)
class InequalitySystem:
    constraints: Tuple[LinearConstraint, ...] = ()
    universe: FrozenSet[VarId] = frozenset()

    def __post_init__(self):
        constraints = tuple(self.constraints)
        universe = frozenset(self.universe)
        for constraint in constraints:
            universe |= constraint.variables()
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "universe", universe)

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def extended(self, constraints: Iterable[LinearConstraint], universe: Iterable[VarId] = ()) -> "InequalitySystem":
        return InequalitySystem(self.constraints + tuple(constraints), self.universe | frozenset(universe))

    def substitute(self, bindings: Mapping[VarId, AffineExpr]) -> "InequalitySystem":
        constraints = tuple(c.substitute(bindings) for c in self.constraints)
        universe = frozenset(v for v in self.universe if v not in bindings)
        for expr in bindings.values():
            universe |= expr.variables()
        return InequalitySystem(constraints, universe)

    def holds(self, assignment: Mapping[VarId, Scalar]) -> bool:
        return all(c.holds(assignment) for c in self.constraints)


@dataclass(frozen=True)
class Bound:
    expr: AffineExpr
    strict: bool = False


@dataclass(frozen=True)
class VariableBounds:
    """max(lower) <= variable <= min(upper), each side possibly strict"""

    variable: VarId
    lower: Tuple[Bound, ...] = ()
    upper: Tuple[Bound, ...] = ()

    @property
    def is_unconstrained(self) -> bool:
        return not self.lower and not self.upper

    def interval(self, assignment: Mapping[VarId, Scalar]):
        """Evaluate the extrema: (lo, lo_strict, hi, hi_strict), None for an open side"""
        lo, lo_strict = None, False
        for bound in self.lower:
            value = bound.expr.evaluate(assignment)
            if lo is None or value > lo or (value == lo and bound.strict):
                lo, lo_strict = value, bound.strict
        hi, hi_strict = None, False
        for bound in self.upper:
            value = bound.expr.evaluate(assignment)
            if hi is None or value < hi or (value == hi and bound.strict):
                hi, hi_strict = value, bound.strict
        return lo, lo_strict, hi, hi_strict

    def pins_value(self) -> bool:
        """True when some lower and upper bound are the same closed expression"""
        closed_lower = {b.expr for b in self.lower if not b.strict}
        return any(not b.strict and b.expr in closed_lower for b in self.upper)


@dataclass(frozen=True)
class SolvedBounds:
    entries: Tuple[VariableBounds, ...]
    unconstrained: FrozenSet[VarId]
    elimination_order: Tuple[VarId, ...]

    def __getitem__(self, var: VarId) -> VariableBounds:
        for entry in self.entries:
            if entry.variable == var:
                return entry
        raise KeyError(var)

    def pinned(self) -> Tuple[VarId, ...]:
        return tuple(e.variable for e in self.entries if e.pins_value())


@dataclass(frozen=True)
class Certificate:
    """A non-negative combination of original constraints that is a ground contradiction"""

    contradiction: LinearConstraint
    multipliers: Tuple[Tuple[LinearConstraint, Fraction], ...]

    def verify(self) -> bool:
        if not self.multipliers:
            return False
        if any(weight < 0 for _, weight in self.multipliers):
            return False
        if all(weight == 0 for _, weight in self.multipliers):
            return False
        combined = linear_combination(
            [weight for _, weight in self.multipliers],
            [constraint.expr for constraint, _ in self.multipliers],
        )
        if not combined.is_constant:
            return False
        strict = any(c.strict and w > 0 for c, w in self.multipliers)
        value = combined.constant
        return value < 0 or (value == 0 and strict)


@dataclass(frozen=True)
class Feasible:
    witness: Optional[Dict[VarId, Fraction]] = None

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Infeasible:
    certificate: Optional[Certificate] = None

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class Empty:
    """sample_point found an empty interval"""

    variable: Optional[VarId] = None

    def __bool__(self) -> bool:
        return False


EMPTY = Empty()
