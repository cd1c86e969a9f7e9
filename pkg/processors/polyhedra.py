"""Fourier-Motzkin elimination over exact linear constraints.

Every constraint is stored as `expr >= 0` or `expr > 0`. Eliminating a
variable pairs each constraint where it has a positive coefficient with each
where it has a negative one; the pair is scaled so the variable cancels and
summed. Bounds left over for kept variables are read off in solved form
(max of lower bounds, min of upper bounds) and can be walked back to produce
witness points.
"""

from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from loguru import logger

from models.algebra import AffineExpr, Scalar, VarId
from models.constraints import (
    Bound,
    Certificate,
    Empty,
    Feasible,
    Infeasible,
    InequalitySystem,
    LinearConstraint,
    SolvedBounds,
    VariableBounds,
)


def _merge_origin(left: Mapping[int, Fraction], left_scale: Fraction,
                  right: Mapping[int, Fraction], right_scale: Fraction) -> Dict[int, Fraction]:
    origin: Dict[int, Fraction] = {}
    for index, weight in left.items():
        origin[index] = origin.get(index, Fraction(0)) + weight * left_scale
    for index, weight in right.items():
        origin[index] = origin.get(index, Fraction(0)) + weight * right_scale
    return origin


def _scaled(constraint: LinearConstraint, factor: Fraction) -> LinearConstraint:
    origin = {index: weight * factor for index, weight in constraint.origin.items()}
    return LinearConstraint(constraint.expr.scale(factor), constraint.strict, origin)


def fm_eliminate(system: InequalitySystem, var: VarId) -> InequalitySystem:
    """Project `var` out of the system.

    Output holds one combined constraint per (positive, negative) pair followed
    by the constraints not mentioning `var`, so an elimination over p positive,
    q negative and r neutral constraints yields exactly p*q + r constraints.
    No redundancy removal happens here.
    """
    plus: List[Tuple[LinearConstraint, Fraction]] = []
    minus: List[Tuple[LinearConstraint, Fraction]] = []
    other: List[LinearConstraint] = []
    for constraint in system.constraints:
        coeff = constraint.expr.coefficient(var)
        if coeff > 0:
            plus.append((constraint, coeff))
        elif coeff < 0:
            minus.append((constraint, -coeff))
        else:
            other.append(constraint)

    combined: List[LinearConstraint] = []
    for upper, a in plus:
        for lower, b in minus:
            expr = upper.expr.scale(1 / a) + lower.expr.scale(1 / b)
            origin = _merge_origin(upper.origin, 1 / a, lower.origin, 1 / b)
            combined.append(LinearConstraint(expr, upper.strict or lower.strict, origin))

    return InequalitySystem(tuple(combined + other), system.universe - {var})


def _normal_key(constraint: LinearConstraint):
    """Direction of a constraint up to positive scaling, and the scale that reaches it"""
    terms = constraint.expr.terms
    pivot = min(terms)
    scale = 1 / abs(terms[pivot])
    key = tuple(sorted((var, coeff * scale) for var, coeff in terms.items()))
    return key, scale


def remove_redundant(constraints: Iterable[LinearConstraint]) -> List[LinearConstraint]:
    """Drop ground-true constraints, duplicates, and same-direction constraints with a weaker constant"""
    kept: Dict[object, LinearConstraint] = {}
    for constraint in constraints:
        if constraint.is_ground:
            if constraint.ground_holds():
                continue
            kept.setdefault(("ground", constraint.expr.constant, constraint.strict), constraint)
            continue
        key, scale = _normal_key(constraint)
        normalized = _scaled(constraint, scale)
        current = kept.get(key)
        if current is None:
            kept[key] = normalized
            continue
        stronger = (
            normalized.expr.constant < current.expr.constant
            or (normalized.expr.constant == current.expr.constant and normalized.strict and not current.strict)
        )
        if stronger:
            kept[key] = normalized
    return list(kept.values())


def choose_elimination_var(constraints: Sequence[LinearConstraint], candidates: Iterable[VarId]) -> VarId:
    """Greedy least-growth choice: minimise p*q - (p+q), ties to the smallest VarId"""
    best: Optional[Tuple[int, VarId]] = None
    for var in sorted(candidates):
        p = q = 0
        for constraint in constraints:
            coeff = constraint.expr.coefficient(var)
            if coeff > 0:
                p += 1
            elif coeff < 0:
                q += 1
        score = p * q - (p + q)
        if best is None or score < best[0]:
            best = (score, var)
    if best is None:
        raise ValueError("no variable left to eliminate")
    return best[1]


def _first_violation(constraints: Sequence[LinearConstraint]) -> Optional[LinearConstraint]:
    for constraint in constraints:
        if constraint.is_ground and not constraint.ground_holds():
            return constraint
    return None


def _refute(system: InequalitySystem, contradiction: LinearConstraint) -> Infeasible:
    multipliers = tuple(
        (system.constraints[index], weight)
        for index, weight in sorted(contradiction.origin.items())
        if weight != 0
    )
    return Infeasible(Certificate(contradiction, multipliers))


def _bounds_for(var: VarId, constraints: Sequence[LinearConstraint]) -> VariableBounds:
    lower: List[Bound] = []
    upper: List[Bound] = []
    for constraint in constraints:
        coeff = constraint.expr.coefficient(var)
        if coeff == 0:
            continue
        rest = constraint.expr - AffineExpr.var(var, coeff)
        if coeff > 0:
            lower.append(Bound(rest.scale(-1 / coeff), constraint.strict))
        else:
            upper.append(Bound(rest.scale(1 / -coeff), constraint.strict))
    return VariableBounds(var, tuple(lower), tuple(upper))


def fm_solve(system: InequalitySystem, keep: Sequence[VarId]) -> Union[SolvedBounds, Infeasible]:
    """Eliminate everything outside `keep`, then put `keep` in solved form.

    Bounds of keep[i] mention only keep[i+1:], so `sample_point` can assign
    the variables back to front.
    """
    keep = list(dict.fromkeys(keep))
    keep_set = set(keep)
    rows = [
        LinearConstraint(constraint.expr, constraint.strict, {index: Fraction(1)})
        for index, constraint in enumerate(system.constraints)
    ]
    violation = _first_violation(rows)
    if violation is not None:
        return _refute(system, violation)
    rows = remove_redundant(rows)

    pending = {var for var in system.universe if var not in keep_set}
    while pending:
        var = choose_elimination_var(rows, pending)
        pending.discard(var)
        rows = remove_redundant(fm_eliminate(InequalitySystem(tuple(rows)), var).constraints)
        violation = _first_violation(rows)
        if violation is not None:
            logger.debug(f"Eliminating {var} exposed contradiction {violation}")
            return _refute(system, violation)

    entries: List[VariableBounds] = []
    for var in keep:
        entries.append(_bounds_for(var, rows))
        rows = remove_redundant(fm_eliminate(InequalitySystem(tuple(rows)), var).constraints)
        violation = _first_violation(rows)
        if violation is not None:
            return _refute(system, violation)

    unconstrained = frozenset(entry.variable for entry in entries if entry.is_unconstrained)
    return SolvedBounds(tuple(entries), unconstrained, tuple(keep))


def feasibility(system: InequalitySystem) -> Union[Feasible, Infeasible]:
    result = fm_solve(system, [])
    if isinstance(result, Infeasible):
        return result
    return Feasible()


def _pick(lo, lo_strict, hi, hi_strict, hint: Optional[Fraction]) -> Optional[Fraction]:
    def inside(value: Fraction) -> bool:
        if lo is not None and (value < lo or (lo_strict and value == lo)):
            return False
        if hi is not None and (value > hi or (hi_strict and value == hi)):
            return False
        return True

    if lo is not None and hi is not None:
        if lo > hi or (lo == hi and (lo_strict or hi_strict)):
            return None
    if hint is not None and inside(hint):
        return hint
    if lo is not None and hi is not None:
        return lo if lo == hi else (lo + hi) / 2
    if lo is not None:
        return lo + 1
    if hi is not None:
        return hi - 1
    return Fraction(0)


def sample_point(bounds: SolvedBounds, assignment_hints: Optional[Mapping[VarId, Scalar]] = None) -> Union[Dict[VarId, Fraction], Empty]:
    """Walk the solved form back to front, choosing a point inside every interval.

    A hint is used when it lies inside its interval; otherwise the midpoint
    (or lower + 1 / upper - 1 for half-open intervals, 0 when unbounded).
    """
    hints = {var: Fraction(value) for var, value in (assignment_hints or {}).items()}
    entries = {entry.variable: entry for entry in bounds.entries}
    assignment: Dict[VarId, Fraction] = {}
    for var in reversed(bounds.elimination_order):
        lo, lo_strict, hi, hi_strict = entries[var].interval(assignment)
        value = _pick(lo, lo_strict, hi, hi_strict, hints.get(var))
        if value is None:
            return Empty(var)
        assignment[var] = value
    return assignment
