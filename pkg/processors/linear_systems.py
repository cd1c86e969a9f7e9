"""Exact Gaussian elimination with symbolic right-hand sides.

All solves go through one reduced-row-echelon pass over a Fraction matrix
whose right-hand side is a column of AffineExpr. Pivot columns become solved
unknowns, the remaining columns become fresh free variables, and rows that
reduce to zero leave residual expressions that must equal 0.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from loguru import logger

from models.algebra import AffineExpr, AffineMap, Scalar, VarId, VarKind, free_var, linear_combination
from utils.config import settings
from utils.errors import (
    DimensionMismatch,
    InsufficientFreeVariables,
    NonSquareSystem,
    NonTallSystem,
    NonWideSystem,
    RankDeficientAllPivots,
    RankDeficientColumns,
)

Matrix = Sequence[Sequence[Scalar]]

ELIMINABLE_KINDS = (VarKind.FREE, VarKind.SLACK)


@dataclass(frozen=True)
class LinearSystem:
    """coeffs · x = rhs, with the unknowns x implicit column positions"""

    coeffs: Tuple[Tuple[Fraction, ...], ...]
    rhs: Tuple[AffineExpr, ...]

    def __post_init__(self):
        coeffs = tuple(tuple(Fraction(v) for v in row) for row in self.coeffs)
        rhs = tuple(r if isinstance(r, AffineExpr) else AffineExpr.const(r) for r in self.rhs)
        if len(rhs) != len(coeffs):
            raise DimensionMismatch(
                f"right-hand side has {len(rhs)} entries for {len(coeffs)} rows",
                {"rows": len(coeffs), "rhs": len(rhs)},
            )
        widths = {len(row) for row in coeffs}
        if len(widths) > 1:
            raise DimensionMismatch("coefficient rows have different lengths", {"widths": sorted(widths)})
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rhs", rhs)

    @property
    def rows(self) -> int:
        return len(self.coeffs)

    @property
    def columns(self) -> int:
        return len(self.coeffs[0]) if self.coeffs else 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.columns


@dataclass(frozen=True)
class Inconsistent:
    """A row reduced to 0 = c with c a nonzero constant"""

    row: int
    residual: AffineExpr

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class RankDeficient:
    free_columns: Tuple[int, ...]
    residuals: Tuple[AffineExpr, ...] = ()

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class ProjectionResult:
    projected_target: Tuple[AffineExpr, ...]
    residual: Tuple[AffineExpr, ...]
    solution: Tuple[Fraction, ...] = ()


@dataclass
class Reduction:
    """Reduced row echelon form of an augmented system"""

    matrix: List[List[Fraction]]
    rhs: List[AffineExpr]
    pivot_columns: Tuple[int, ...]
    columns: int

    @property
    def rank(self) -> int:
        return len(self.pivot_columns)

    @property
    def free_columns(self) -> Tuple[int, ...]:
        pivots = set(self.pivot_columns)
        return tuple(c for c in range(self.columns) if c not in pivots)

    @property
    def residuals(self) -> Tuple[AffineExpr, ...]:
        return tuple(self.rhs[self.rank:])


@dataclass(frozen=True)
class LayerSolution:
    """Result of the general solve: unknowns, promoted variables, unresolved residuals"""

    solution: AffineMap
    free_columns: Tuple[int, ...] = ()
    leftover: Tuple[AffineExpr, ...] = ()
    promoted: Tuple[VarId, ...] = field(default=())


def row_reduce(coeffs: Matrix, rhs: Sequence[AffineExpr], pivoting: Optional[bool] = None) -> Reduction:
    """Column-by-column elimination to reduced row echelon form.

    With pivoting the pivot row is the one with the largest absolute value
    (lowest row on ties); without it the first nonzero row is used.
    """
    if pivoting is None:
        pivoting = settings.pivoting
    matrix = [[Fraction(v) for v in row] for row in coeffs]
    right = [r if isinstance(r, AffineExpr) else AffineExpr.const(r) for r in rhs]
    rows = len(matrix)
    columns = len(matrix[0]) if matrix else 0

    pivot_columns: List[int] = []
    pivot_row = 0
    for col in range(columns):
        if pivot_row == rows:
            break
        candidates = [i for i in range(pivot_row, rows) if matrix[i][col] != 0]
        if not candidates:
            continue
        if pivoting:
            best = max(candidates, key=lambda i: (abs(matrix[i][col]), -i))
        else:
            best = candidates[0]
        matrix[pivot_row], matrix[best] = matrix[best], matrix[pivot_row]
        right[pivot_row], right[best] = right[best], right[pivot_row]

        pivot = matrix[pivot_row][col]
        matrix[pivot_row] = [v / pivot for v in matrix[pivot_row]]
        right[pivot_row] = right[pivot_row].scale(1 / pivot)
        for i in range(rows):
            factor = matrix[i][col]
            if i == pivot_row or factor == 0:
                continue
            matrix[i] = [a - factor * b for a, b in zip(matrix[i], matrix[pivot_row])]
            right[i] = right[i] - right[pivot_row].scale(factor)
        pivot_columns.append(col)
        pivot_row += 1

    return Reduction(matrix, right, tuple(pivot_columns), columns)


def _back_substitute(reduction: Reduction, generation: int) -> List[AffineExpr]:
    free_columns = reduction.free_columns
    taus = {col: AffineExpr.var(free_var(k, generation)) for k, col in enumerate(free_columns)}
    unknowns: List[AffineExpr] = [AffineExpr()] * reduction.columns
    for col, tau in taus.items():
        unknowns[col] = tau
    for row, col in enumerate(reduction.pivot_columns):
        coeffs = [-reduction.matrix[row][f] for f in free_columns]
        unknowns[col] = linear_combination(coeffs, [taus[f] for f in free_columns]) + reduction.rhs[row]
    return unknowns


def _eliminable(expr: AffineExpr) -> Optional[VarId]:
    for var, _ in expr:
        if var.kind in ELIMINABLE_KINDS:
            return var
    return None


def promote_residuals(unknowns: Sequence[AffineExpr], residuals: Sequence[AffineExpr],
                      bindings: Optional[Dict[VarId, AffineExpr]] = None):
    """Solve each residual = 0 for its first free or slack variable.

    The solved variable is substituted into the unknowns, the residuals still
    pending and the bindings already made. Ground-zero residuals vanish;
    residuals with no eliminable variable are returned as leftover.
    """
    outputs = list(unknowns)
    bound: Dict[VarId, AffineExpr] = dict(bindings or {})
    pending = list(residuals)
    leftover: List[AffineExpr] = []
    promoted: List[VarId] = []
    while pending:
        residual = pending.pop(0)
        if residual.is_constant and residual.constant == 0:
            continue
        var = _eliminable(residual)
        if var is None:
            leftover.append(residual)
            continue
        coeff = residual.coefficient(var)
        value = (residual - AffineExpr.var(var, coeff)).scale(-1 / coeff)
        step = {var: value}
        outputs = [expr.substitute(step) for expr in outputs]
        pending = [expr.substitute(step) for expr in pending]
        leftover = [expr.substitute(step) for expr in leftover]
        bound = {v: expr.substitute(step) for v, expr in bound.items()}
        bound[var] = value
        promoted.append(var)
    return outputs, bound, leftover, promoted


def solve_general(coeffs: Matrix, rhs: Sequence[AffineExpr], generation: int = 0,
                  pivoting: Optional[bool] = None) -> LayerSolution:
    """Any shape: non-pivot columns become fresh free variables, zero rows get promoted"""
    reduction = row_reduce(coeffs, rhs, pivoting)
    unknowns = _back_substitute(reduction, generation)
    outputs, bound, leftover, promoted = promote_residuals(unknowns, reduction.residuals)
    return LayerSolution(
        AffineMap(tuple(outputs), bound),
        reduction.free_columns,
        tuple(leftover),
        tuple(promoted),
    )


def gauss_solve(system: LinearSystem, generation: int = 0,
                pivoting: Optional[bool] = None) -> Union[AffineMap, Inconsistent, RankDeficient]:
    rows, columns = system.shape
    if rows != columns:
        raise NonSquareSystem(f"expected a square system, got {rows}x{columns}", {"rows": rows, "columns": columns})
    reduction = row_reduce(system.coeffs, system.rhs, pivoting)
    residuals = reduction.residuals
    for offset, residual in enumerate(residuals):
        if residual.is_constant and residual.constant != 0:
            return Inconsistent(reduction.rank + offset, residual)
    if reduction.rank < columns:
        pending = tuple(r for r in residuals if not (r.is_constant and r.constant == 0))
        return RankDeficient(reduction.free_columns, pending)
    return AffineMap(tuple(_back_substitute(reduction, generation)))


def solve_wide(coeffs: Matrix, rhs: Sequence[AffineExpr], generation: int = 0,
               pivoting: Optional[bool] = None) -> AffineMap:
    """N > M: the N - M non-pivot columns become free variables"""
    if pivoting is None:
        pivoting = settings.pivoting
    rows, columns = len(coeffs), len(coeffs[0]) if coeffs else 0
    if columns <= rows:
        raise NonWideSystem(f"expected more columns than rows, got {rows}x{columns}", {"rows": rows, "columns": columns})
    reduction = row_reduce(coeffs, rhs, pivoting)
    if reduction.rank < rows:
        raise RankDeficientAllPivots(
            f"no invertible {rows}x{rows} column subset (rank {reduction.rank})",
            {"rows": rows, "columns": columns, "rank": reduction.rank},
        )
    if not pivoting and reduction.pivot_columns != tuple(range(rows)):
        raise RankDeficientAllPivots(
            f"leading {rows}x{rows} block is singular; enable pivoting to choose other columns",
            {"rows": rows, "columns": columns, "pivot_columns": list(reduction.pivot_columns)},
        )
    return AffineMap(tuple(_back_substitute(reduction, generation)))


def solve_tall(coeffs: Matrix, rhs: Sequence[AffineExpr], generation: int = 0,
               pivoting: Optional[bool] = None) -> AffineMap:
    """N < M: each surplus row promotes one free variable of the right-hand side"""
    rows, columns = len(coeffs), len(coeffs[0]) if coeffs else 0
    if columns >= rows:
        raise NonTallSystem(f"expected more rows than columns, got {rows}x{columns}", {"rows": rows, "columns": columns})
    layer = solve_general(coeffs, rhs, generation, pivoting)
    if layer.leftover:
        raise InsufficientFreeVariables(
            f"{len(layer.leftover)} equations left without a free variable to absorb them",
            residuals=layer.leftover,
            context={"rows": rows, "columns": columns},
        )
    return layer.solution


def least_squares_project(coeffs: Matrix, target: Sequence[Scalar]) -> ProjectionResult:
    """Closest point of the column space to `target`, through exact normal equations.

    Solves (W^T W) c = W^T t; the projection is W c and the residual W c - t
    is orthogonal to every column of W.
    """
    rows, columns = len(coeffs), len(coeffs[0]) if coeffs else 0
    if columns >= rows:
        raise NonTallSystem(f"projection needs more rows than columns, got {rows}x{columns}", {"rows": rows, "columns": columns})
    if len(target) != rows:
        raise DimensionMismatch(f"target has {len(target)} entries for {rows} rows", {"rows": rows, "target": len(target)})
    w = [[Fraction(v) for v in row] for row in coeffs]
    t = [Fraction(v) for v in target]

    gram = [[sum((w[k][i] * w[k][j] for k in range(rows)), Fraction(0)) for j in range(columns)] for i in range(columns)]
    moment = [AffineExpr.const(sum((w[k][i] * t[k] for k in range(rows)), Fraction(0))) for i in range(columns)]
    reduction = row_reduce(gram, moment)
    if reduction.rank < columns:
        raise RankDeficientColumns(
            f"column rank {reduction.rank} is below {columns}",
            {"rows": rows, "columns": columns, "rank": reduction.rank},
        )
    solution = tuple(expr.constant for expr in _back_substitute(reduction, 0))
    projected = [sum((w[k][i] * solution[i] for i in range(columns)), Fraction(0)) for k in range(rows)]
    residual = [p - v for p, v in zip(projected, t)]
    if any(residual):
        logger.debug(f"Projected target {[str(v) for v in t]} onto {[str(v) for v in projected]}")
    return ProjectionResult(
        tuple(AffineExpr.const(v) for v in projected),
        tuple(AffineExpr.const(v) for v in residual),
        solution,
    )


def project_onto_column_space(coeffs: Matrix, target: Sequence[Scalar]) -> ProjectionResult:
    """least_squares_project that also accepts dependent columns.

    The projection runs over the pivot columns only; `solution` is zero at
    every other column.
    """
    try:
        return least_squares_project(coeffs, target)
    except RankDeficientColumns:
        pass
    rows, columns = len(coeffs), len(coeffs[0])
    basis = row_reduce(coeffs, [AffineExpr.const(0)] * rows).pivot_columns
    t = [Fraction(v) for v in target]
    if not basis:
        return ProjectionResult(
            tuple(AffineExpr.const(0) for _ in t),
            tuple(AffineExpr.const(-v) for v in t),
            tuple(Fraction(0) for _ in range(columns)),
        )
    narrowed = least_squares_project([[row[c] for c in basis] for row in coeffs], t)
    solution = [Fraction(0)] * columns
    for column, value in zip(basis, narrowed.solution):
        solution[column] = value
    return ProjectionResult(narrowed.projected_target, narrowed.residual, tuple(solution))
