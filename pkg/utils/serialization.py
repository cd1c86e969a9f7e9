from typing import List, Optional

from models.algebra import AffineExpr
from models.constraints import LinearConstraint, SolvedBounds, VariableBounds
from models.preimage import Preimage, SolutionBranch
from models.report import VerificationReport
from models.schemas import AffineDocument, BranchDocument, ConstraintDocument, PreimageDocument
from utils.rationals import format_rational


def affine_to_document(expr: AffineExpr) -> AffineDocument:
    return AffineDocument(
        terms={var.name: format_rational(coeff) for var, coeff in expr},
        const=format_rational(expr.constant),
    )


def constraint_to_document(constraint: LinearConstraint) -> ConstraintDocument:
    return ConstraintDocument(
        coeffs={var.name: format_rational(coeff) for var, coeff in constraint.expr},
        const=format_rational(constraint.expr.constant),
        sense=constraint.sense,
    )


def branch_to_document(branch: SolutionBranch) -> BranchDocument:
    return BranchDocument(
        id=branch.branch_id,
        input_map=[affine_to_document(expr) for expr in branch.input_map.outputs],
        constraints=[constraint_to_document(c) for c in branch.constraints.constraints],
        free_vars=[v.name for v in branch.free_vars()],
        slack_vars=[v.name for v in branch.slack_vars()],
    )


def preimage_to_document(preimage: Preimage, report: Optional[VerificationReport] = None) -> PreimageDocument:
    return PreimageDocument(
        target=[format_rational(v) for v in preimage.target] if preimage.target is not None else None,
        omega_bound=preimage.omega_bound,
        enumerated=preimage.enumerated_count,
        partial=preimage.partial,
        branches=[branch_to_document(b) for b in preimage.branches],
        projected_target=(
            [format_rational(v) for v in preimage.projected_target] if preimage.projected_target is not None else None
        ),
        verification=report,
    )


def preimage_to_json(preimage: Preimage, report: Optional[VerificationReport] = None) -> str:
    return preimage_to_document(preimage, report).model_dump_json(indent=2) + "\n"


def _bounds_text(entry: VariableBounds) -> str:
    lower = ", ".join(str(b.expr) for b in entry.lower)
    upper = ", ".join(str(b.expr) for b in entry.upper)
    if not entry.lower and not entry.upper:
        return f"{entry.variable} unconstrained"
    parts = []
    if entry.lower:
        strict = any(b.strict for b in entry.lower)
        parts.append(f"max({lower}) {'<' if strict else '<='} ")
    parts.append(entry.variable.name)
    if entry.upper:
        strict = any(b.strict for b in entry.upper)
        parts.append(f" {'<' if strict else '<='} min({upper})")
    return "".join(parts)


def _solved_lines(solved: SolvedBounds) -> List[str]:
    return [f"    {_bounds_text(entry)}" for entry in solved.entries]


def preimage_to_text(preimage: Preimage) -> str:
    lines: List[str] = []
    target = "symbolic" if preimage.target is None else ", ".join(format_rational(v) for v in preimage.target)
    lines.append(f"target: {target}")
    if preimage.projected_target is not None:
        lines.append(f"projected target: {', '.join(format_rational(v) for v in preimage.projected_target)}")
    lines.append(f"branches: {len(preimage.branches)} feasible, {preimage.enumerated_count} of {preimage.omega_bound} patterns enumerated")
    if preimage.partial:
        lines.append("partial: branch budget reached")
    for branch in preimage.branches:
        lines.append("")
        lines.append(f"branch {branch.branch_id or '(linear)'}")
        for i, expr in enumerate(branch.input_map.outputs):
            lines.append(f"  x{i} = {expr}")
        if branch.constraints.constraints:
            lines.append("  subject to")
            for constraint in branch.constraints.constraints:
                lines.append(f"    {constraint}")
        if branch.solved is not None and branch.solved.entries:
            lines.append("  solved bounds")
            lines.extend(_solved_lines(branch.solved))
        pinned = branch.pinned()
        if pinned:
            lines.append(f"  pinned: {', '.join(v.name for v in pinned)}")
    return "\n".join(lines) + "\n"


def report_to_text(report: VerificationReport) -> str:
    lines = [
        f"verification: {'passed' if report.passed else 'FAILED'}",
        f"  branches checked: {report.branches_checked}",
        f"  samples per branch: {report.samples_per_branch}",
        f"  grid points checked: {report.grid_points_checked}",
    ]
    for failure in report.round_trip_failures:
        lines.append(f"  round trip failure in branch {failure.branch_id}: {failure.assignment} -> {failure.output}")
    for miss in report.completeness_misses:
        lines.append(f"  missing grid point: ({', '.join(miss)})")
    for disagreement in report.oracle_disagreements:
        lines.append(f"  oracle disagreement: {disagreement}")
    return "\n".join(lines) + "\n"
