"""Checks that do not trust the engine: forward round trips, grid scans and a brute-force feasibility oracle."""

import itertools
import random
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from loguru import logger

from models.algebra import AffineExpr, Scalar, VarId
from models.constraints import Empty, Feasible, Infeasible, InequalitySystem, LinearConstraint
from models.network import Network, forward
from models.preimage import Preimage, SolutionBranch
from models.report import GridSpec, ProbablyInfeasible, RoundTripFailure, VerificationReport, point_text
from processors.polyhedra import feasibility, sample_point
from processors.preimage_engine import branch_membership
from utils.config import settings
from utils.errors import DimensionMismatch
from utils.rationals import format_rational

Box = Union[Tuple[Scalar, Scalar], Mapping[VarId, Tuple[Scalar, Scalar]]]

MAX_GRID_INPUTS = 3
MAX_ORACLE_VARIABLES = 4


def _random_hint(rng: random.Random, spread: int) -> Fraction:
    return Fraction(rng.randint(-spread, spread), rng.randint(1, 8))


def _check_branch(net: Network, preimage: Preimage, branch: SolutionBranch, samples: int,
                  seed: int, spread: int) -> List[RoundTripFailure]:
    expected = list(preimage.projected_target or preimage.target or ())
    bindings = {var: expr.constant for var, expr in preimage.target_bindings().items()}
    rng = random.Random(f"{seed}:{branch.branch_id}")
    failures: List[RoundTripFailure] = []
    if branch.solved is None:
        return [RoundTripFailure(branch_id=branch.branch_id, assignment={}, output=["unsolved"])]
    for _ in range(samples):
        hints = {var: _random_hint(rng, spread) for var in branch.solved.elimination_order}
        point = sample_point(branch.solved, hints)
        if isinstance(point, Empty):
            failures.append(RoundTripFailure(branch_id=branch.branch_id, assignment={}, output=["empty"]))
            continue
        assignment = {**bindings, **point}
        inputs = branch.input_map.evaluate(assignment)
        output = forward(net, inputs)
        if output != expected:
            failures.append(
                RoundTripFailure(
                    branch_id=branch.branch_id,
                    assignment={var.name: format_rational(v) for var, v in sorted(point.items())},
                    output=point_text(tuple(output)),
                )
            )
    return failures


def verify_round_trip(net: Network, preimage: Preimage, samples: Optional[int] = None,
                      seed: Optional[int] = None, threads: int = 1) -> VerificationReport:
    """Sample each branch, push the inputs through the network and compare with the target exactly"""
    samples = settings.samples if samples is None else samples
    seed = settings.seed if seed is None else seed
    spread = settings.hint_range
    if threads > 1 and len(preimage.branches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda b: _check_branch(net, preimage, b, samples, seed, spread), preimage.branches))
    else:
        results = [_check_branch(net, preimage, b, samples, seed, spread) for b in preimage.branches]

    failures = [failure for result in results for failure in result]
    if failures:
        logger.warning(f"Round trip found {len(failures)} failing samples")
    return VerificationReport(
        branches_checked=len(preimage.branches),
        samples_per_branch=samples,
        round_trip_failures=failures,
    )


def verify_completeness_grid(net: Network, target: Sequence[Scalar], preimage: Preimage,
                             grid: GridSpec) -> VerificationReport:
    """Every grid point that maps onto the target must belong to some branch"""
    if net.input_dim > MAX_GRID_INPUTS:
        raise DimensionMismatch(
            f"grid scans support at most {MAX_GRID_INPUTS} inputs, network has {net.input_dim}",
            {"input_dim": net.input_dim},
        )
    expected = [Fraction(v) for v in target]
    bindings = {var: expr.constant for var, expr in preimage.target_bindings().items()}
    misses: List[List[str]] = []
    checked = 0
    for point in itertools.product(grid.points(), repeat=net.input_dim):
        checked += 1
        if forward(net, point) != expected:
            continue
        if not any(branch_membership(branch, bindings, point) for branch in preimage.branches):
            misses.append(point_text(point))
    if misses:
        logger.warning(f"Grid scan found {len(misses)} points missing from the preimage")
    return VerificationReport(
        branches_checked=len(preimage.branches),
        grid_points_checked=checked,
        completeness_misses=misses,
    )


def _determinant(matrix: Sequence[Sequence[Fraction]]) -> Fraction:
    """Leibniz expansion, kept separate from the elimination code it checks"""
    n = len(matrix)
    total = Fraction(0)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        product = Fraction(1)
        for row, col in enumerate(perm):
            product *= matrix[row][col]
            if product == 0:
                break
        total += -product if inversions % 2 else product
    return total


def _cramer(matrix: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Optional[List[Fraction]]:
    det = _determinant(matrix)
    if det == 0:
        return None
    solution = []
    for col in range(len(matrix)):
        replaced = [[rhs[r] if c == col else matrix[r][c] for c in range(len(matrix))] for r in range(len(matrix))]
        solution.append(_determinant(replaced) / det)
    return solution


def _box_for(variables: Sequence[VarId], box: Box) -> Dict[VarId, Tuple[Fraction, Fraction]]:
    if isinstance(box, Mapping):
        return {v: (Fraction(box[v][0]), Fraction(box[v][1])) for v in variables}
    lo, hi = box
    return {v: (Fraction(lo), Fraction(hi)) for v in variables}


def feasibility_oracle(system: InequalitySystem, box: Box, resolution: Scalar) -> Union[Feasible, ProbablyInfeasible]:
    """Brute-force search for an exact witness inside `box`.

    Candidates are the vertices cut out by constraint and box boundaries, the
    midpoints between vertex pairs, and a grid of the given resolution. Only a
    point that satisfies every constraint exactly is returned.
    """
    variables = sorted(system.universe)
    if len(variables) > MAX_ORACLE_VARIABLES:
        raise DimensionMismatch(
            f"oracle supports at most {MAX_ORACLE_VARIABLES} variables, system has {len(variables)}",
            {"variables": len(variables)},
        )
    if not variables:
        holds = all(c.ground_holds() for c in system.constraints)
        return Feasible({}) if holds else ProbablyInfeasible(1)

    bounds = _box_for(variables, box)
    n = len(variables)
    hyperplanes: List[Tuple[List[Fraction], Fraction]] = []
    for constraint in system.constraints:
        if constraint.is_ground:
            continue
        hyperplanes.append(([constraint.expr.coefficient(v) for v in variables], -constraint.expr.constant))
    for i, var in enumerate(variables):
        unit = [Fraction(1) if j == i else Fraction(0) for j in range(n)]
        hyperplanes.append((unit, bounds[var][0]))
        hyperplanes.append((unit, bounds[var][1]))

    tried = 0

    def accept(values: Sequence[Fraction]) -> Optional[Feasible]:
        assignment = dict(zip(variables, values))
        if system.holds(assignment):
            return Feasible(assignment)
        return None

    vertices: List[List[Fraction]] = []
    for combo in itertools.combinations(hyperplanes, n):
        point = _cramer([row for row, _ in combo], [value for _, value in combo])
        if point is None or point in vertices:
            continue
        vertices.append(point)
        tried += 1
        found = accept(point)
        if found:
            return found
    for a, b in itertools.combinations(vertices, 2):
        tried += 1
        found = accept([(x + y) / 2 for x, y in zip(a, b)])
        if found:
            return found

    step = Fraction(resolution)
    axes = [GridSpec(bounds[v][0], bounds[v][1], step).points() for v in variables]
    for values in itertools.product(*axes):
        tried += 1
        found = accept(values)
        if found:
            return found
    return ProbablyInfeasible(tried)


def cross_check_feasibility(system: InequalitySystem, box: Box, resolution: Scalar) -> Optional[str]:
    """Describe a hard disagreement between elimination and the oracle, or return None.

    Hard means elimination said Infeasible while the oracle found a witness, or
    the returned certificate does not check. The opposite case is only logged.
    """
    verdict = feasibility(system)
    oracle = feasibility_oracle(system, box, resolution)
    if isinstance(verdict, Infeasible):
        if verdict.certificate is None or not verdict.certificate.verify():
            return f"invalid certificate for [{'; '.join(str(c) for c in system.constraints)}]"
        if isinstance(oracle, Feasible):
            witness = {v.name: format_rational(x) for v, x in (oracle.witness or {}).items()}
            return f"eliminated to infeasible but oracle found {witness} for [{'; '.join(str(c) for c in system.constraints)}]"
    elif isinstance(oracle, ProbablyInfeasible):
        logger.debug(f"Oracle found no witness for a feasible system after {oracle.candidates_tried} candidates")
    return None


def verify_branch_systems(preimage: Preimage, box: Box = (-3, 3), resolution: Scalar = Fraction(1, 2)) -> VerificationReport:
    """Cross-check each branch system against the oracle; larger systems are skipped"""
    bindings = preimage.target_bindings()
    disagreements: List[str] = []
    checked = 0
    for branch in preimage.branches:
        system = branch.constraints.substitute(bindings)
        if len(system.universe) > MAX_ORACLE_VARIABLES:
            logger.debug(f"Branch {branch.branch_id} has {len(system.universe)} variables, skipping the oracle")
            continue
        checked += 1
        problem = cross_check_feasibility(system, box, resolution)
        if problem is not None:
            logger.warning(f"Oracle disagreement in branch {branch.branch_id}: {problem}")
            disagreements.append(f"branch {branch.branch_id}: {problem}")
    logger.debug(f"Oracle checked {checked} of {len(preimage.branches)} branch systems")
    return VerificationReport(branches_checked=len(preimage.branches), oracle_disagreements=disagreements)


def random_system(rng: random.Random, variables: Sequence[VarId], count: int, magnitude: int = 5) -> InequalitySystem:
    """Seeded random system with coefficients |num|, den <= magnitude"""
    def value() -> Fraction:
        return Fraction(rng.randint(-magnitude, magnitude), rng.randint(1, magnitude))

    constraints = []
    for _ in range(count):
        expr = AffineExpr({v: value() for v in variables}, value())
        constraints.append(LinearConstraint(expr, rng.random() < 0.25))
    return InequalitySystem(tuple(constraints), frozenset(variables))


class VerificationJob:
    """Runs the configured checks after a preimage computation"""

    def __init__(self, network: Network, preimage: Preimage, seed: Optional[int] = None, threads: int = 1):
        self.network = network
        self.preimage = preimage
        self.seed = settings.seed if seed is None else seed
        self.threads = threads

    def run(self, mode: str, samples: Optional[int] = None, grid: Optional[GridSpec] = None) -> VerificationReport:
        logger.info(f"Verifying {len(self.preimage)} branches ({mode})")
        report = verify_round_trip(self.network, self.preimage, samples, self.seed, self.threads)
        report = report.merge(verify_branch_systems(self.preimage))
        if mode == "grid":
            if self.preimage.target is None:
                raise DimensionMismatch("grid verification needs a concrete target")
            target = self.preimage.projected_target or self.preimage.target
            report = report.merge(verify_completeness_grid(self.network, target, self.preimage, grid or GridSpec(-3, 3, Fraction(1, 4))))
        if report.passed:
            logger.info("Verification passed")
        return report
