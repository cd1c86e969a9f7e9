"""Layer-by-layer inversion of a feed-forward network.

The engine walks the layers from the output back to the input. Every live
branch carries the targets of the current layer's outputs (affine in y, free
and slack variables) and the inequalities accumulated so far. Piecewise
layers fork each branch over all sign patterns of their units; affine layers
are solved in place. Variables created while inverting layer k carry
generation k.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from loguru import logger

from models.algebra import AffineExpr, AffineMap, Scalar, VarId, VarKind, linear_combination, output_var, slack_var
from models.constraints import Infeasible, InequalitySystem, LinearConstraint
from models.network import ActivationKind, Layer, Network, forward_from
from models.preimage import UNLIMITED, BranchBudget, EngineStats, Preimage, SignPattern, SolutionBranch
from processors.linear_systems import (
    Inconsistent,
    ProjectionResult,
    gauss_solve,
    least_squares_project,
    LinearSystem,
    project_onto_column_space,
    solve_general,
    solve_tall,
    solve_wide,
)
from processors.polyhedra import feasibility, fm_solve
from utils.config import settings
from utils.errors import (
    BudgetExceeded,
    DimensionMismatch,
    InconsistentLayer,
    InsufficientFreeVariables,
    InvalidActivation,
    PreimageError,
    RankDeficientAllPivots,
    RankDeficientColumns,
)


@dataclass(frozen=True)
class AffineInversion:
    input_map: AffineMap
    constraints: InequalitySystem
    projection: Optional[ProjectionResult] = None


def _drop_ground_true(constraints) -> Tuple[LinearConstraint, ...]:
    return tuple(c for c in constraints if not (c.is_ground and c.ground_holds()))


def _general_inversion(weights, shifted, generation: int) -> AffineInversion:
    """Free the non-pivot columns; unresolved residuals become equalities over y"""
    solution = solve_general(weights, shifted, generation)
    constraints: List[LinearConstraint] = []
    for residual in solution.leftover:
        if residual.is_constant:
            raise InconsistentLayer(f"layer system reduces to {residual} = 0", {"residual": str(residual)})
        constraints.extend(LinearConstraint.equality(residual))
    return AffineInversion(solution.solution, InequalitySystem(tuple(constraints)))


def _invert_affine(layer: Layer, rhs: Sequence[AffineExpr], generation: int,
                   allow_projection: bool = False) -> AffineInversion:
    if layer.activation.kind not in (ActivationKind.IDENTITY, ActivationKind.LINEAR):
        raise InvalidActivation(
            f"affine inversion needs an identity or linear layer, got {layer.activation.describe()}",
            {"layer": generation},
        )
    if len(rhs) != layer.outputs:
        raise DimensionMismatch(
            f"layer has {layer.outputs} outputs, got {len(rhs)} targets",
            {"layer": generation, "expected": layer.outputs, "received": len(rhs)},
        )
    weights, biases = layer.folded()
    shifted = [r - b for r, b in zip(rhs, biases)]
    rows, columns = layer.outputs, layer.inputs

    if rows == columns:
        result = gauss_solve(LinearSystem(weights, tuple(shifted)), generation)
        if isinstance(result, AffineMap):
            return AffineInversion(result, InequalitySystem())
        if isinstance(result, Inconsistent):
            raise InconsistentLayer(
                f"layer system reduces to {result.residual} = 0",
                {"row": result.row, "residual": str(result.residual)},
            )
        return _general_inversion(weights, shifted, generation)

    if columns > rows:
        try:
            return AffineInversion(solve_wide(weights, shifted, generation), InequalitySystem())
        except RankDeficientAllPivots:
            if not settings.pivoting:
                raise
            return _general_inversion(weights, shifted, generation)

    try:
        return AffineInversion(solve_tall(weights, shifted, generation), InequalitySystem())
    except InsufficientFreeVariables:
        pass
    try:
        return _general_inversion(weights, shifted, generation)
    except InconsistentLayer:
        if not (allow_projection and all(r.is_constant for r in shifted)):
            raise
    target = [r.constant for r in shifted]
    try:
        projection = least_squares_project(weights, target)
        inversion = AffineInversion(AffineMap(tuple(AffineExpr.const(v) for v in projection.solution)), InequalitySystem())
    except RankDeficientColumns:
        # Dependent columns: every input reaching the projected point, not just one
        projection = project_onto_column_space(weights, target)
        inversion = _general_inversion(weights, list(projection.projected_target), generation)
    logger.warning(
        f"Layer {generation} target is unreachable; using the closest reachable point "
        f"(residual {[str(e.constant) for e in projection.residual]})"
    )
    return AffineInversion(inversion.input_map, inversion.constraints, projection)


def invert_affine_layer(layer: Layer, rhs: Sequence[AffineExpr], generation: int = 0,
                        allow_projection: bool = False) -> Tuple[AffineMap, InequalitySystem]:
    """Solve W'x + b' = rhs for x, with any Linear activation folded into W' and b'"""
    inversion = _invert_affine(layer, rhs, generation, allow_projection)
    return inversion.input_map, inversion.constraints


def enumerate_sign_patterns(width: int, layer_index: int = 0) -> Iterator[SignPattern]:
    """All 2**width patterns in bitmask order, lazily"""
    if width < 1:
        raise ValueError(f"sign patterns need a positive width, got {width}")
    for mask in range(2 ** width):
        yield SignPattern(layer_index, mask, width)


def _identity_copy(layer: Layer) -> Layer:
    return Layer(layer.weights, layer.biases)


def invert_prelu_layer(layer: Layer, rhs: Sequence[AffineExpr], pattern: SignPattern,
                       generation: int = 0) -> Tuple[AffineMap, InequalitySystem]:
    if layer.activation.kind is not ActivationKind.PRELU:
        raise InvalidActivation(f"expected a prelu layer, got {layer.activation.describe()}", {"layer": generation})
    alpha = layer.activation.alpha
    targets = [r if pattern.is_positive(j) else r / alpha for j, r in enumerate(rhs)]
    input_map, system = invert_affine_layer(_identity_copy(layer), targets, generation)

    constraints = list(system.constraints)
    for j, (row, bias) in enumerate(zip(layer.weights, layer.biases)):
        pre = linear_combination(row, input_map.outputs, bias)
        constraints.append(LinearConstraint.gt(pre) if pattern.is_positive(j) else LinearConstraint.le(pre))
    return input_map, InequalitySystem(_drop_ground_true(constraints))


def invert_relu_layer(layer: Layer, rhs: Sequence[AffineExpr], pattern: SignPattern,
                      generation: int = 0) -> Tuple[AffineMap, InequalitySystem]:
    """Positive units pass their target through; clamped units take a slack s <= 0 and pin the target to 0"""
    if layer.activation.kind is not ActivationKind.RELU:
        raise InvalidActivation(f"expected a relu layer, got {layer.activation.describe()}", {"layer": generation})
    targets: List[AffineExpr] = []
    constraints: List[LinearConstraint] = []
    for j, r in enumerate(rhs):
        if pattern.is_positive(j):
            targets.append(r)
            constraints.append(LinearConstraint.gt(r))
        else:
            slack = AffineExpr.var(slack_var(j, generation))
            targets.append(slack)
            constraints.append(LinearConstraint.le(slack))
            constraints.extend(LinearConstraint.equality(r))
    input_map, system = invert_affine_layer(_identity_copy(layer), targets, generation)
    bound = [c.substitute(input_map.bindings) for c in constraints]
    return input_map, InequalitySystem(_drop_ground_true(bound + list(system.constraints)))


@dataclass(frozen=True)
class BranchState:
    patterns: Tuple[SignPattern, ...]
    rhs: Tuple[AffineExpr, ...]
    constraints: InequalitySystem

    @property
    def branch_id(self) -> str:
        return "-".join(str(p) for p in sorted(self.patterns, key=lambda p: p.layer_index))


@dataclass
class _Expansion:
    children: List[BranchState]
    pruned: int = 0
    forks: int = 0


class PreimageEngine:
    """Computes the preimage of a target under a network, one layer at a time"""

    def __init__(self, network: Network, budget: BranchBudget = UNLIMITED, symbolic: bool = False,
                 threads: Optional[int] = None, project_unreachable: Optional[bool] = None):
        self.network = network
        self.budget = budget
        self.symbolic = symbolic
        self.threads = max(1, threads if threads is not None else settings.threads)
        self.project_unreachable = settings.project_unreachable if project_unreachable is None else project_unreachable
        self.stats = EngineStats()
        # piecewise units strictly closer to the input than layer k
        self._widths_below = []
        total = 0
        for layer in network.layers:
            self._widths_below.append(total)
            if layer.activation.is_piecewise:
                total += layer.outputs

    def _advance(self, state: BranchState, inversion_map: AffineMap, added: InequalitySystem,
                 pattern: Optional[SignPattern], check: bool) -> Optional[BranchState]:
        """Carry a branch through one layer; None when the branch turns out empty"""
        bindings = inversion_map.bindings
        carried = [c.substitute(bindings) for c in state.constraints] if bindings else list(state.constraints)
        constraints = _drop_ground_true(carried + list(added.constraints))
        if any(c.is_ground for c in constraints):
            return None
        universe = inversion_map.input_universe
        system = InequalitySystem(constraints, universe)
        self.stats.observe(system)
        if check and not self.symbolic and constraints and isinstance(feasibility(system), Infeasible):
            return None
        patterns = state.patterns + ((pattern,) if pattern is not None else ())
        return BranchState(patterns, inversion_map.outputs, system)

    def _try_pattern(self, layer: Layer, index: int, state: BranchState, pattern: SignPattern) -> Optional[BranchState]:
        try:
            if layer.activation.kind is ActivationKind.PRELU:
                input_map, added = invert_prelu_layer(layer, state.rhs, pattern, index)
            else:
                input_map, added = invert_relu_layer(layer, state.rhs, pattern, index)
        except InconsistentLayer:
            logger.debug(f"Layer {index} pattern {pattern} inconsistent on branch '{state.branch_id}'")
            return None
        except PreimageError as e:
            raise e.with_context(layer=index, branch=state.branch_id, pattern=str(pattern))
        child = self._advance(state, input_map, added, pattern, check=True)
        if child is None:
            logger.debug(f"Layer {index} pattern {pattern} pruned on branch '{state.branch_id}'")
        return child

    def _expand(self, layer: Layer, index: int, state: BranchState) -> _Expansion:
        expansion = _Expansion([])
        for pattern in enumerate_sign_patterns(layer.outputs, index):
            expansion.forks += 1
            child = self._try_pattern(layer, index, state, pattern)
            if child is None:
                expansion.pruned += 1
            else:
                expansion.children.append(child)
        return expansion

    def _fork_layer(self, layer: Layer, index: int, states: List[BranchState]) -> Tuple[List[BranchState], int, bool]:
        """Fork every live branch; returns (children, pruned, stopped early)"""
        if self.budget.unlimited:
            if self.threads > 1 and len(states) > 1:
                with ThreadPoolExecutor(max_workers=self.threads) as pool:
                    expansions = list(pool.map(lambda s: self._expand(layer, index, s), states))
            else:
                expansions = [self._expand(layer, index, s) for s in states]
            children = [child for e in expansions for child in e.children]
            self.stats.forks += sum(e.forks for e in expansions)
            return children, sum(e.pruned for e in expansions), False

        children: List[BranchState] = []
        pruned = 0
        for state in states:
            for pattern in enumerate_sign_patterns(layer.outputs, index):
                if self.budget.max_forks is not None and self.stats.forks >= self.budget.max_forks:
                    return children, pruned, True
                if self.budget.max_live_branches is not None and len(children) >= self.budget.max_live_branches:
                    return children, pruned, True
                self.stats.forks += 1
                child = self._try_pattern(layer, index, state, pattern)
                if child is None:
                    pruned += 1
                else:
                    children.append(child)
        return children, pruned, False

    def _invert_linear(self, layer: Layer, index: int, states: List[BranchState],
                       seen_piecewise: bool) -> Tuple[List[BranchState], int, Optional[ProjectionResult]]:
        survivors: List[BranchState] = []
        pruned = 0
        projection: Optional[ProjectionResult] = None
        for state in states:
            allow = (
                self.project_unreachable
                and not self.symbolic
                and not seen_piecewise
                and layer.outputs > layer.inputs
            )
            try:
                inversion = _invert_affine(layer, state.rhs, index, allow_projection=allow)
            except InconsistentLayer:
                logger.debug(f"Layer {index} inconsistent on branch '{state.branch_id}'")
                pruned += 1
                continue
            except PreimageError as e:
                raise e.with_context(layer=index, branch=state.branch_id)
            if inversion.projection is not None:
                projection = inversion.projection
            check = bool(inversion.input_map.bindings) or bool(inversion.constraints.constraints)
            child = self._advance(state, inversion.input_map, inversion.constraints, None, check)
            if child is None:
                pruned += 1
                continue
            survivors.append(child)
        return survivors, pruned, projection

    def _finish(self, state: BranchState) -> Optional[SolutionBranch]:
        input_map = AffineMap(state.rhs)
        system = InequalitySystem(state.constraints.constraints, state.constraints.universe | input_map.input_universe)
        variables = sorted(system.universe)
        if self.symbolic:
            keep = [v for v in variables if v.kind is not VarKind.OUTPUT] + [v for v in variables if v.kind is VarKind.OUTPUT]
        else:
            keep = variables
        solved = fm_solve(system, keep)
        if isinstance(solved, Infeasible):
            logger.debug(f"Branch '{state.branch_id}' infeasible at resolution")
            return None
        return SolutionBranch(state.patterns, input_map, system, solved)

    def run(self, target: Optional[Sequence[Scalar]]) -> Preimage:
        network = self.network
        if target is None:
            self.symbolic = True
            concrete: Optional[Tuple[Fraction, ...]] = None
        else:
            if len(target) != network.output_dim:
                raise DimensionMismatch(
                    f"target has {len(target)} values, network has {network.output_dim} outputs",
                    {"expected": network.output_dim, "received": len(target)},
                )
            concrete = tuple(Fraction(v) for v in target)

        if self.symbolic:
            rhs = tuple(AffineExpr.var(output_var(i)) for i in range(network.output_dim))
        else:
            rhs = tuple(AffineExpr.const(v) for v in concrete)

        states = [BranchState((), rhs, InequalitySystem())]
        enumerated = 0
        partial = False
        seen_piecewise = False
        projected_target: Optional[Tuple[Fraction, ...]] = None

        for index in reversed(range(len(network.layers))):
            layer = network.layers[index]
            subtree = 2 ** self._widths_below[index]
            if layer.activation.is_piecewise:
                parents = len(states)
                states, pruned, stopped = self._fork_layer(layer, index, states)
                seen_piecewise = True
                if stopped:
                    partial = True
                    message = (
                        f"Branch budget reached at layer {index}: {len(states)} live branches, "
                        f"{self.stats.forks} forks"
                    )
                    if self.budget.strict:
                        raise BudgetExceeded(message, {"layer": index, "forks": self.stats.forks})
                    logger.warning(message)
                logger.info(f"Layer {index}: {parents} branches forked into {len(states)} ({pruned} pruned)")
            else:
                states, pruned, projection = self._invert_linear(layer, index, states, seen_piecewise)
                if projection is not None:
                    projected_target = tuple(forward_from(network, index, projection.solution))
                    logger.warning(f"Target projected to the closest reachable output {[str(v) for v in projected_target]}")
                logger.info(f"Layer {index} inverted: {len(states)} branches")
            self.stats.pruned += pruned
            enumerated += pruned * subtree
            if not states:
                break

        branches: List[SolutionBranch] = []
        for state in states:
            enumerated += 1
            branch = self._finish(state)
            if branch is None:
                self.stats.pruned += 1
                continue
            branches.append(branch)
        branches.sort(key=lambda b: b.branch_id)

        logger.info(f"Preimage has {len(branches)} branches ({enumerated} of {network.omega_bound} patterns decided)")
        return Preimage(
            target=concrete,
            branches=tuple(branches),
            enumerated_count=enumerated,
            omega_bound=network.omega_bound,
            partial=partial,
            projected_target=projected_target,
            stats=self.stats,
            input_dim=network.input_dim,
            output_dim=network.output_dim,
        )


def compute_preimage(net: Network, target: Optional[Sequence[Scalar]], budget: Optional[BranchBudget] = None,
                     symbolic: bool = False, threads: Optional[int] = None) -> Preimage:
    if budget is None:
        budget = BranchBudget(settings.max_branches, settings.max_forks, settings.strict_budget)
    return PreimageEngine(net, budget, symbolic=symbolic, threads=threads).run(target)


def branch_membership(branch: SolutionBranch, target_bindings: Mapping[VarId, Union[Scalar, AffineExpr]],
                      candidate: Sequence[Scalar]) -> bool:
    """True iff some assignment of the branch's free and slack variables maps it onto `candidate`"""
    if len(candidate) != len(branch.input_map):
        raise DimensionMismatch(
            f"candidate has {len(candidate)} values, branch produces {len(branch.input_map)} inputs",
            {"expected": len(branch.input_map), "received": len(candidate)},
        )
    bindings = {
        var: value if isinstance(value, AffineExpr) else AffineExpr.const(value)
        for var, value in target_bindings.items()
    }
    equalities: List[LinearConstraint] = []
    for expr, value in zip(branch.input_map.outputs, candidate):
        equalities.extend(LinearConstraint.equality(expr.substitute(bindings) - Fraction(value)))
    system = branch.constraints.substitute(bindings).extended(equalities)
    return not isinstance(feasibility(system), Infeasible)
