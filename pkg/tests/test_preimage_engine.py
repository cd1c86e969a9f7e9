import itertools
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import pytest

from models.algebra import AffineExpr, AffineMap, free_var, output_var, slack_var
from models.constraints import Infeasible, InequalitySystem, LinearConstraint
from models.network import Activation, Network, forward
from models.preimage import BranchBudget, EngineStats, SignPattern, SolutionBranch
from models.report import GridSpec
from processors.polyhedra import feasibility
from processors.preimage_engine import (
    PreimageEngine,
    branch_membership,
    compute_preimage,
    enumerate_sign_patterns,
    invert_affine_layer,
    invert_prelu_layer,
    invert_relu_layer,
)
from tests.conftest import make_layer
from utils.errors import BudgetExceeded, DimensionMismatch, InvalidActivation

Y0 = output_var(0)
UNLIMITED = BranchBudget()


def y(i=0):
    return AffineExpr.var(output_var(i))


def const(value):
    return AffineExpr.const(value)


def pattern(mask, width=1, layer=0):
    return SignPattern(layer, mask, width)


@pytest.mark.unit
class TestSignPatterns:
    """Deterministic bitmask enumeration"""

    def test_width_one(self):
        """NonPositive first, then Positive"""
        patterns = list(enumerate_sign_patterns(1))
        assert [p.is_positive(0) for p in patterns] == [False, True]

    def test_width_two(self):
        """Four patterns in bitmask order"""
        assert [str(p) for p in enumerate_sign_patterns(2)] == ["00", "01", "10", "11"]

    def test_bit_meaning(self):
        """Unit i is positive iff bit i is set"""
        p = pattern(0b10, width=2)
        assert not p.is_positive(0)
        assert p.is_positive(1)

    def test_zero_width_rejected(self):
        """Zero-width layers have no patterns"""
        with pytest.raises(ValueError):
            list(enumerate_sign_patterns(0))

    def test_lazy(self):
        """Enumeration can stop early"""
        iterator = enumerate_sign_patterns(30)
        assert str(next(iterator)) == "0" * 30


@pytest.mark.unit
class TestInvertAffineLayer:
    """Identity and Linear layers"""

    def test_identity_layer(self):
        """Identity weights subtract the bias"""
        layer = make_layer([[1, 0], [0, 1]], [1, 2])
        input_map, constraints = invert_affine_layer(layer, [y(0), y(1)])
        assert input_map.outputs == (y(0) - 1, y(1) - 2)
        assert len(constraints) == 0

    def test_linear_fold(self):
        """Linear(2, 0) over weight 1 and bias 3 gives x = y/2 - 3"""
        layer = make_layer([[1]], [3], Activation.linear(2, 0))
        input_map, _ = invert_affine_layer(layer, [y()])
        assert input_map.outputs == (y() / 2 - 3,)

    def test_linear_fold_with_offset(self):
        """The folded map inverts forward evaluation including beta"""
        layer = make_layer([[2]], [1], Activation.linear(3, Fraction(1, 2)))
        input_map, _ = invert_affine_layer(layer, [const(10)])
        x = input_map.outputs[0].constant
        assert layer.forward([x]) == [10]

    def test_wide_layer(self):
        """[[1, 1]] gives x = (y - t, t)"""
        layer = make_layer([[1, 1]], [0])
        input_map, _ = invert_affine_layer(layer, [y()])
        t = AffineExpr.var(free_var(0, 0))
        assert input_map.outputs == (y() - t, t)

    def test_rank_deficient_square_symbolic(self):
        """A singular square layer frees a column and constrains the outputs"""
        layer = make_layer([[1, 1], [2, 2]], [0, 0])
        input_map, constraints = invert_affine_layer(layer, [y(0), y(1)])
        assert len(input_map.input_universe & {free_var(0, 0)}) == 1
        assert len(constraints) == 2
        assert all(c.holds({output_var(0): 1, output_var(1): 2}) for c in constraints)
        assert not all(c.holds({output_var(0): 1, output_var(1): 3}) for c in constraints)

    def test_piecewise_layer_rejected(self):
        """ReLU layers need a sign pattern"""
        with pytest.raises(InvalidActivation):
            invert_affine_layer(make_layer([[1]], [0], Activation.relu()), [y()])


@pytest.mark.unit
class TestInvertPiecewiseLayers:
    """PReLU and ReLU per-pattern inversion"""

    def test_prelu_positive(self):
        """Positive side passes the target through with y > 0"""
        layer = make_layer([[1]], [0], Activation.prelu(Fraction(1, 2)))
        input_map, constraints = invert_prelu_layer(layer, [y()], pattern(1))
        assert input_map.outputs == (y(),)
        assert constraints.constraints == (LinearConstraint.gt(y()),)

    def test_prelu_non_positive(self):
        """Non-positive side divides by alpha with 2y <= 0"""
        layer = make_layer([[1]], [0], Activation.prelu(Fraction(1, 2)))
        input_map, constraints = invert_prelu_layer(layer, [y()], pattern(0))
        assert input_map.outputs == (y() * 2,)
        assert constraints.constraints == (LinearConstraint.le(y() * 2),)

    def test_prelu_alpha_one(self):
        """Both sides give x = y when alpha is 1"""
        layer = make_layer([[1]], [0], Activation.prelu(1))
        first, _ = invert_prelu_layer(layer, [y()], pattern(0))
        second, _ = invert_prelu_layer(layer, [y()], pattern(1))
        assert first.outputs == second.outputs == (y(),)

    def test_relu_positive_concrete(self):
        """Target 5 on the positive side gives x = 5 and no remaining constraint"""
        layer = make_layer([[1]], [0], Activation.relu())
        input_map, constraints = invert_relu_layer(layer, [const(5)], pattern(1))
        assert input_map.outputs == (const(5),)
        assert len(constraints) == 0

    def test_relu_zero_non_positive(self):
        """Target 0 on the clamped side gives x = s with s <= 0"""
        layer = make_layer([[1]], [0], Activation.relu())
        input_map, constraints = invert_relu_layer(layer, [const(0)], pattern(0))
        s = AffineExpr.var(slack_var(0, 0))
        assert input_map.outputs == (s,)
        assert constraints.constraints == (LinearConstraint.le(s),)

    def test_relu_negative_target(self):
        """A negative target leaves a ground-false constraint on both sides"""
        layer = make_layer([[1]], [0], Activation.relu())
        for mask in (0, 1):
            _, constraints = invert_relu_layer(layer, [const(-1)], pattern(mask))
            assert any(c.is_ground and not c.ground_holds() for c in constraints)


@pytest.mark.integration
class TestComputePreimage:
    """End-to-end preimages"""

    def test_identity_net(self, identity_net):
        """One branch with x = target - bias"""
        preimage = compute_preimage(identity_net, [3, 4], UNLIMITED)
        assert len(preimage) == 1
        branch = preimage.branches[0]
        assert branch.branch_id == ""
        assert branch.input_map.outputs == (const(2), const(2))
        assert len(branch.constraints) == 0
        assert preimage.enumerated_count == preimage.omega_bound == 1

    def test_relu_split(self, relu_split_net):
        """Target (2, 0) through [[1], [-1]] has the single preimage x = 2"""
        preimage = compute_preimage(relu_split_net, [2, 0], UNLIMITED)
        assert [b.branch_id for b in preimage.branches] == ["01"]
        assert preimage.branches[0].input_map.outputs == (const(2),)
        assert preimage.enumerated_count == 4
        assert branch_membership(preimage.branches[0], {}, [2])
        assert not branch_membership(preimage.branches[0], {}, [1])

    def test_relu_split_matches_scan(self, relu_split_net):
        """Only x = 2 on a quarter-step scan maps to (2, 0), and it is a member"""
        preimage = compute_preimage(relu_split_net, [2, 0], UNLIMITED)
        for k in range(-16, 17):
            x = Fraction(k, 4)
            maps = forward(relu_split_net, [x]) == [2, 0]
            member = any(branch_membership(b, {}, [x]) for b in preimage.branches)
            assert maps == member == (x == 2)

    def test_relu_zero(self, relu_scalar_net):
        """The preimage of 0 is the clamped branch x = s, s <= 0"""
        preimage = compute_preimage(relu_scalar_net, [0], UNLIMITED)
        assert [b.branch_id for b in preimage.branches] == ["0"]
        assert preimage.branches[0].slack_vars() == (slack_var(0, 0),)

    def test_relu_negative_target_empty(self, relu_scalar_net):
        """A negative target has no preimage"""
        preimage = compute_preimage(relu_scalar_net, [-1], UNLIMITED)
        assert preimage.is_empty
        assert preimage.enumerated_count == 2

    def test_unlimited_budget(self, budget_net):
        """Seven of eight patterns are feasible and all eight are counted"""
        preimage = compute_preimage(budget_net, [1], UNLIMITED)
        assert len(preimage) == 7
        assert preimage.enumerated_count == preimage.omega_bound == 8
        assert not preimage.partial

    def test_live_branch_budget(self, budget_net):
        """Four live branches stop the enumeration in bitmask order"""
        preimage = compute_preimage(budget_net, [1], BranchBudget(max_live_branches=4))
        assert preimage.partial
        assert [b.branch_id for b in preimage.branches] == ["001", "010", "011", "100"]

    def test_pinned_free_variables(self, budget_net):
        """Clamped units force their free variables to 0"""
        preimage = compute_preimage(budget_net, [1], UNLIMITED)
        branch = next(b for b in preimage.branches if b.branch_id == "001")
        assert branch.free_vars() == (free_var(0, 1), free_var(1, 1))
        assert set(branch.pinned()) >= {free_var(0, 1), free_var(1, 1)}

    def test_fork_budget(self, budget_net):
        """Three forks leave the two feasible ones among them"""
        preimage = compute_preimage(budget_net, [1], BranchBudget(max_forks=3))
        assert preimage.partial
        assert [b.branch_id for b in preimage.branches] == ["001", "010"]

    def test_strict_budget(self, budget_net):
        """Strict mode raises instead of truncating"""
        with pytest.raises(BudgetExceeded):
            compute_preimage(budget_net, [1], BranchBudget(max_live_branches=4, strict=True))

    def test_threads_do_not_change_result(self, seeded_network):
        """Parallel expansion returns the same branches in the same order"""
        net, rng = seeded_network(17, [2, 2, 2, 1])
        target = forward(net, [Fraction(1, 3), Fraction(-2, 5)])
        serial = compute_preimage(net, target, UNLIMITED, threads=1)
        parallel = compute_preimage(net, target, UNLIMITED, threads=4)
        assert [b.branch_id for b in serial.branches] == [b.branch_id for b in parallel.branches]
        assert [b.input_map for b in serial.branches] == [b.input_map for b in parallel.branches]

    def test_threads_keep_engine_stats(self, seeded_network):
        """Fork, prune and peak counts do not depend on the thread count"""
        net, rng = seeded_network(29, [3, 3, 2, 1])
        target = forward(net, [Fraction(1, 2), Fraction(-1, 3), 2])
        serial = compute_preimage(net, target, UNLIMITED, threads=1).stats
        for _ in range(3):
            parallel = compute_preimage(net, target, UNLIMITED, threads=8).stats
            assert (parallel.forks, parallel.pruned, parallel.peak_constraints) == (
                serial.forks, serial.pruned, serial.peak_constraints
            )

    def test_concurrent_observe_keeps_peak(self):
        """Racing observers never lose the largest system"""
        stats = EngineStats()
        systems = [InequalitySystem(tuple(LinearConstraint.ge(y()) for _ in range(n))) for n in range(1, 200)]
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(stats.observe, systems * 5))
        assert stats.peak_constraints == 199

    def test_branch_count_law(self, seeded_network):
        """Unlimited enumeration decides exactly 2^(piecewise units) patterns"""
        for seed in range(5):
            net, rng = seeded_network(seed, [2, 2, 2, 1])
            target = forward(net, [Fraction(rng.randint(-5, 5), 3), Fraction(rng.randint(-5, 5), 2)])
            preimage = compute_preimage(net, target, UNLIMITED)
            assert preimage.enumerated_count == preimage.omega_bound == 16

    def test_linear_network_single_branch(self, wide_net):
        """Networks without piecewise layers have one branch"""
        preimage = compute_preimage(wide_net, [1], UNLIMITED)
        assert len(preimage) == 1
        assert preimage.branches[0].free_vars() == (free_var(0, 0),)

    def test_completeness(self, seeded_network):
        """The generating input belongs to some branch"""
        for seed in range(10):
            net, rng = seeded_network(seed, [2, 3, 2])
            x0 = [Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(2)]
            preimage = compute_preimage(net, forward(net, x0), UNLIMITED)
            assert any(branch_membership(b, {}, x0) for b in preimage.branches)

    def test_prelu_one_collapse(self):
        """PReLU(1) keeps only the branch consistent with the pre-activation sign"""
        prelu = Network((make_layer([[2]], [1], Activation.prelu(1)),), 1)
        identity = Network((make_layer([[2]], [1]),), 1)
        from_prelu = compute_preimage(prelu, [5], UNLIMITED)
        from_identity = compute_preimage(identity, [5], UNLIMITED)
        assert [b.input_map.outputs for b in from_prelu.branches] == [(const(2),)]
        assert from_identity.branches[0].input_map.outputs == (const(2),)
        assert from_prelu.enumerated_count == 2

    def test_projection_of_unreachable_target(self, tall_linear_net):
        """An unreachable target of a tall linear net is projected to the closest output"""
        preimage = compute_preimage(tall_linear_net, [0, 2], UNLIMITED)
        assert preimage.projected_target == (1, 1)
        assert preimage.branches[0].input_map.outputs == (const(1),)

    def test_projection_disabled(self, tall_linear_net):
        """Without projection the unreachable target has an empty preimage"""
        preimage = PreimageEngine(tall_linear_net, UNLIMITED, project_unreachable=False).run([0, 2])
        assert preimage.is_empty
        assert preimage.projected_target is None

    def test_reachable_tall_target_not_projected(self, tall_linear_net):
        """A reachable target keeps its exact preimage"""
        preimage = compute_preimage(tall_linear_net, [3, 3], UNLIMITED)
        assert preimage.projected_target is None
        assert preimage.branches[0].input_map.outputs == (const(3),)

    def test_projection_with_dependent_columns(self):
        """Repeated columns still project; every input summing to 1/3 is kept"""
        net = Network((make_layer([[1, 1], [1, 1], [1, 1]], [0, 0, 0]),), 2)
        preimage = compute_preimage(net, [0, 0, 1], UNLIMITED)
        third = Fraction(1, 3)
        assert preimage.projected_target == (third, third, third)
        (branch,) = preimage.branches
        (free,) = branch.free_vars()
        for value in (-2, 0, Fraction(5, 2)):
            inputs = branch.input_map.evaluate({free: Fraction(value)})
            assert sum(inputs) == third
            assert forward(net, inputs) == [third] * 3

    def test_symbolic_mode(self, prelu_half_net):
        """Symbolic outputs keep both PReLU branches with constraints over y"""
        preimage = compute_preimage(prelu_half_net, None, UNLIMITED)
        assert preimage.target is None
        assert [b.branch_id for b in preimage.branches] == ["0", "1"]
        negative, positive = preimage.branches
        assert negative.input_map.outputs == (y() * 2,)
        assert branch_membership(positive, {Y0: 3}, [3])
        assert not branch_membership(negative, {Y0: 3}, [6])
        assert branch_membership(negative, {Y0: -3}, [-6])

    def test_target_length_checked(self, identity_net):
        """Target length must match the output width"""
        with pytest.raises(DimensionMismatch):
            compute_preimage(identity_net, [1], UNLIMITED)


@pytest.mark.unit
class TestBranchMembership:
    """Exact membership through feasibility"""

    def test_free_variable_branch(self):
        """x = (y - t, t) with y = 5 contains (2, 3) but not (2, 4)"""
        t = AffineExpr.var(free_var(0, 0))
        branch = SolutionBranch((), AffineMap((y() - t, t)), InequalitySystem())
        assert branch_membership(branch, {Y0: 5}, [2, 3])
        assert not branch_membership(branch, {Y0: 5}, [2, 4])

    def test_candidate_length_checked(self):
        """Candidate length must match the input width"""
        branch = SolutionBranch((), AffineMap((y(),)), InequalitySystem())
        with pytest.raises(DimensionMismatch):
            branch_membership(branch, {Y0: 1}, [1, 2])


@pytest.mark.integration
class TestBranchDisjointness:
    """Distinct sign patterns never share an input"""

    @pytest.mark.parametrize("activation", [Activation.prelu(Fraction(1, 2)), Activation.relu()])
    def test_opposite_signs_are_infeasible_together(self, activation):
        """Joining two patterns' constraints leaves a unit both > 0 and <= 0"""
        layer = make_layer([[2, 1], [1, -1]], [1, 0], activation)
        invert = invert_prelu_layer if activation.kind.value == "prelu" else invert_relu_layer
        systems = {
            mask: invert(layer, [y(0), y(1)], pattern(mask, width=2))[1] for mask in range(4)
        }
        for first in range(4):
            for second in range(first + 1, 4):
                joined = systems[first].extended(systems[second].constraints)
                assert isinstance(feasibility(joined), Infeasible), f"{first:02b} and {second:02b}"

    def test_each_input_in_at_most_one_branch(self, budget_net):
        """Grid points reaching the target belong to exactly one branch, others to none"""
        preimage = compute_preimage(budget_net, [1], UNLIMITED)
        axis = GridSpec(-1, 1, Fraction(1, 2)).points()
        for point in itertools.product(axis, repeat=3):
            members = sum(1 for b in preimage.branches if branch_membership(b, {}, list(point)))
            assert members == (1 if forward(budget_net, list(point)) == [1] else 0), point
