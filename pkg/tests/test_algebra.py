import random
from fractions import Fraction

import pytest

from models.algebra import (
    AffineExpr,
    AffineMap,
    VarKind,
    affine_evaluate,
    affine_substitute,
    free_var,
    input_var,
    linear_combination,
    output_var,
    slack_var,
)
from utils.errors import MissingVariable


@pytest.mark.unit
class TestVarId:
    """Variable identity, ordering and rendering"""

    def test_names(self):
        """Outputs render as y<i>, others as <kind><generation>.<index>"""
        assert output_var(0).name == "y0"
        assert free_var(2, 0).name == "t0.2"
        assert slack_var(0, 1).name == "s1.0"
        assert input_var(1, 3).name == "x3.1"

    def test_kind_order(self):
        """Outputs sort before inputs, free and slack variables"""
        ordered = sorted([slack_var(0, 0), free_var(0, 0), input_var(0, 0), output_var(5)])
        assert [v.kind for v in ordered] == [VarKind.OUTPUT, VarKind.INPUT, VarKind.FREE, VarKind.SLACK]

    def test_generation_before_index(self):
        """Within a kind, generation orders before index"""
        assert free_var(9, 0) < free_var(0, 1)

    def test_negative_position_rejected(self):
        """Negative indices are invalid"""
        with pytest.raises(ValueError):
            free_var(-1, 0)


@pytest.mark.unit
class TestAffineExpr:
    """Canonical exact affine expressions"""

    def test_cancellation_gives_constant(self, y0):
        """Terms that cancel disappear"""
        expr = AffineExpr({y0: 2}, 1) + AffineExpr({y0: -2})
        assert expr.is_constant
        assert expr == AffineExpr.const(1)

    def test_scale_and_divide(self, y0):
        """Scaling multiplies coefficients and constant exactly"""
        expr = AffineExpr({y0: 3}, 1) / 3
        assert expr.coefficient(y0) == 1
        assert expr.constant == Fraction(1, 3)

    def test_divide_by_zero(self, y0):
        """Division by zero raises"""
        with pytest.raises(ZeroDivisionError):
            AffineExpr.var(y0) / 0

    def test_floats_rejected(self, y0):
        """Only exact rationals are accepted as coefficients"""
        with pytest.raises(TypeError):
            AffineExpr({y0: 0.5})

    def test_substitution_is_simultaneous(self):
        """Swapping two variables does not chain the replacements"""
        a, b = free_var(0, 0), free_var(1, 0)
        expr = AffineExpr({a: 1, b: 2})
        swapped = affine_substitute(expr, {a: AffineExpr.var(b), b: AffineExpr.var(a)})
        assert swapped == AffineExpr({a: 2, b: 1})

    def test_substitution_keeps_unbound(self, y0):
        """Unbound variables pass through unchanged"""
        t = free_var(0, 0)
        expr = AffineExpr({y0: 1, t: 1})
        result = expr.substitute({t: AffineExpr.const(4)})
        assert result == AffineExpr({y0: 1}, 4)

    def test_evaluate(self, y0):
        """Evaluation is exact"""
        t = free_var(0, 1)
        expr = AffineExpr({y0: Fraction(1, 2), t: -1}, 3)
        assert affine_evaluate(expr, {y0: 1, t: Fraction(1, 4)}) == Fraction(13, 4)

    def test_evaluate_missing_variable(self, y0):
        """A variable without a value raises MissingVariable"""
        with pytest.raises(MissingVariable):
            AffineExpr.var(y0).evaluate({})

    def test_str(self, y0):
        """Text form lists terms in variable order"""
        expr = AffineExpr({y0: 2, free_var(0, 1): Fraction(-1, 2)}, 3)
        assert str(expr) == "2*y0 - (1/2)*t1.0 + 3"
        assert str(AffineExpr()) == "0"
        assert str(-AffineExpr.var(y0)) == "-y0"

    def test_hash_matches_equality(self, y0):
        """Equal expressions hash equally"""
        assert hash(AffineExpr({y0: 1}, 2)) == hash(AffineExpr.var(y0) + 2)

    def test_linear_combination(self, y0):
        """Weighted sum with a constant"""
        t = free_var(0, 0)
        result = linear_combination([2, -1], [AffineExpr.var(y0), AffineExpr({t: 1}, 1)], 5)
        assert result == AffineExpr({y0: 2, t: -1}, 4)


@pytest.mark.unit
class TestAffineMap:
    """Ordered affine outputs"""

    def test_input_universe(self, y0):
        """Universe collects variables of every component"""
        t = free_var(0, 0)
        mapping = AffineMap((AffineExpr.var(y0) - AffineExpr.var(t), AffineExpr.var(t)))
        assert mapping.input_universe == frozenset({y0, t})

    def test_substitute_updates_bindings(self, y0):
        """Substitution reaches both outputs and recorded bindings"""
        t, s = free_var(0, 0), slack_var(0, 0)
        mapping = AffineMap((AffineExpr.var(t),), {s: AffineExpr.var(t)})
        result = mapping.substitute({t: AffineExpr.var(y0)})
        assert result.outputs == (AffineExpr.var(y0),)
        assert result.bindings[s] == AffineExpr.var(y0)

    def test_evaluate(self, y0):
        """All components evaluate"""
        mapping = AffineMap((AffineExpr.var(y0), AffineExpr.const(2)))
        assert mapping.evaluate({y0: 7}) == (7, 2)


POOL = (output_var(0), output_var(1), input_var(0, 0), free_var(0, 1), slack_var(1, 1))


def random_expr(rng, bits=8):
    def value():
        return Fraction(rng.randint(-(2 ** bits), 2 ** bits), rng.randint(1, 2 ** bits))

    return AffineExpr({v: value() for v in rng.sample(POOL, rng.randint(0, len(POOL)))}, value())


@pytest.mark.unit
class TestAffineLaws:
    """Seeded algebraic laws over random expressions"""

    def test_addition_commutes(self):
        """e1 + e2 and e2 + e1 are the same canonical expression"""
        rng = random.Random(1)
        for _ in range(200):
            a, b = random_expr(rng), random_expr(rng)
            assert a + b == b + a
            assert str(a + b) == str(b + a)
            assert hash(a + b) == hash(b + a)

    def test_self_difference_is_zero(self):
        """e - e has no terms and a zero constant"""
        rng = random.Random(2)
        for _ in range(200):
            e = random_expr(rng)
            assert e - e == AffineExpr()
            assert (e - e).is_constant

    def test_substitute_then_evaluate(self):
        """Evaluating a substitution equals evaluating with the substituted values"""
        rng = random.Random(3)
        for _ in range(200):
            expr = random_expr(rng)
            bindings = {v: random_expr(rng) for v in rng.sample(POOL, rng.randint(0, len(POOL)))}
            assignment = {v: random_expr(rng).constant for v in POOL}
            direct = {v: bindings[v].evaluate(assignment) if v in bindings else assignment[v] for v in POOL}
            assert affine_evaluate(affine_substitute(expr, bindings), assignment) == affine_evaluate(expr, direct)

    def test_wide_rationals_stay_exact(self):
        """256-bit numerators and denominators survive arithmetic without rounding"""
        rng = random.Random(4)
        for _ in range(50):
            e = random_expr(rng, bits=256)
            k = Fraction(rng.getrandbits(256) + 1, rng.getrandbits(256) + 1)
            assert (e * k) / k == e
            assert e + e - e == e
            assignment = {v: Fraction(rng.getrandbits(256), rng.getrandbits(256) + 1) for v in POOL}
            expected = e.constant + sum((c * assignment[v] for v, c in e), Fraction(0))
            assert e.evaluate(assignment) == expected
