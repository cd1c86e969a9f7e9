"""Exact affine expressions over typed symbolic variables.

Scalars are `fractions.Fraction` throughout. An `AffineExpr` is a sparse map
from `VarId` to a nonzero coefficient plus a constant; every operation returns
a new canonical expression, so two expressions are equal iff they denote the
same affine function.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import total_ordering
from numbers import Rational
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Optional, Tuple, Union

from utils.errors import MissingVariable

Scalar = Union[int, Fraction]


class VarKind(Enum):
    OUTPUT = "y"
    FREE = "t"
    INPUT = "x"
    SLACK = "s"


_KIND_ORDER = {VarKind.OUTPUT: 0, VarKind.INPUT: 1, VarKind.FREE: 2, VarKind.SLACK: 3}


@total_ordering
@dataclass(frozen=True)
class VarId:
    kind: VarKind
    index: int
    generation: int = 0

    def __post_init__(self):
        if self.index < 0 or self.generation < 0:
            raise ValueError(f"negative variable position: {self.index}, {self.generation}")

    @property
    def sort_key(self) -> Tuple[int, int, int]:
        return (_KIND_ORDER[self.kind], self.generation, self.index)

    def __lt__(self, other: "VarId") -> bool:
        if not isinstance(other, VarId):
            return NotImplemented
        return self.sort_key < other.sort_key

    @property
    def name(self) -> str:
        if self.kind is VarKind.OUTPUT:
            return f"y{self.index}"
        return f"{self.kind.value}{self.generation}.{self.index}"

    def __str__(self) -> str:
        return self.name


def output_var(index: int) -> VarId:
    return VarId(VarKind.OUTPUT, index, 0)


def free_var(index: int, generation: int) -> VarId:
    return VarId(VarKind.FREE, index, generation)


def slack_var(index: int, generation: int) -> VarId:
    return VarId(VarKind.SLACK, index, generation)


def input_var(index: int, generation: int) -> VarId:
    return VarId(VarKind.INPUT, index, generation)


def _as_fraction(value: Scalar) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational) and not isinstance(value, bool):
        return Fraction(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


class AffineExpr:
    """Sparse exact linear combination of variables plus a constant."""

    __slots__ = ("_terms", "_constant", "_hash")

    def __init__(self, terms: Optional[Mapping[VarId, Scalar]] = None, constant: Scalar = 0):
        cleaned: Dict[VarId, Fraction] = {}
        for var, coeff in (terms or {}).items():
            coeff = _as_fraction(coeff)
            if coeff != 0:
                cleaned[var] = coeff
        self._terms = cleaned
        self._constant = _as_fraction(constant)
        self._hash: Optional[int] = None

    # Construction helpers

    @classmethod
    def const(cls, value: Scalar) -> "AffineExpr":
        return cls(None, value)

    @classmethod
    def var(cls, var: VarId, coeff: Scalar = 1) -> "AffineExpr":
        return cls({var: coeff})

    @classmethod
    def _trusted(cls, terms: Dict[VarId, Fraction], constant: Fraction) -> "AffineExpr":
        expr = cls.__new__(cls)
        expr._terms = {v: c for v, c in terms.items() if c != 0}
        expr._constant = constant
        expr._hash = None
        return expr

    # Inspection

    @property
    def terms(self) -> Mapping[VarId, Fraction]:
        return dict(self._terms)

    @property
    def constant(self) -> Fraction:
        return self._constant

    @property
    def is_constant(self) -> bool:
        return not self._terms

    def variables(self) -> FrozenSet[VarId]:
        return frozenset(self._terms)

    def coefficient(self, var: VarId) -> Fraction:
        return self._terms.get(var, Fraction(0))

    def __contains__(self, var: VarId) -> bool:
        return var in self._terms

    def __iter__(self) -> Iterator[Tuple[VarId, Fraction]]:
        return iter(sorted(self._terms.items()))

    # Arithmetic

    def _combine(self, other: "AffineExpr", sign: int) -> "AffineExpr":
        terms = dict(self._terms)
        for var, coeff in other._terms.items():
            terms[var] = terms.get(var, Fraction(0)) + sign * coeff
        return AffineExpr._trusted(terms, self._constant + sign * other._constant)

    @staticmethod
    def _coerce(value) -> Optional["AffineExpr"]:
        if isinstance(value, AffineExpr):
            return value
        if isinstance(value, Rational) and not isinstance(value, bool):
            return AffineExpr.const(value)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self._combine(other, -1)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other._combine(self, -1)

    def __neg__(self) -> "AffineExpr":
        return AffineExpr._trusted({v: -c for v, c in self._terms.items()}, -self._constant)

    def scale(self, factor: Scalar) -> "AffineExpr":
        factor = _as_fraction(factor)
        if factor == 0:
            return AffineExpr()
        return AffineExpr._trusted({v: c * factor for v, c in self._terms.items()}, self._constant * factor)

    def __mul__(self, other):
        if isinstance(other, Rational) and not isinstance(other, bool):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Rational) and not isinstance(other, bool):
            if other == 0:
                raise ZeroDivisionError("division of an affine expression by zero")
            return self.scale(Fraction(1) / _as_fraction(other))
        return NotImplemented

    # Substitution and evaluation

    def substitute(self, bindings: Mapping[VarId, "AffineExpr"]) -> "AffineExpr":
        """Replace bound variables simultaneously; unbound ones pass through"""
        terms: Dict[VarId, Fraction] = {}
        constant = self._constant
        for var, coeff in self._terms.items():
            replacement = bindings.get(var)
            if replacement is None:
                terms[var] = terms.get(var, Fraction(0)) + coeff
                continue
            if not isinstance(replacement, AffineExpr):
                replacement = AffineExpr.const(replacement)
            for sub_var, sub_coeff in replacement._terms.items():
                terms[sub_var] = terms.get(sub_var, Fraction(0)) + coeff * sub_coeff
            constant += coeff * replacement._constant
        return AffineExpr._trusted(terms, constant)

    def evaluate(self, assignment: Mapping[VarId, Scalar]) -> Fraction:
        total = self._constant
        for var, coeff in self._terms.items():
            if var not in assignment:
                raise MissingVariable(f"variable {var} is not assigned", {"variable": var.name})
            total += coeff * _as_fraction(assignment[var])
        return total

    # Identity

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is None:
            return False
        return self._constant == other._constant and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((frozenset(self._terms.items()), self._constant))
        return self._hash

    def __repr__(self) -> str:
        return f"AffineExpr({str(self)!r})"

    def __str__(self) -> str:
        parts = []
        for var, coeff in sorted(self._terms.items()):
            if coeff == 1:
                parts.append(f"+ {var}")
            elif coeff == -1:
                parts.append(f"- {var}")
            elif coeff < 0:
                parts.append(f"- {_fmt(-coeff)}*{var}")
            else:
                parts.append(f"+ {_fmt(coeff)}*{var}")
        if self._constant != 0 or not parts:
            if self._constant < 0:
                parts.append(f"- {_fmt(-self._constant)}")
            else:
                parts.append(f"+ {_fmt(self._constant)}")
        text = " ".join(parts)
        if text.startswith("+ "):
            return text[2:]
        return "-" + text[2:]


def _fmt(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"({value.numerator}/{value.denominator})"


def affine_substitute(target: AffineExpr, bindings: Mapping[VarId, AffineExpr]) -> AffineExpr:
    return target.substitute(bindings)


def affine_evaluate(expr: AffineExpr, assignment: Mapping[VarId, Scalar]) -> Fraction:
    return expr.evaluate(assignment)


def linear_combination(coeffs: Iterable[Scalar], exprs: Iterable[AffineExpr], constant: Scalar = 0) -> AffineExpr:
    """sum(c_i * e_i) + constant, accumulated in one pass"""
    terms: Dict[VarId, Fraction] = {}
    total = _as_fraction(constant)
    for coeff, expr in zip(coeffs, exprs):
        coeff = _as_fraction(coeff)
        if coeff == 0:
            continue
        for var, c in expr._terms.items():
            terms[var] = terms.get(var, Fraction(0)) + coeff * c
        total += coeff * expr._constant
    return AffineExpr._trusted(terms, total)


@dataclass(frozen=True)
class AffineMap:
    """Ordered affine outputs; `bindings` holds variables solved away while building it"""

    outputs: Tuple[AffineExpr, ...]
    bindings: Mapping[VarId, AffineExpr] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "bindings", dict(self.bindings))

    @property
    def input_universe(self) -> FrozenSet[VarId]:
        universe: FrozenSet[VarId] = frozenset()
        for expr in self.outputs:
            universe |= expr.variables()
        return universe

    def __len__(self) -> int:
        return len(self.outputs)

    def __getitem__(self, index: int) -> AffineExpr:
        return self.outputs[index]

    def substitute(self, bindings: Mapping[VarId, AffineExpr]) -> "AffineMap":
        return AffineMap(
            tuple(expr.substitute(bindings) for expr in self.outputs),
            {var: expr.substitute(bindings) for var, expr in self.bindings.items()},
        )

    def evaluate(self, assignment: Mapping[VarId, Scalar]) -> Tuple[Fraction, ...]:
        return tuple(expr.evaluate(assignment) for expr in self.outputs)
