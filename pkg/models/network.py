from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from models.algebra import Scalar
from utils.errors import DimensionMismatch, InvalidActivation


class ActivationKind(str, Enum):
    IDENTITY = "identity"
    LINEAR = "linear"
    PRELU = "prelu"
    RELU = "relu"


@dataclass(frozen=True)
class Activation:
    """Identity, Linear(alpha, beta), PReLU(alpha) or ReLU.

    Units switch branch on a strict test: x > 0 is the positive side, x = 0
    belongs to the non-positive side.
    """

    kind: ActivationKind = ActivationKind.IDENTITY
    alpha: Fraction = Fraction(1)
    beta: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "beta", Fraction(self.beta))
        if self.kind is ActivationKind.LINEAR and self.alpha == 0:
            raise InvalidActivation("linear activation needs alpha != 0", {"alpha": str(self.alpha)})
        if self.kind is ActivationKind.PRELU and self.alpha <= 0:
            raise InvalidActivation(
                "prelu needs alpha > 0 (declare alpha = 0 as relu)", {"alpha": str(self.alpha)}
            )

    @classmethod
    def identity(cls) -> "Activation":
        return cls(ActivationKind.IDENTITY)

    @classmethod
    def linear(cls, alpha: Scalar, beta: Scalar = 0) -> "Activation":
        return cls(ActivationKind.LINEAR, Fraction(alpha), Fraction(beta))

    @classmethod
    def prelu(cls, alpha: Scalar) -> "Activation":
        return cls(ActivationKind.PRELU, Fraction(alpha))

    @classmethod
    def relu(cls) -> "Activation":
        return cls(ActivationKind.RELU, Fraction(0))

    @property
    def is_piecewise(self) -> bool:
        return self.kind in (ActivationKind.PRELU, ActivationKind.RELU)

    def apply(self, value: Fraction) -> Fraction:
        if self.kind is ActivationKind.IDENTITY:
            return value
        if self.kind is ActivationKind.LINEAR:
            return self.alpha * value + self.beta
        if value > 0:
            return value
        if self.kind is ActivationKind.PRELU:
            return self.alpha * value
        return Fraction(0)

    def describe(self) -> str:
        if self.kind is ActivationKind.LINEAR:
            return f"linear(alpha={self.alpha}, beta={self.beta})"
        if self.kind is ActivationKind.PRELU:
            return f"prelu(alpha={self.alpha})"
        return self.kind.value


@dataclass(frozen=True)
class Layer:
    weights: Tuple[Tuple[Fraction, ...], ...]
    biases: Tuple[Fraction, ...]
    activation: Activation = Activation()

    def __post_init__(self):
        weights = tuple(tuple(Fraction(v) for v in row) for row in self.weights)
        biases = tuple(Fraction(v) for v in self.biases)
        if not weights or not weights[0]:
            raise DimensionMismatch("layer needs at least one row and one column")
        widths = {len(row) for row in weights}
        if len(widths) > 1:
            raise DimensionMismatch("weight rows have different lengths", {"widths": sorted(widths)})
        if len(biases) != len(weights):
            raise DimensionMismatch(
                f"{len(biases)} biases for {len(weights)} weight rows",
                {"rows": len(weights), "biases": len(biases)},
            )
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def outputs(self) -> int:
        return len(self.weights)

    @property
    def inputs(self) -> int:
        return len(self.weights[0])

    def folded(self) -> Tuple[Tuple[Tuple[Fraction, ...], ...], Tuple[Fraction, ...]]:
        """Weights and biases with a Linear activation absorbed: (alpha*W, alpha*b + beta)"""
        if self.activation.kind is not ActivationKind.LINEAR:
            return self.weights, self.biases
        alpha, beta = self.activation.alpha, self.activation.beta
        weights = tuple(tuple(alpha * w for w in row) for row in self.weights)
        biases = tuple(alpha * b + beta for b in self.biases)
        return weights, biases

    def pre_activation(self, values: Sequence[Fraction]) -> List[Fraction]:
        return [sum((w * v for w, v in zip(row, values)), Fraction(0)) + b for row, b in zip(self.weights, self.biases)]

    def forward(self, values: Sequence[Fraction]) -> List[Fraction]:
        return [self.activation.apply(z) for z in self.pre_activation(values)]


@dataclass(frozen=True)
class Network:
    layers: Tuple[Layer, ...]
    input_dim: int

    def __post_init__(self):
        layers = tuple(self.layers)
        if self.input_dim < 1:
            raise DimensionMismatch(f"input_dim must be positive, got {self.input_dim}")
        if not layers:
            raise DimensionMismatch("network has no layers")
        width = self.input_dim
        for index, layer in enumerate(layers):
            if layer.inputs != width:
                raise DimensionMismatch(
                    f"layer {index} expects {layer.inputs} inputs but receives {width}",
                    {"layer": index, "expected": layer.inputs, "received": width},
                )
            width = layer.outputs
        object.__setattr__(self, "layers", layers)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].outputs

    @property
    def piecewise_widths(self) -> List[int]:
        return [layer.outputs for layer in self.layers if layer.activation.is_piecewise]

    @property
    def omega_bound(self) -> int:
        return 2 ** sum(self.piecewise_widths)

    def widths(self) -> List[int]:
        return [self.input_dim] + [layer.outputs for layer in self.layers]

    def forward_from(self, start: int, values: Sequence[Scalar]) -> List[Fraction]:
        return forward_from(self, start, values)


def forward_from(net: Network, start: int, values: Sequence[Scalar]) -> List[Fraction]:
    """Evaluate layers[start:] on `values`, which feed layer `start`"""
    if not 0 <= start <= len(net.layers):
        raise DimensionMismatch(f"no layer {start} in a {len(net.layers)}-layer network", {"layer": start})
    expected = net.layers[start].inputs if start < len(net.layers) else net.output_dim
    if len(values) != expected:
        raise DimensionMismatch(
            f"layer {start} expects {expected} values, got {len(values)}",
            {"layer": start, "expected": expected, "received": len(values)},
        )
    current = [Fraction(v) for v in values]
    for layer in net.layers[start:]:
        current = layer.forward(current)
    return current


def forward(net: Network, inputs: Sequence[Scalar], layer_limit: Optional[int] = None) -> List[Fraction]:
    """Exact evaluation; `layer_limit` stops after that many layers"""
    if len(inputs) != net.input_dim:
        raise DimensionMismatch(
            f"network takes {net.input_dim} inputs, got {len(inputs)}",
            {"expected": net.input_dim, "received": len(inputs)},
        )
    current = [Fraction(v) for v in inputs]
    for layer in net.layers[:layer_limit]:
        current = layer.forward(current)
    return current
