import json
import random
from fractions import Fraction

import pytest

from jobs.benchmark import random_network
from models.algebra import input_var, output_var
from models.network import Activation, Layer, Network
from processors.model_loader import network_to_document


def make_layer(weights, biases, activation=None):
    return Layer(
        tuple(tuple(Fraction(w) for w in row) for row in weights),
        tuple(Fraction(b) for b in biases),
        activation or Activation.identity(),
    )


@pytest.fixture
def identity_net():
    """2 -> 2 identity weights, biases (1, 2)"""
    return Network((make_layer([[1, 0], [0, 1]], [1, 2]),), 2)


@pytest.fixture
def wide_net():
    """2 -> 1 summing layer"""
    return Network((make_layer([[1, 1]], [0]),), 2)


@pytest.fixture
def relu_split_net():
    """1 -> 2 ReLU layer with weights [[1], [-1]]"""
    return Network((make_layer([[1], [-1]], [0, 0], Activation.relu()),), 1)


@pytest.fixture
def relu_scalar_net():
    """1 -> 1 ReLU, weight 1, bias 0"""
    return Network((make_layer([[1]], [0], Activation.relu()),), 1)


@pytest.fixture
def prelu_half_net():
    """1 -> 1 PReLU(1/2), weight 1, bias 0"""
    return Network((make_layer([[1]], [0], Activation.prelu(Fraction(1, 2))),), 1)


@pytest.fixture
def budget_net():
    """3 -> 3 identity ReLU layer feeding a [1, 1, 1] summing output (8 sign patterns)"""
    hidden = make_layer([[1, 0, 0], [0, 1, 0], [0, 0, 1]], [0, 0, 0], Activation.relu())
    output = make_layer([[1, 1, 1]], [0])
    return Network((hidden, output), 3)


@pytest.fixture
def tall_linear_net():
    """1 -> 2 duplicating layer: only targets with equal components are reachable"""
    return Network((make_layer([[1], [1]], [0, 0]),), 1)


@pytest.fixture
def y0():
    return output_var(0)


@pytest.fixture
def x_vars():
    return [input_var(i, 0) for i in range(3)]


@pytest.fixture
def write_model(tmp_path):
    """Write a Network (or a raw document) to a model file and return its path"""

    def _write(network_or_document, name="model.json"):
        document = network_or_document
        if isinstance(network_or_document, Network):
            document = network_to_document(network_or_document)
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def seeded_network():
    """Factory for seeded random networks with piecewise hidden layers"""

    def _make(seed, widths, hidden=None):
        rng = random.Random(seed)
        return random_network(rng, widths, hidden or Activation.relu()), rng

    return _make
