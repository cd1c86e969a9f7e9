import json
import random
from fractions import Fraction

import pytest

from models.network import Activation, Network, forward, forward_from
from processors.model_loader import load_model, network_to_document, parse_model
from tests.conftest import make_layer
from utils.errors import DimensionMismatch, InvalidActivation, SchemaError


def document(layers, input_dim):
    return json.dumps({"input_dim": input_dim, "layers": layers})


@pytest.mark.unit
class TestActivation:
    """Activation validation and evaluation"""

    def test_linear_zero_alpha_rejected(self):
        """Linear with alpha 0 is not invertible"""
        with pytest.raises(InvalidActivation):
            Activation.linear(0, 1)

    def test_prelu_alpha_must_be_positive(self):
        """PReLU needs alpha > 0"""
        with pytest.raises(InvalidActivation):
            Activation.prelu(0)
        with pytest.raises(InvalidActivation):
            Activation.prelu(-1)

    def test_boundary_goes_to_non_positive_side(self):
        """At 0 every activation agrees in value"""
        assert Activation.relu().apply(Fraction(0)) == 0
        assert Activation.prelu(Fraction(1, 2)).apply(Fraction(0)) == 0

    def test_linear_apply(self):
        """alpha * x + beta"""
        assert Activation.linear(2, Fraction(1, 3)).apply(Fraction(1)) == Fraction(7, 3)


@pytest.mark.unit
class TestForward:
    """Exact forward evaluation"""

    def test_identity(self):
        """Identity 2 -> 2 passes inputs through"""
        net = Network((make_layer([[1, 0], [0, 1]], [0, 0]),), 2)
        assert forward(net, [3, -1]) == [3, -1]

    def test_relu_clamps_one_unit(self, relu_split_net):
        """[[1], [-1]] at 2 gives (2, 0)"""
        assert forward(relu_split_net, [2]) == [2, 0]

    def test_prelu(self):
        """PReLU(1/10) of -1/2 is -1/20"""
        net = Network((make_layer([[1]], [-1], Activation.prelu(Fraction(1, 10))),), 1)
        assert forward(net, [Fraction(1, 2)]) == [Fraction(-1, 20)]

    def test_prelu_one_matches_identity(self):
        """PReLU(1) behaves as identity on random inputs"""
        rng = random.Random(5)
        weights = [[Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(2)] for _ in range(3)]
        biases = [Fraction(rng.randint(-9, 9), rng.randint(1, 9)) for _ in range(3)]
        prelu = Network((make_layer(weights, biases, Activation.prelu(1)),), 2)
        identity = Network((make_layer(weights, biases),), 2)
        for _ in range(20):
            point = [Fraction(rng.randint(-20, 20), rng.randint(1, 8)) for _ in range(2)]
            assert forward(prelu, point) == forward(identity, point)

    def test_wrong_input_length(self, identity_net):
        """Input length must match input_dim"""
        with pytest.raises(DimensionMismatch):
            forward(identity_net, [1])

    def test_forward_from_suffix(self, budget_net):
        """forward_from evaluates the layers from the given index on"""
        assert forward_from(budget_net, 1, [1, 2, 3]) == [6]
        assert forward_from(budget_net, 0, [1, -2, 3]) == forward(budget_net, [1, -2, 3])
        assert budget_net.forward_from(1, [1, 2, 3]) == [6]

    def test_integer_data_stays_integral(self):
        """Integer weights and inputs never produce fractions"""
        net = Network((make_layer([[2, -3]], [1], Activation.relu()),), 2)
        assert all(v.denominator == 1 for v in forward(net, [4, 1]))


@pytest.mark.unit
class TestNetworkValidation:
    """Layer chaining"""

    def test_chain_mismatch(self):
        """A 3-column layer cannot follow a 2-row layer"""
        with pytest.raises(DimensionMismatch):
            Network((make_layer([[1, 0], [0, 1]], [0, 0]), make_layer([[1, 1, 1]], [0])), 2)

    def test_omega_bound(self, budget_net):
        """Only piecewise layers count"""
        assert budget_net.omega_bound == 8


@pytest.mark.unit
class TestParseModel:
    """Model file ingestion"""

    def test_identity_model(self):
        """Single identity layer gives a 2 -> 2 network"""
        net = parse_model(document([{"weights": [[1, 0], [0, 1]], "biases": [0, 0]}], 2))
        assert net.input_dim == 2
        assert net.output_dim == 2
        assert net.layers[0].activation == Activation.identity()

    def test_decimal_is_exact(self):
        """0.1 in the file becomes exactly 1/10"""
        net = parse_model('{"input_dim": 1, "layers": [{"weights": [[0.1]], "biases": ["1/3"]}]}')
        assert net.layers[0].weights[0][0] == Fraction(1, 10)
        assert net.layers[0].biases[0] == Fraction(1, 3)

    def test_activations(self):
        """All four activation spellings"""
        layers = [
            {"weights": [[1]], "biases": [0], "activation": "relu"},
            {"weights": [[1]], "biases": [0], "activation": {"prelu": {"alpha": "1/10"}}},
            {"weights": [[1]], "biases": [0], "activation": {"linear": {"alpha": "2", "beta": "1/3"}}},
            {"weights": [[1]], "biases": [0], "activation": "identity"},
        ]
        net = parse_model(document(layers, 1))
        assert net.layers[0].activation == Activation.relu()
        assert net.layers[1].activation == Activation.prelu(Fraction(1, 10))
        assert net.layers[2].activation == Activation.linear(2, Fraction(1, 3))
        assert net.layers[3].activation == Activation.identity()

    def test_first_layer_width_checked(self):
        """A 3-column first layer in a 2-input net is rejected with its position"""
        with pytest.raises(DimensionMismatch) as excinfo:
            parse_model(document([{"weights": [[1, 1, 1], [1, 1, 1]], "biases": [0, 0]}], 2))
        assert excinfo.value.context["layer"] == 0

    def test_chain_checked(self):
        """Layer 1 must take layer 0's outputs"""
        layers = [
            {"weights": [[1, 0], [0, 1]], "biases": [0, 0]},
            {"weights": [[1, 1, 1]], "biases": [0]},
        ]
        with pytest.raises(DimensionMismatch) as excinfo:
            parse_model(document(layers, 2))
        assert excinfo.value.context["layer"] == 1

    def test_bias_count(self):
        """One bias per row"""
        with pytest.raises(DimensionMismatch):
            parse_model(document([{"weights": [[1], [1]], "biases": [0]}], 1))

    def test_ragged_rows(self):
        """Rows must have equal length"""
        with pytest.raises(DimensionMismatch):
            parse_model(document([{"weights": [[1, 0], [1]], "biases": [0, 0]}], 2))

    def test_invalid_prelu(self):
        """PReLU alpha 0 is rejected with the layer position"""
        with pytest.raises(InvalidActivation) as excinfo:
            parse_model(document([{"weights": [[1]], "biases": [0], "activation": {"prelu": {"alpha": 0}}}], 1))
        assert excinfo.value.context["layer"] == 0

    def test_malformed_json(self):
        """Broken JSON is a schema error"""
        with pytest.raises(SchemaError):
            parse_model("{not json")

    def test_missing_layers(self):
        """layers is required"""
        with pytest.raises(SchemaError):
            parse_model('{"input_dim": 1}')

    def test_bad_number(self):
        """Non-numeric weights are a schema error naming their location"""
        with pytest.raises(SchemaError) as excinfo:
            parse_model(document([{"weights": [["abc"]], "biases": [0]}], 1))
        assert "weights" in excinfo.value.context["location"]

    def test_unknown_activation(self):
        """Unknown activation names are rejected"""
        with pytest.raises(SchemaError):
            parse_model(document([{"weights": [[1]], "biases": [0], "activation": "tanh"}], 1))

    def test_document_round_trip(self, budget_net):
        """network_to_document output parses back to the same network"""
        assert parse_model(json.dumps(network_to_document(budget_net))) == budget_net

    def test_load_missing_file(self, tmp_path):
        """A missing file is a schema error carrying the path"""
        with pytest.raises(SchemaError) as excinfo:
            load_model(tmp_path / "absent.json")
        assert excinfo.value.context["path"].endswith("absent.json")
