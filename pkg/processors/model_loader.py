import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Union

from loguru import logger
from pydantic import ValidationError

from models.network import Activation, Layer, Network
from models.schemas import LayerSpec, LinearSpec, ModelDocument, PReLUSpec
from utils.errors import DimensionMismatch, InvalidActivation, SchemaError
from utils.rationals import format_rational, parse_rational


def _activation_from_spec(spec, layer_index: int) -> Activation:
    try:
        if spec == "identity":
            return Activation.identity()
        if spec == "relu":
            return Activation.relu()
        if isinstance(spec, PReLUSpec):
            return Activation.prelu(spec.prelu.alpha)
        if isinstance(spec, LinearSpec):
            return Activation.linear(spec.linear.alpha, spec.linear.beta)
    except InvalidActivation as e:
        raise e.with_context(layer=layer_index)
    raise InvalidActivation(f"unknown activation {spec!r}", {"layer": layer_index})


def _layer_from_spec(spec: LayerSpec, layer_index: int) -> Layer:
    widths = {len(row) for row in spec.weights}
    if 0 in widths:
        raise SchemaError("weight rows must not be empty", {"layer": layer_index})
    if len(widths) > 1:
        for row_index, row in enumerate(spec.weights):
            if len(row) != len(spec.weights[0]):
                raise DimensionMismatch(
                    f"weight row {row_index} has {len(row)} entries, row 0 has {len(spec.weights[0])}",
                    {"layer": layer_index, "row": row_index},
                )
    if len(spec.biases) != len(spec.weights):
        raise DimensionMismatch(
            f"{len(spec.biases)} biases for {len(spec.weights)} weight rows",
            {"layer": layer_index, "rows": len(spec.weights), "biases": len(spec.biases)},
        )
    activation = _activation_from_spec(spec.activation, layer_index)
    return Layer(tuple(tuple(row) for row in spec.weights), tuple(spec.biases), activation)


def network_from_document(document: ModelDocument) -> Network:
    width = document.input_dim
    layers = []
    for index, spec in enumerate(document.layers):
        layer = _layer_from_spec(spec, index)
        if layer.inputs != width:
            raise DimensionMismatch(
                f"layer {index} has {layer.inputs} columns but follows a width-{width} layer",
                {"layer": index, "expected": width, "received": layer.inputs},
            )
        layers.append(layer)
        width = layer.outputs
    return Network(tuple(layers), document.input_dim)


def parse_model(document: Union[str, bytes]) -> Network:
    """Parse a JSON model file into an exact Network.

    JSON numbers are read from their decimal text, so 0.1 becomes 1/10.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SchemaError(f"model file is not UTF-8: {e}")
    try:
        raw = json.loads(document, parse_float=parse_rational)
    except json.JSONDecodeError as e:
        raise SchemaError(f"model file is not valid JSON: {e.msg}", {"line": e.lineno, "column": e.colno})

    try:
        parsed = ModelDocument.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise SchemaError(f"{location}: {first['msg']}", {"location": location, "errors": e.error_count()})

    network = network_from_document(parsed)
    logger.debug(f"Parsed network with widths {network.widths()}")
    return network


def load_model(path: Union[str, Path]) -> Network:
    path = Path(path)
    logger.info(f"Loading model from {path}")
    try:
        data = path.read_bytes()
    except OSError as e:
        raise SchemaError(f"cannot read model file: {e.strerror}", {"path": str(path)})
    try:
        return parse_model(data)
    except SchemaError as e:
        raise e.with_context(path=str(path))


def _activation_document(activation: Activation) -> Any:
    if activation.kind.value in ("identity", "relu"):
        return activation.kind.value
    if activation.kind.value == "prelu":
        return {"prelu": {"alpha": format_rational(activation.alpha)}}
    return {"linear": {"alpha": format_rational(activation.alpha), "beta": format_rational(activation.beta)}}


def network_to_document(network: Network) -> Dict[str, Any]:
    """Inverse of parse_model, with every number written as a "p/q" string"""
    return {
        "input_dim": network.input_dim,
        "layers": [
            {
                "weights": [[format_rational(Fraction(w)) for w in row] for row in layer.weights],
                "biases": [format_rational(b) for b in layer.biases],
                "activation": _activation_document(layer.activation),
            }
            for layer in network.layers
        ],
    }
