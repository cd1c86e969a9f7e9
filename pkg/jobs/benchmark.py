import random
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from loguru import logger

from models.network import Activation, Layer, Network, forward
from models.preimage import UNLIMITED
from processors.preimage_engine import PreimageEngine
from utils.errors import SchemaError

MAX_PIECEWISE_UNITS = 12


def random_rational(rng: random.Random, magnitude: int = 9) -> Fraction:
    """Numerator in [-magnitude, magnitude], denominator in [1, magnitude]"""
    return Fraction(rng.randint(-magnitude, magnitude), rng.randint(1, magnitude))


def random_network(rng: random.Random, widths: Sequence[int], hidden: Activation,
                   output: Optional[Activation] = None, magnitude: int = 9) -> Network:
    """Every layer but the last uses `hidden`; the last uses `output` (identity by default)"""
    output = output or Activation.identity()
    layers = []
    for index, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        activation = output if index == len(widths) - 2 else hidden
        weights = tuple(tuple(random_rational(rng, magnitude) for _ in range(fan_in)) for _ in range(fan_out))
        biases = tuple(random_rational(rng, magnitude) for _ in range(fan_out))
        layers.append(Layer(weights, biases, activation))
    return Network(tuple(layers), widths[0])


def parse_shape(text: str) -> List[int]:
    """"2-3-1" -> [2, 3, 1]: input width, hidden widths, output width"""
    try:
        widths = [int(part) for part in text.split("-")]
    except ValueError:
        raise SchemaError(f"shape must be dash-separated widths, got {text!r}", {"shape": text})
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise SchemaError(f"shape needs at least two positive widths, got {text!r}", {"shape": text})
    if sum(widths[1:-1]) > MAX_PIECEWISE_UNITS:
        raise SchemaError(
            f"shape {text!r} has more than {MAX_PIECEWISE_UNITS} piecewise units",
            {"shape": text, "limit": MAX_PIECEWISE_UNITS},
        )
    return widths


@dataclass
class BenchRow:
    shape: str
    activation: str
    omega_bound: int
    enumerated: int
    feasible: int
    forks: int
    pruned: int
    peak_constraints: int
    seconds: float

    def to_dict(self):
        return asdict(self)


class BenchmarkJob:
    """Measures branch growth on seeded random networks"""

    def __init__(self, activation: str = "relu", seed: int = 0):
        if activation not in ("relu", "prelu"):
            raise SchemaError(f"bench activation must be relu or prelu, got {activation!r}")
        self.activation_name = activation
        self.hidden = Activation.relu() if activation == "relu" else Activation.prelu(Fraction(1, 10))
        self.seed = seed

    def run_shape(self, shape: str) -> BenchRow:
        widths = parse_shape(shape)
        rng = random.Random(f"{self.seed}:{shape}")
        network = random_network(rng, widths, self.hidden)
        point = [random_rational(rng) for _ in range(widths[0])]
        target = forward(network, point)

        engine = PreimageEngine(network, UNLIMITED)
        started = time.perf_counter()
        preimage = engine.run(target)
        elapsed = time.perf_counter() - started

        logger.info(f"Shape {shape}: {preimage.enumerated_count} enumerated, {len(preimage)} feasible in {elapsed:.3f}s")
        return BenchRow(
            shape=shape,
            activation=self.activation_name,
            omega_bound=preimage.omega_bound,
            enumerated=preimage.enumerated_count,
            feasible=len(preimage),
            forks=engine.stats.forks,
            pruned=engine.stats.pruned,
            peak_constraints=engine.stats.peak_constraints,
            seconds=round(elapsed, 6),
        )

    def run(self, shapes: Sequence[str]) -> List[BenchRow]:
        return [self.run_shape(shape) for shape in shapes]


def format_table(rows: Sequence[BenchRow]) -> str:
    headers = ["shape", "activation", "omega", "enumerated", "feasible", "forks", "pruned", "peak", "seconds"]
    body = [
        [r.shape, r.activation, str(r.omega_bound), str(r.enumerated), str(r.feasible),
         str(r.forks), str(r.pruned), str(r.peak_constraints), f"{r.seconds:.3f}"]
        for r in rows
    ]
    widths = [max(len(h), *(len(line[i]) for line in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(line, widths)) for line in body)
    return "\n".join(lines) + "\n"
