from fractions import Fraction
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, PlainValidator, model_serializer

from models.report import VerificationReport
from utils.rationals import parse_rational

# Exact rational parsed from a JSON number (kept as decimal text) or a "p/q" string
RationalField = Annotated[Fraction, PlainValidator(parse_rational)]


class PReLUParams(BaseModel):
    alpha: RationalField

    class Config:
        extra = "forbid"
        arbitrary_types_allowed = True


class LinearParams(BaseModel):
    alpha: RationalField
    beta: RationalField = Fraction(0)

    class Config:
        extra = "forbid"
        arbitrary_types_allowed = True


class PReLUSpec(BaseModel):
    prelu: PReLUParams

    class Config:
        extra = "forbid"


class LinearSpec(BaseModel):
    linear: LinearParams

    class Config:
        extra = "forbid"


ActivationSpec = Union[Literal["identity", "relu"], PReLUSpec, LinearSpec]


class LayerSpec(BaseModel):
    weights: List[List[RationalField]] = Field(min_length=1)
    biases: List[RationalField]
    activation: ActivationSpec = "identity"

    class Config:
        extra = "forbid"
        arbitrary_types_allowed = True


class ModelDocument(BaseModel):
    """Model file: {"input_dim": n, "layers": [...]}"""

    input_dim: int = Field(ge=1)
    layers: List[LayerSpec] = Field(min_length=1)

    class Config:
        extra = "forbid"


class AffineDocument(BaseModel):
    terms: Dict[str, str]
    const: str


class ConstraintDocument(BaseModel):
    coeffs: Dict[str, str]
    const: str
    sense: Literal["ge", "gt"]


class BranchDocument(BaseModel):
    id: str
    input_map: List[AffineDocument]
    constraints: List[ConstraintDocument]
    free_vars: List[str]
    slack_vars: List[str]


class PreimageDocument(BaseModel):
    """Result file; projected_target and verification are left out when absent"""

    target: Optional[List[str]]
    omega_bound: int
    enumerated: int
    partial: bool
    branches: List[BranchDocument]
    projected_target: Optional[List[str]] = None
    verification: Optional[VerificationReport] = None

    @model_serializer(mode="wrap")
    def drop_absent(self, handler):
        data = handler(self)
        for key in ("projected_target", "verification"):
            if data.get(key) is None:
                data.pop(key, None)
        return data
