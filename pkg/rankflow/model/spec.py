"""
RANKFLOW Model Files

Finite-type model instances: per-type rate w_a(y,t), weight r_a and initial
profile rho_a(y), plus the horizon T. The on-disk model file is a JSON document
{types: [{rate, profile, weight}], horizon}; see docs/MODEL_FILE.md.
"""

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from rankflow.ratelang import RateExpr, parse_expr


class TypeEntry(BaseModel):
    """One type as written in a model file."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    rate: str = Field(min_length=1, description="w_a(y, t)")
    profile: str = Field(min_length=1, description="rho_a(y)")
    weight: float = Field(description="r_a")


class ModelFile(BaseModel):
    """Model file schema."""

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    types: list[TypeEntry] = Field(min_length=1)
    horizon: float = Field(gt=0.0)


@dataclass
class ModelSpec:
    """A parsed model. `rate_bound` is filled in by rankflow.model.bounds.rate_bound."""

    rates: list[RateExpr]
    weights: list[float]
    profiles: list[RateExpr]
    horizon: float
    rate_bound: Optional[float] = None

    def __post_init__(self):
        if not (len(self.rates) == len(self.weights) == len(self.profiles)):
            raise ValueError(
                f"Type lists differ in length: {len(self.rates)} rates, "
                f"{len(self.weights)} weights, {len(self.profiles)} profiles"
            )

    @property
    def A(self) -> int:
        return len(self.rates)

    @cached_property
    def rate_slopes(self) -> list[RateExpr]:
        """dw_a/dy for every type."""
        return [w.diff_y() for w in self.rates]

    def require_rate_bound(self) -> float:
        if self.rate_bound is None:
            from rankflow.model.bounds import rate_bound

            rate_bound(self)
        return self.rate_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "types": [
                {"rate": w.text, "profile": rho.text, "weight": r}
                for w, rho, r in zip(self.rates, self.profiles, self.weights)
            ],
            "horizon": self.horizon,
        }

    @classmethod
    def from_file_model(cls, data: ModelFile) -> "ModelSpec":
        return cls(
            rates=[parse_expr(entry.rate) for entry in data.types],
            weights=[entry.weight for entry in data.types],
            profiles=[parse_expr(entry.profile) for entry in data.types],
            horizon=data.horizon,
        )


def load_model(source: Union[Path, str, dict, ModelFile]) -> ModelSpec:
    """
    Load a model from a path, a JSON string, a mapping or a parsed ModelFile.

    Raises:
        pydantic.ValidationError: the document does not match the schema
        ExprSyntaxError / UnknownIdentifierError: an expression does not parse
    """
    if isinstance(source, ModelFile):
        data = source
    elif isinstance(source, dict):
        data = ModelFile.model_validate(source)
    elif isinstance(source, Path):
        data = ModelFile.model_validate_json(source.read_text())
    else:
        data = ModelFile.model_validate_json(source)
    return ModelSpec.from_file_model(data)


def model_hash(model: ModelSpec) -> str:
    """sha256 of the canonical model JSON (normalized expression text)."""
    canonical = {
        "types": [
            {"rate": w.serialize(), "profile": rho.serialize(), "weight": repr(float(r))}
            for w, rho, r in zip(model.rates, model.profiles, model.weights)
        ],
        "horizon": repr(float(model.horizon)),
    }
    payload = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
