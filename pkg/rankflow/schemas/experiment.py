"""
RANKFLOW Experiment Configuration

One JSON document drives every subcommand:

    {
      "model": {...} | "path/to/model.json",
      "simulate": {"N": 1000, "seed": 7, ...},
      "solve": {"grid_m": 400, "grid_k": 400},
      "tagged": {"tags": [{"y": 0.1, "type": 0}], "seed": 7},
      "study": {"sizes": [500, 5000, 50000], "seeds": 20}
    }

Every section is optional; defaults cover the standard study.
"""

import json
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from rankflow.errors import ConfigError
from rankflow.model.assignment import AssignmentMode
from rankflow.model.spec import ModelFile, ModelSpec, load_model
from rankflow.simulation.observables import Anchor

DEFAULT_TAG_POSITIONS = (0.1, 0.5, 0.9)
DEFAULT_INITIAL_ANCHORS = (0.25, 0.5, 0.75)


class AnchorSpec(BaseModel):
    """Boundary point (y0, t0); one coordinate must be 0."""

    model_config = ConfigDict(extra="forbid")

    y0: float = Field(ge=0.0, le=1.0)
    t0: float = Field(ge=0.0)

    @model_validator(mode="after")
    def check_on_boundary(self):
        if self.y0 != 0.0 and self.t0 != 0.0:
            raise ValueError("anchor must have y0 = 0 or t0 = 0")
        return self

    def to_anchor(self) -> Anchor:
        return Anchor(self.y0, self.t0)


class TagSpec(BaseModel):
    """Tagged particle chosen by initial position and type."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    y: float = Field(ge=0.0, lt=1.0)
    type_index: int = Field(default=0, ge=0, alias="type")


class SimulateSection(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    N: int = Field(default=1000, ge=1, le=10_000_000)
    seed: int = Field(default=0, ge=0)
    horizon: Optional[float] = Field(default=None, gt=0.0)
    assignment: AssignmentMode = AssignmentMode.QUANTILE
    snapshot_times: Optional[list[float]] = None
    snapshot_count: Optional[int] = Field(default=None, ge=2)
    anchors: Optional[list[AnchorSpec]] = None
    tags: list[TagSpec] = Field(default_factory=list)

    @field_validator("snapshot_times")
    @classmethod
    def check_times(cls, value):
        if value is not None and any(t < 0.0 for t in value):
            raise ValueError("snapshot times must be non-negative")
        return None if value is None else sorted(set(value))


class SolveSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid_m: Optional[int] = Field(default=None, ge=4)
    grid_k: Optional[int] = Field(default=None, ge=4)


class TaggedSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    horizon: Optional[float] = Field(default=None, gt=0.0)
    tags: list[TagSpec] = Field(
        default_factory=lambda: [TagSpec(y=y) for y in DEFAULT_TAG_POSITIONS]
    )


class StudySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sizes: list[int] = Field(default_factory=lambda: [500, 5000, 50000], min_length=1)
    seeds: Union[int, list[int]] = Field(default=20)
    assignment: AssignmentMode = AssignmentMode.QUANTILE
    tags: list[TagSpec] = Field(
        default_factory=lambda: [TagSpec(y=y) for y in DEFAULT_TAG_POSITIONS]
    )
    velocity: bool = Field(default=True, description="Also report D_V")

    @field_validator("sizes")
    @classmethod
    def check_sizes(cls, value):
        if any(n < 1 for n in value):
            raise ValueError("sizes must be positive")
        return sorted(set(value))

    @property
    def seed_list(self) -> list[int]:
        if isinstance(self.seeds, int):
            return list(range(self.seeds))
        return list(self.seeds)


class ExperimentConfig(BaseModel):
    """Validated experiment configuration."""

    model_config = ConfigDict(extra="forbid")

    model: Union[ModelFile, str]
    simulate: SimulateSection = Field(default_factory=SimulateSection)
    solve: SolveSection = Field(default_factory=SolveSection)
    tagged: TaggedSection = Field(default_factory=TaggedSection)
    study: StudySection = Field(default_factory=StudySection)
    base_dir: Optional[Path] = Field(default=None, exclude=True)

    def load_model(self) -> ModelSpec:
        """Parse the inline model, or read it relative to the config file."""
        if isinstance(self.model, ModelFile):
            return load_model(self.model)
        path = Path(self.model)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        try:
            return load_model(path)
        except OSError as e:
            raise ConfigError(f"Cannot read model file {path}: {e}", path=str(path)) from e


def default_snapshot_times(horizon: float, count: int) -> list[float]:
    return [float(t) for t in np.linspace(0.0, horizon, count)]


def default_anchors(horizon: float) -> list[Anchor]:
    """Boundary anchors covering both the initial line and the left boundary."""
    anchors = [Anchor(0.0, 0.0), Anchor(0.0, horizon / 4), Anchor(0.0, horizon / 2)]
    anchors += [Anchor(y0, 0.0) for y0 in DEFAULT_INITIAL_ANCHORS]
    return anchors


def load_experiment(path: Union[Path, str]) -> ExperimentConfig:
    """
    Read and validate an experiment JSON file.

    Raises:
        ConfigError: unreadable file, invalid JSON or schema violations
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}", path=str(path)) from e
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}", path=str(path)) from e
    config.base_dir = path.parent
    return config
