import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from widthlab.config import settings
from widthlab.exceptions import ConfigError
from widthlab.services.node_classes import NodeFamily, UnknownMotherError
from widthlab.services.sobolev import SobolevBallSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FamilyConfig(_Strict):
    kind: Literal["linear_threshold", "smooth_mother", "fourier_atom"]
    d: int = Field(1, ge=1)
    k: int = Field(1, ge=1)
    lipschitz_constant: float = Field(1.0, gt=0)
    mother_id: str = "logistic"
    max_frequency: int = Field(0, ge=0)
    parameter_box: list[tuple[float, float]] = []

    def to_family(self) -> NodeFamily:
        return NodeFamily(
            self.kind, d=self.d, k=self.k, lipschitz_constant=self.lipschitz_constant,
            mother_id=self.mother_id, max_frequency=self.max_frequency,
            parameter_box=tuple(self.parameter_box),
        )


class SobolevConfig(_Strict):
    r: int = Field(1, ge=1)
    C: float = settings.sobolev_mean_bound
    random_targets: int = Field(4, ge=0)

    def to_spec(self) -> SobolevBallSpec:
        return SobolevBallSpec(self.r, self.C)


class DictionaryConfig(_Strict):
    mode: Literal["grid", "random"] = "random"
    count: Optional[int] = Field(200, ge=1)
    resolution: Optional[int] = Field(None, ge=1)
    scale: float = Field(1.0, gt=0)


class NormConfig(_Strict):
    p: float = Field(2.0, ge=1)
    domain_size: Optional[int] = Field(None, ge=1)
    domain_seed: Optional[int] = None


class SweepConfig(_Strict):
    n_values: list[int] = []
    epsilons: list[float] = []

    @field_validator("n_values", "epsilons")
    @classmethod
    def strictly_increasing(cls, values):
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if any(v <= 0 for v in values):
            raise ValueError("sweep values must be positive")
        return values

    @model_validator(mode="after")
    def nonempty(self):
        if not self.n_values and not self.epsilons:
            raise ValueError("sweep needs n_values or epsilons")
        return self


class SolverConfig(_Strict):
    tol: float = Field(settings.solver_tol, gt=0)
    max_iter: int = Field(settings.solver_max_iter, ge=1)
    trials: int = Field(16, ge=1)
    members_per_target: int = Field(32, ge=1)


class BoundsConfig(_Strict):
    k_const: float = Field(settings.haussler_constant, gt=0)


class OutputConfig(_Strict):
    directory: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None
    svg: bool = False


class VerifyConfig(_Strict):
    instances: int = Field(1000, ge=1)
    max_dimension: int = Field(8, ge=1)
    max_atoms: int = Field(16, ge=1)


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int = Field(..., ge=0)
    family: Optional[FamilyConfig] = None
    sobolev: Optional[SobolevConfig] = None
    dictionary: DictionaryConfig = DictionaryConfig()
    norm: NormConfig = NormConfig()
    sweep: SweepConfig
    solver: SolverConfig = SolverConfig()
    bounds: BoundsConfig = BoundsConfig()
    output: OutputConfig = OutputConfig()
    verify: VerifyConfig = VerifyConfig()

    @model_validator(mode="after")
    def dictionary_mode(self):
        if self.dictionary.mode == "grid" and self.dictionary.resolution is None:
            raise ValueError("grid dictionaries need a resolution")
        if self.dictionary.mode == "random" and self.dictionary.count is None:
            raise ValueError("random dictionaries need a count")
        return self

    def require_family(self) -> NodeFamily:
        if self.family is None:
            raise ConfigError(f"Config {self.name!r} has no family section")
        try:
            return self.family.to_family()
        except (ValueError, UnknownMotherError) as e:
            raise ConfigError(str(e))

    def require_sobolev(self) -> SobolevBallSpec:
        if self.sobolev is None:
            raise ConfigError(f"Config {self.name!r} has no sobolev section")
        try:
            return self.sobolev.to_spec()
        except ValueError as e:
            raise ConfigError(str(e))


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}")
