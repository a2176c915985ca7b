import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Union

from pydantic import Field, ValidationError, field_validator, model_validator

from qdiana.exceptions import ConfigError
from qdiana.models.base import StrictModel, config_error_from
from qdiana.models.problem import Regularizer
from qdiana.models.quantizer import LedgerModel, QuantizerSpec
from qdiana.utils.enums import (
    DianaOracle,
    MethodName,
    ProblemKind,
    Regime,
    ShiftInit,
    VrCoefficientForm,
    VrVariant
)

AUTO_PREFIX = "auto:"
WEIGHT_TOLERANCE = 1e-9


class ProblemSection(StrictModel):
    source: Literal["synthetic", "libsvm"] = "synthetic"
    kind: ProblemKind = ProblemKind.LOGISTIC
    path: Optional[str] = None
    d: int = Field(default=20, ge=1)
    n: int = Field(default=4, ge=1)
    m: int = Field(default=50, ge=1)
    lambda2: Optional[float] = Field(default=None, ge=0)
    seed: int = 0
    condition: float = Field(default=10.0, ge=1)
    flip_fraction: float = Field(default=0.1, ge=0, le=1)
    normalize_rows: bool = True
    partition_seed: Optional[int] = None
    regularizer: Regularizer = Regularizer()

    @model_validator(mode="after")
    def check_source(self):
        if self.source == "libsvm":
            if not self.path:
                raise ValueError("libsvm problems require path")
            if self.kind != ProblemKind.LOGISTIC:
                raise ValueError("libsvm data only feeds logistic problems")

        return self


class MethodSection(StrictModel):
    name: MethodName = MethodName.DIANA
    oracle: DianaOracle = DianaOracle.UNIFORM1
    variant: VrVariant = VrVariant.LSVRG
    alpha: Optional[float] = Field(default=None, gt=0)
    gamma: Union[float, str] = AUTO_PREFIX + Regime.STRONGLY_CONVEX.value
    l: Optional[int] = Field(default=None, ge=1)
    p_weights: Optional[List[float]] = None

    @field_validator("gamma", mode="before")  # noqa
    @classmethod
    def parse_gamma(cls, value):
        if isinstance(value, str):
            text = value.strip().lower()
            if text.startswith(AUTO_PREFIX):
                Regime(text[len(AUTO_PREFIX):])
                return text
            return float(text)

        return value

    @field_validator("gamma")  # noqa
    @classmethod
    def check_gamma(cls, value):
        if isinstance(value, float) and not (math.isfinite(value) and value > 0):
            raise ValueError("gamma must be a positive number or auto:<regime>")

        return value

    @field_validator("p_weights")  # noqa
    @classmethod
    def check_weights(cls, value):
        if value is None:
            return value
        if any(weight < 0 for weight in value):
            raise ValueError("epoch weights must be nonnegative")
        if abs(sum(value) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("epoch weights must sum to 1")

        return value

    @model_validator(mode="after")
    def check_epoch(self):
        if self.p_weights is not None and self.l is not None and len(self.p_weights) != self.l:
            raise ValueError(f"p_weights has {len(self.p_weights)} entries, expected l={self.l}")
        if self.p_weights is not None and self.l is None:
            raise ValueError("p_weights requires l")

        return self

    @property
    def auto_regime(self) -> Optional[Regime]:
        if isinstance(self.gamma, str):
            return Regime(self.gamma[len(AUTO_PREFIX):])
        return None


class RunSection(StrictModel):
    iters: int = Field(default=100, ge=1)
    seed: int = 0
    cadence: int = Field(default=1, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)
    init_shifts: ShiftInit = ShiftInit.ZERO
    record_wall_time: bool = False


class OutputSection(StrictModel):
    path: Optional[str] = None
    binary_path: Optional[str] = None


class ReferenceSection(StrictModel):
    tol: Optional[float] = Field(default=None, gt=0)
    max_iters: Optional[int] = Field(default=None, ge=1)


class MetricsSection(StrictModel):
    regime: Optional[Regime] = None
    coefficient_form: VrCoefficientForm = VrCoefficientForm.PROOF


class RunConfig(StrictModel):
    problem: ProblemSection = ProblemSection()
    method: MethodSection = MethodSection()
    quantizer: QuantizerSpec = QuantizerSpec()
    run: RunSection = RunSection()
    ledger: LedgerModel = Field(default_factory=LedgerModel.from_settings)
    output: OutputSection = OutputSection()
    reference: ReferenceSection = ReferenceSection()
    metrics: MetricsSection = MetricsSection()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        return cls.model_validate(read_json(path))


class SweepGrid(StrictModel):
    alpha: Optional[List[float]] = None
    gamma: Optional[List[float]] = None
    block_size: Optional[List[int]] = None
    s: Optional[List[int]] = None


class SweepConfig(StrictModel):
    base: RunConfig = RunConfig()
    grid: SweepGrid = SweepGrid()
    output_dir: str = "sweep"

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SweepConfig":
        return cls.model_validate(read_json(path))


class MethodConfig(StrictModel):
    """Resolved hyperparameters of one method instance."""

    method: MethodName
    oracle: DianaOracle = DianaOracle.UNIFORM1
    variant: VrVariant = VrVariant.LSVRG
    alpha: float = Field(gt=0)
    gamma: float = Field(gt=0)
    l: int = Field(default=1, ge=1)
    p_weights: List[float] = [1.0]
    regime: Optional[Regime] = None

    @model_validator(mode="after")
    def check_weights(self):
        if len(self.p_weights) != self.l:
            raise ValueError(f"p_weights has {len(self.p_weights)} entries, expected l={self.l}")
        if any(weight < 0 for weight in self.p_weights) or abs(sum(self.p_weights) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("epoch weights must be nonnegative and sum to 1")

        return self


def read_json(path: Union[str, Path]) -> dict:
    try:
        with open(path, encoding="utf-8") as stream:
            document = json.load(stream)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}")
    if not isinstance(document, dict):
        raise ConfigError("", f"{path} must hold a JSON object")

    return document


def load_run_config(path: Union[str, Path]) -> RunConfig:
    try:
        return RunConfig.from_file(path)
    except ValidationError as exc:
        raise config_error_from(exc)


def load_sweep_config(path: Union[str, Path]) -> SweepConfig:
    try:
        return SweepConfig.from_file(path)
    except ValidationError as exc:
        raise config_error_from(exc)
