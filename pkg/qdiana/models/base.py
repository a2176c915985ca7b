import enum
import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from qdiana.exceptions import ConfigError


class StrictModel(BaseModel):
    """Schema base for everything read from JSON: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    def to_json(self, exclude: Optional[List[str]] = None) -> Dict[str, Any]:
        if exclude is None:
            exclude = []

        columns = {}
        for key, value in self.model_dump(mode="python").items():
            if key in exclude:
                continue
            columns[key] = _jsonable(value)

        return columns


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    return value


def key_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def config_error_from(exc: ValidationError) -> ConfigError:
    first = exc.errors()[0]
    return ConfigError(key_path(first), first.get("msg", "invalid value"))
