from pydantic import field_validator

from qdiana.models.base import StrictModel
from qdiana.utils.enums import RegularizerKind


class Regularizer(StrictModel):
    kind: RegularizerKind = RegularizerKind.NONE
    strength: float = 0.0

    @field_validator("strength")  # noqa
    @classmethod
    def check_strength(cls, value):
        if value < 0:
            raise ValueError("regularizer strength must be nonnegative")

        return value
