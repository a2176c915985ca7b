import math
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import field_serializer, field_validator, model_validator

from qdiana.exceptions import InvalidInputError
from qdiana.models.base import StrictModel
from qdiana.utils.enums import QuantizerScheme


class QuantizerSpec(StrictModel):
    scheme: QuantizerScheme = QuantizerScheme.IDENTITY
    p: float = 2.0
    s: int = 1
    r: Optional[int] = None
    block_size: Optional[int] = None
    block_sizes: Optional[List[int]] = None

    @field_validator("p", mode="before")  # noqa
    @classmethod
    def parse_norm_exponent(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "max"):
            return math.inf

        return value

    @field_validator("p")  # noqa
    @classmethod
    def check_norm_exponent(cls, value):
        if math.isnan(value) or value < 1:
            raise ValueError("norm exponent p must be >= 1 or inf")

        return value

    @field_validator("s")  # noqa
    @classmethod
    def check_levels(cls, value):
        if value < 1:
            raise ValueError("levels s must be a positive integer")

        return value

    @field_validator("r", "block_size")  # noqa
    @classmethod
    def check_positive(cls, value):
        if value is not None and value < 1:
            raise ValueError("must be a positive integer")

        return value

    @field_validator("block_sizes")  # noqa
    @classmethod
    def check_block_sizes(cls, value):
        if value is not None and (not value or any(size < 1 for size in value)):
            raise ValueError("block sizes must be a non-empty list of positive integers")

        return value

    @model_validator(mode="after")
    def check_scheme_parameters(self):
        if self.scheme == QuantizerScheme.SPARSIFY and self.r is None:
            raise ValueError("sparsify requires r")
        if self.scheme == QuantizerScheme.BLOCK_DITHER and self.block_size is None and self.block_sizes is None:
            raise ValueError("block_dither requires block_size or block_sizes")

        return self

    @field_serializer("p")
    def serialize_norm_exponent(self, value: float):
        return "inf" if math.isinf(value) else value

    def blocks_for(self, dim: int) -> List[int]:
        if self.block_sizes is not None:
            return list(self.block_sizes)
        size = self.block_size or dim
        full, rest = divmod(dim, size)
        return [size] * full + ([rest] if rest else [])

    def validate_for(self, dim: int) -> "QuantizerSpec":
        if dim < 1:
            raise InvalidInputError(f"dimension must be positive, got {dim}")
        if self.scheme == QuantizerScheme.SPARSIFY and not 1 <= (self.r or 0) <= dim:
            raise InvalidInputError(f"sparsify requires 1 <= r <= d, got r={self.r}, d={dim}")
        if self.scheme == QuantizerScheme.BLOCK_DITHER and sum(self.blocks_for(dim)) != dim:
            raise InvalidInputError(f"block sizes sum to {sum(self.blocks_for(dim))}, expected {dim}")

        return self


class LedgerModel(StrictModel):
    float_bits: Literal[32, 64] = 64
    index_bits: Optional[int] = None

    @field_validator("index_bits")  # noqa
    @classmethod
    def check_index_bits(cls, value):
        if value is not None and value < 0:
            raise ValueError("index_bits must be nonnegative")

        return value

    def index_width(self, dim: int) -> int:
        if self.index_bits is not None:
            return self.index_bits
        # ceil(log2(dim)) without floating point
        return (dim - 1).bit_length()

    @classmethod
    def from_settings(cls) -> "LedgerModel":
        from config import settings  # noqa

        return cls(float_bits=settings.ledger.float_bits, index_bits=settings.ledger.index_bits)


def _empty(dtype) -> np.ndarray:
    return np.zeros(0, dtype=dtype)


@dataclass(frozen=True)
class QuantizedMessage:
    spec: QuantizerSpec
    dim: int
    norm: float = 0.0
    indices: np.ndarray = field(default_factory=lambda: _empty(np.int64))
    signs: np.ndarray = field(default_factory=lambda: _empty(np.int8))
    levels: np.ndarray = field(default_factory=lambda: _empty(np.int64))
    values: np.ndarray = field(default_factory=lambda: _empty(np.float64))
    blocks: Tuple["QuantizedMessage", ...] = ()
    bit_cost: int = 0

    @property
    def scheme(self) -> QuantizerScheme:
        return self.spec.scheme

    @property
    def nnz(self) -> int:
        if self.blocks:
            return sum(block.nnz for block in self.blocks)
        if self.spec.scheme == QuantizerScheme.IDENTITY:
            return int(np.count_nonzero(self.values))
        return int(self.indices.size)
