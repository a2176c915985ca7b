"""Unbiased ω-quantization operators with an exact bit-cost ledger.

Random dithering rounds s·|x|/‖x‖_p to one of its two neighbouring integer
levels, sparsification keeps a uniform r-subset scaled by d/r, and block
dithering applies (p=2, s=1) dithering independently per block.
"""
import itertools
import math
import struct
from dataclasses import replace
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from qdiana.exceptions import CorruptMessageError, InvalidInputError
from qdiana.models.quantizer import LedgerModel, QuantizedMessage, QuantizerSpec
from qdiana.utils.enums import QuantizerScheme

IDENTITY_SPEC = QuantizerSpec()

SCHEME_TAGS = {
    QuantizerScheme.IDENTITY: 0,
    QuantizerScheme.DITHER: 1,
    QuantizerScheme.SPARSIFY: 2,
    QuantizerScheme.BLOCK_DITHER: 3,
}
TAG_SCHEMES = {tag: scheme for scheme, tag in SCHEME_TAGS.items()}


@lru_cache(maxsize=None)
def dither_spec(p: float, s: int) -> QuantizerSpec:
    try:
        return QuantizerSpec(scheme=QuantizerScheme.DITHER, p=p, s=s)
    except ValidationError as exc:
        raise InvalidInputError(f"invalid dithering parameters p={p}, s={s}: {exc.errors()[0]['msg']}")


@lru_cache(maxsize=None)
def sparsify_spec(r: int) -> QuantizerSpec:
    try:
        return QuantizerSpec(scheme=QuantizerScheme.SPARSIFY, r=r)
    except ValidationError:
        raise InvalidInputError(f"sparsity parameter must be a positive integer, got r={r}")


@lru_cache(maxsize=None)
def block_dither_spec(block_sizes: Tuple[int, ...]) -> QuantizerSpec:
    try:
        return QuantizerSpec(scheme=QuantizerScheme.BLOCK_DITHER, block_sizes=list(block_sizes))
    except ValidationError:
        raise InvalidInputError(f"block sizes must be positive integers, got {list(block_sizes)}")


def _as_vector(x) -> np.ndarray:
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1:
        raise InvalidInputError(f"expected a 1-D vector, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise InvalidInputError("input vector contains non-finite values")
    return vector


def norm_p(x: np.ndarray, p: float) -> float:
    """||x||_p computed on x / max|x| so that large entries do not overflow."""
    if x.size == 0:
        return 0.0
    scale = float(np.max(np.abs(x)))
    if math.isinf(p) or scale == 0.0 or not math.isfinite(scale):
        return scale
    return scale * float(np.linalg.norm(x / scale, ord=p))


def dither_levels(ratio: np.ndarray, xi: np.ndarray) -> np.ndarray:
    # floor(ratio + xi) evaluated as floor(ratio) + [xi < frac(ratio)] so that
    # integer ratios never round up
    lower = np.floor(ratio)
    return (lower + (xi < ratio - lower)).astype(np.int64)


def _with_cost(message: QuantizedMessage, ledger: Optional[LedgerModel]) -> QuantizedMessage:
    return replace(message, bit_cost=bit_cost(message, ledger or LedgerModel()))


def identity(x, ledger: Optional[LedgerModel] = None) -> QuantizedMessage:
    vector = _as_vector(x)
    return _with_cost(QuantizedMessage(IDENTITY_SPEC, vector.size, values=vector.copy()), ledger)


def _dither_message(vector: np.ndarray, spec: QuantizerSpec, rng: np.random.Generator) -> QuantizedMessage:
    dim = vector.size
    norm = norm_p(vector, spec.p)
    if norm == 0.0:
        return QuantizedMessage(spec, dim, norm=0.0)
    if not math.isfinite(norm):
        raise InvalidInputError("vector norm overflows")

    ratio = spec.s * np.abs(vector) / norm
    levels = dither_levels(ratio, rng.random(dim))
    indices = np.flatnonzero(levels)
    return QuantizedMessage(
        spec,
        dim,
        norm=norm,
        indices=indices.astype(np.int64),
        signs=np.where(vector[indices] < 0, -1, 1).astype(np.int8),
        levels=levels[indices],
    )


def dither(x, p: float, s: int, rng: np.random.Generator, ledger: Optional[LedgerModel] = None) -> QuantizedMessage:
    vector = _as_vector(x)
    return _with_cost(_dither_message(vector, dither_spec(float(p), int(s)), rng), ledger)


def sparsify(x, r: int, rng: np.random.Generator, ledger: Optional[LedgerModel] = None) -> QuantizedMessage:
    vector = _as_vector(x)
    dim = vector.size
    if not 1 <= r <= dim:
        raise InvalidInputError(f"sparsify requires 1 <= r <= d, got r={r}, d={dim}")

    # Partial Fisher-Yates shuffle: the first r slots are a uniform r-subset
    permutation = np.arange(dim)
    offsets = rng.integers(0, dim - np.arange(r))
    for position, offset in enumerate(offsets):
        target = position + int(offset)
        permutation[position], permutation[target] = permutation[target], permutation[position]

    selected = np.sort(permutation[:r]).astype(np.int64)
    message = QuantizedMessage(
        sparsify_spec(int(r)),
        dim,
        indices=selected,
        values=(dim / r) * vector[selected],
    )
    return _with_cost(message, ledger)


def block_dither(
        x,
        block_sizes: Sequence[int],
        rng: np.random.Generator,
        ledger: Optional[LedgerModel] = None
) -> QuantizedMessage:
    vector = _as_vector(x)
    sizes = tuple(int(size) for size in block_sizes)
    spec = block_dither_spec(sizes)
    if sum(sizes) != vector.size:
        raise InvalidInputError(f"block sizes sum to {sum(sizes)}, expected {vector.size}")

    block_spec = dither_spec(2.0, 1)
    blocks = []
    start = 0
    for size in sizes:
        blocks.append(_with_cost(_dither_message(vector[start:start + size], block_spec, rng), ledger))
        start += size

    return _with_cost(QuantizedMessage(spec, vector.size, blocks=tuple(blocks)), ledger)


def quantize(
        spec: QuantizerSpec,
        x,
        rng: np.random.Generator,
        ledger: Optional[LedgerModel] = None
) -> QuantizedMessage:
    if spec.scheme == QuantizerScheme.IDENTITY:
        return identity(x, ledger)
    if spec.scheme == QuantizerScheme.DITHER:
        return dither(x, spec.p, spec.s, rng, ledger)
    if spec.scheme == QuantizerScheme.SPARSIFY:
        return sparsify(x, spec.r or 0, rng, ledger)
    vector = _as_vector(x)
    return block_dither(vector, spec.blocks_for(vector.size), rng, ledger)


def _check_index_payload(msg: QuantizedMessage, count: int) -> None:
    if msg.indices.size != count:
        raise CorruptMessageError(f"payload has {msg.indices.size} indices, expected {count}")
    if count and (msg.indices.min() < 0 or msg.indices.max() >= msg.dim):
        raise CorruptMessageError(f"index out of range for dimension {msg.dim}")


def _decode_dither(msg: QuantizedMessage) -> np.ndarray:
    count = msg.levels.size
    if msg.signs.size != count:
        raise CorruptMessageError("dither payload lengths disagree")
    _check_index_payload(msg, count)
    if not math.isfinite(msg.norm) or msg.norm < 0:
        raise CorruptMessageError(f"invalid norm {msg.norm}")
    if count and (msg.levels.min() < 1 or msg.levels.max() > msg.spec.s + 1):
        raise CorruptMessageError(f"level outside [1, {msg.spec.s + 1}]")
    if count and not np.all(np.abs(msg.signs) == 1):
        raise CorruptMessageError("sign entries must be +1 or -1")

    decoded = np.zeros(msg.dim)
    decoded[msg.indices] = msg.signs * (msg.norm * msg.levels / msg.spec.s)
    return decoded


def decode(msg: QuantizedMessage) -> np.ndarray:
    scheme = msg.spec.scheme
    if scheme == QuantizerScheme.IDENTITY:
        if msg.values.size != msg.dim:
            raise CorruptMessageError(f"identity payload has {msg.values.size} values, expected {msg.dim}")
        return np.array(msg.values, dtype=np.float64, copy=True)

    if scheme == QuantizerScheme.DITHER:
        return _decode_dither(msg)

    if scheme == QuantizerScheme.SPARSIFY:
        _check_index_payload(msg, msg.spec.r or 0)
        if msg.values.size != msg.indices.size:
            raise CorruptMessageError("sparsify payload lengths disagree")
        if np.any(np.diff(msg.indices) <= 0):
            raise CorruptMessageError("sparsify indices must be strictly increasing")
        decoded = np.zeros(msg.dim)
        decoded[msg.indices] = msg.values
        return decoded

    sizes = [block.dim for block in msg.blocks]
    if sum(sizes) != msg.dim:
        raise CorruptMessageError(f"blocks cover {sum(sizes)} coordinates, expected {msg.dim}")
    if not msg.blocks:
        return np.zeros(msg.dim)
    return np.concatenate([_decode_dither(block) for block in msg.blocks])


def omega_bound(spec: QuantizerSpec, d: int) -> float:
    spec.validate_for(d)
    if spec.scheme == QuantizerScheme.IDENTITY:
        return 0.0
    if spec.scheme == QuantizerScheme.DITHER:
        # Hölder: ||x||_1 <= sqrt(d)||x||_2 and ||x||_p <= d^max(1/p - 1/2, 0)||x||_2
        inverse_p = 0.0 if math.isinf(spec.p) else 1.0 / spec.p
        return 2.0 + math.sqrt(d) * d ** max(inverse_p - 0.5, 0.0) / spec.s
    if spec.scheme == QuantizerScheme.SPARSIFY:
        return d / (spec.r or d) - 1.0
    return max(math.sqrt(size) for size in spec.blocks_for(d)) + 1.0


def dither_omega(x, p: float, s: int) -> float:
    """Per-vector ω(x) = 2 + ||x||_1 ||x||_p / (s ||x||_2^2) of random dithering."""
    vector = _as_vector(x)
    squared = float(np.dot(vector, vector))
    if squared == 0.0:
        return 0.0
    return 2.0 + norm_p(vector, 1.0) * norm_p(vector, p) / (s * squared)


def bit_cost(msg: QuantizedMessage, model: Optional[LedgerModel] = None) -> int:
    model = model or LedgerModel()
    float_bits = model.float_bits
    scheme = msg.spec.scheme

    if scheme == QuantizerScheme.IDENTITY:
        return msg.dim * float_bits
    if scheme == QuantizerScheme.DITHER:
        per_entry = model.index_width(msg.dim) + 1 + msg.spec.s.bit_length()
        return float_bits + int(msg.levels.size) * per_entry
    if scheme == QuantizerScheme.SPARSIFY:
        return int(msg.indices.size) * (model.index_width(msg.dim) + float_bits)
    return sum(bit_cost(block, model) for block in msg.blocks)


def sample_decoded(spec: QuantizerSpec, x, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draws `size` independent decoded quantizations of x as a (size, d) matrix."""
    vector = _as_vector(x)
    dim = vector.size
    spec.validate_for(dim)

    if spec.scheme == QuantizerScheme.IDENTITY:
        return np.tile(vector, (size, 1))

    if spec.scheme == QuantizerScheme.DITHER:
        return _sample_dither(vector, spec.p, spec.s, rng, size)

    if spec.scheme == QuantizerScheme.SPARSIFY:
        r = spec.r or dim
        # ranks of iid uniforms give a uniform random r-subset per row
        selected = np.argsort(rng.random((size, dim)), axis=1)[:, :r]
        samples = np.zeros((size, dim))
        np.put_along_axis(samples, selected, (dim / r) * vector[selected], axis=1)
        return samples

    parts = []
    start = 0
    for block in spec.blocks_for(dim):
        parts.append(_sample_dither(vector[start:start + block], 2.0, 1, rng, size))
        start += block
    return np.hstack(parts)


def _sample_dither(vector: np.ndarray, p: float, s: int, rng: np.random.Generator, size: int) -> np.ndarray:
    norm = norm_p(vector, p)
    if norm == 0.0:
        return np.zeros((size, vector.size))
    ratio = s * np.abs(vector) / norm
    levels = dither_levels(ratio[np.newaxis, :], rng.random((size, vector.size)))
    signs = np.where(vector < 0, -1.0, 1.0)
    return signs * (norm * levels / s)


def dither_outcomes(x, p: float, s: int) -> List[Tuple[float, np.ndarray]]:
    """Exact distribution of dither(x, p, s) as (probability, decoded) pairs."""
    vector = _as_vector(x)
    norm = norm_p(vector, p)
    if norm == 0.0:
        return [(1.0, np.zeros(vector.size))]

    ratio = s * np.abs(vector) / norm
    lower = np.floor(ratio)
    up_probability = ratio - lower
    signs = np.where(vector < 0, -1.0, 1.0)

    per_coordinate: List[List[Tuple[float, float]]] = []
    for level, up in zip(lower, up_probability):
        choices = [(1.0 - up, level)]
        if up > 0.0:
            choices.append((up, level + 1.0))
        per_coordinate.append(choices)

    outcomes = []
    for combination in itertools.product(*per_coordinate):
        probability = math.prod(choice[0] for choice in combination)
        levels = np.array([choice[1] for choice in combination])
        outcomes.append((probability, signs * (norm * levels / s)))
    return outcomes


def sparsify_outcomes(x, r: int) -> List[Tuple[float, np.ndarray]]:
    vector = _as_vector(x)
    dim = vector.size
    if not 1 <= r <= dim:
        raise InvalidInputError(f"sparsify requires 1 <= r <= d, got r={r}, d={dim}")

    probability = 1.0 / math.comb(dim, r)
    outcomes = []
    for subset in itertools.combinations(range(dim), r):
        decoded = np.zeros(dim)
        chosen = list(subset)
        decoded[chosen] = (dim / r) * vector[chosen]
        outcomes.append((probability, decoded))
    return outcomes


def exact_moments(outcomes: Iterable[Tuple[float, np.ndarray]]) -> Tuple[np.ndarray, float]:
    """Returns (E[Q(x)], E||Q(x)||^2) of an enumerated distribution."""
    mean = None
    second = 0.0
    for probability, decoded in outcomes:
        contribution = probability * decoded
        mean = contribution if mean is None else mean + contribution
        second += probability * float(np.dot(decoded, decoded))
    if mean is None:
        raise InvalidInputError("empty outcome list")
    return mean, second


# Binary layout: little-endian, header = scheme tag (u8) + d (u32) + scheme params.
_HEADER = struct.Struct("<BI")
_DITHER_PARAMS = struct.Struct("<dI")
_DITHER_HEAD = struct.Struct("<dI")
_DITHER_ENTRY = struct.Struct("<IbI")
_COUNT = struct.Struct("<I")
_SPARSE_ENTRY = struct.Struct("<Id")


def _pack_dither_payload(msg: QuantizedMessage) -> bytes:
    parts = [_DITHER_HEAD.pack(msg.norm, int(msg.levels.size))]
    for index, sign, level in zip(msg.indices, msg.signs, msg.levels):
        parts.append(_DITHER_ENTRY.pack(int(index), int(sign), int(level)))
    return b"".join(parts)


def serialize_message(msg: QuantizedMessage) -> bytes:
    scheme = msg.spec.scheme
    parts = [_HEADER.pack(SCHEME_TAGS[scheme], msg.dim)]

    if scheme == QuantizerScheme.IDENTITY:
        parts.append(np.asarray(msg.values, dtype="<f8").tobytes())
    elif scheme == QuantizerScheme.DITHER:
        parts.append(_DITHER_PARAMS.pack(msg.spec.p, msg.spec.s))
        parts.append(_pack_dither_payload(msg))
    elif scheme == QuantizerScheme.SPARSIFY:
        parts.append(_COUNT.pack(msg.spec.r or 0))
        for index, value in zip(msg.indices, msg.values):
            parts.append(_SPARSE_ENTRY.pack(int(index), float(value)))
    else:
        parts.append(_COUNT.pack(len(msg.blocks)))
        for block in msg.blocks:
            parts.append(_COUNT.pack(block.dim))
            parts.append(_pack_dither_payload(block))

    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, layout: struct.Struct) -> tuple:
        end = self.offset + layout.size
        if end > len(self.payload):
            raise CorruptMessageError("message truncated")
        values = layout.unpack_from(self.payload, self.offset)
        self.offset = end
        return values


def _read_dither_payload(reader: _Reader, spec: QuantizerSpec, dim: int) -> QuantizedMessage:
    norm, count = reader.take(_DITHER_HEAD)
    entries = [reader.take(_DITHER_ENTRY) for _ in range(count)]
    return QuantizedMessage(
        spec,
        dim,
        norm=norm,
        indices=np.array([entry[0] for entry in entries], dtype=np.int64),
        signs=np.array([entry[1] for entry in entries], dtype=np.int8),
        levels=np.array([entry[2] for entry in entries], dtype=np.int64),
    )


def deserialize_message(payload: bytes, ledger: Optional[LedgerModel] = None) -> QuantizedMessage:
    reader = _Reader(payload)
    tag, dim = reader.take(_HEADER)
    if tag not in TAG_SCHEMES:
        raise CorruptMessageError(f"unknown scheme tag {tag}")
    scheme = TAG_SCHEMES[tag]

    try:
        if scheme == QuantizerScheme.IDENTITY:
            end = reader.offset + 8 * dim
            if end > len(payload):
                raise CorruptMessageError("message truncated")
            values = np.frombuffer(payload[reader.offset:end], dtype="<f8").astype(np.float64)
            reader.offset = end
            message = QuantizedMessage(IDENTITY_SPEC, dim, values=values)
        elif scheme == QuantizerScheme.DITHER:
            p, s = reader.take(_DITHER_PARAMS)
            message = _read_dither_payload(reader, dither_spec(p, s), dim)
        elif scheme == QuantizerScheme.SPARSIFY:
            (r,) = reader.take(_COUNT)
            entries = [reader.take(_SPARSE_ENTRY) for _ in range(r)]
            message = QuantizedMessage(
                sparsify_spec(r),
                dim,
                indices=np.array([entry[0] for entry in entries], dtype=np.int64),
                values=np.array([entry[1] for entry in entries], dtype=np.float64),
            )
        else:
            (count,) = reader.take(_COUNT)
            blocks = []
            for _ in range(count):
                (size,) = reader.take(_COUNT)
                blocks.append(_with_cost(_read_dither_payload(reader, dither_spec(2.0, 1), size), ledger))
            sizes = tuple(block.dim for block in blocks)
            message = QuantizedMessage(block_dither_spec(sizes), dim, blocks=tuple(blocks))
    except InvalidInputError as exc:
        raise CorruptMessageError(exc.detail)

    if reader.offset != len(payload):
        raise CorruptMessageError(f"{len(payload) - reader.offset} trailing bytes")
    return _with_cost(message, ledger)
