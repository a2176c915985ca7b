"""LIBSVM ingestion, deterministic partitioning and seeded synthetic problems."""
import gzip
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from qdiana.exceptions import EmptyDatasetError, InsufficientDataError, InvalidInputError, ParseError
from qdiana.models.problem import Regularizer
from qdiana.services.problems import FiniteSumProblem, logistic_problem, quadratic_problem
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import ProblemKind, StreamPurpose

logger = logging.getLogger("DataIO")

GZIP_MAGIC = b"\x1f\x8b"
LABEL_MAP = {0.0: -1.0, 1.0: 1.0, -1.0: -1.0}
FLIP_FRACTION = 0.1


@dataclass(frozen=True)
class Dataset:
    labels: np.ndarray
    features: sparse.csr_matrix

    @property
    def size(self) -> int:
        return int(self.labels.size)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def rows(self) -> List[Tuple[float, List[Tuple[int, float]]]]:
        result = []
        for row in range(self.size):
            start, stop = self.features.indptr[row], self.features.indptr[row + 1]
            pairs = [
                (int(index), float(value))
                for index, value in zip(self.features.indices[start:stop], self.features.data[start:stop])
            ]
            result.append((float(self.labels[row]), pairs))
        return result

    def same_as(self, other: "Dataset") -> bool:
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.features.indptr, other.features.indptr)
            and np.array_equal(self.features.indices, other.features.indices)
            and np.array_equal(self.features.data, other.features.data)
        )


def _parse_label(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(line, f"non-numeric label {token!r}")
    if value not in LABEL_MAP:
        raise ParseError(line, f"label {token!r} is not binary (expected 0/1 or -1/+1)")
    return LABEL_MAP[value]


def parse_libsvm(text: Union[bytes, str, BinaryIO]) -> Dataset:
    """Parses `<label> <idx>:<val> ...` lines with 1-based, strictly increasing indices."""
    data = text.read() if hasattr(text, "read") else text
    if isinstance(data, str):
        data = data.encode("utf-8")
    if data[:2] == GZIP_MAGIC:
        try:
            data = gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise ParseError(None, f"corrupt gzip stream: {exc}")

    labels: List[float] = []
    indptr = [0]
    indices: List[int] = []
    values: List[float] = []

    for line_number, raw in enumerate(data.splitlines(), start=1):
        try:
            tokens = raw.decode("utf-8").split()
        except UnicodeDecodeError as exc:
            raise ParseError(line_number, f"not valid UTF-8 at byte {exc.start}")
        if not tokens:
            continue
        labels.append(_parse_label(tokens[0], line_number))

        previous = 0
        for token in tokens[1:]:
            index_text, separator, value_text = token.partition(":")
            if not separator:
                raise ParseError(line_number, f"malformed token {token!r}")
            try:
                index = int(index_text)
            except ValueError:
                raise ParseError(line_number, f"malformed feature index {index_text!r}")
            try:
                value = float(value_text)
            except ValueError:
                raise ParseError(line_number, f"non-numeric value {value_text!r}")
            if index < 1:
                raise ParseError(line_number, f"feature indices are 1-based, got {index}")
            if index <= previous:
                raise ParseError(line_number, f"feature index {index} does not increase")
            if not math.isfinite(value):
                raise ParseError(line_number, f"non-finite value {value_text!r}")
            previous = index
            indices.append(index - 1)
            values.append(value)
        indptr.append(len(indices))

    if not labels:
        raise EmptyDatasetError("dataset has no rows")

    dim = max(indices) + 1 if indices else 0
    features = sparse.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(labels), dim),
    )
    return Dataset(labels=np.array(labels, dtype=np.float64), features=features)


def serialize_libsvm(dataset: Dataset) -> str:
    lines = []
    for label, pairs in dataset.rows:
        tokens = ["1" if label > 0 else "-1"]
        tokens.extend(f"{index + 1}:{value!r}" for index, value in pairs)
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"


def load_libsvm(path: Union[str, Path]) -> Dataset:
    with open(path, "rb") as stream:
        dataset = parse_libsvm(io.BytesIO(stream.read()))
    logger.info(f"Loaded {dataset.size} rows of dimension {dataset.dim} from {path}")
    return dataset


def partition(
        dataset: Dataset,
        n: int,
        seed: Optional[int] = None,
        lambda2: Optional[float] = None,
        normalize_rows: bool = True,
        regularizer: Optional[Regularizer] = None
) -> FiniteSumProblem:
    """Splits rows into n equal contiguous blocks after an optional seeded permutation.

    seed=None keeps file order. Trailing rows that do not fill a block are dropped.
    """
    if n < 1:
        raise InvalidInputError(f"worker count must be positive, got {n}")
    if dataset.size < n:
        raise InsufficientDataError(f"{dataset.size} rows cannot feed {n} workers")
    if dataset.dim == 0:
        raise InvalidInputError("dataset has no features")

    if seed is None:
        order = np.arange(dataset.size)
    else:
        order = RandomStreams(seed).generator(0, StreamPurpose.PARTITION, 0).permutation(dataset.size)

    m = dataset.size // n
    dropped = dataset.size - n * m
    if dropped:
        logger.warning(f"Dropping {dropped} trailing rows to give each of {n} workers {m} components")

    kept = order[:n * m]
    dense = dataset.features[kept].toarray()
    if normalize_rows:
        norms = np.linalg.norm(dense, axis=1)
        nonzero = norms > 0
        dense[nonzero] /= norms[nonzero, np.newaxis]

    if lambda2 is None:
        lambda2 = 1.0 / (n * m)
    return logistic_problem(
        dense.reshape(n, m, dataset.dim),
        dataset.labels[kept].reshape(n, m),
        lambda2,
        regularizer,
    )


def synth_problem(
        kind: ProblemKind,
        d: int,
        n: int,
        m: int,
        lambda2: Optional[float] = None,
        seed: int = 0,
        condition: float = 10.0,
        flip_fraction: float = FLIP_FRACTION,
        regularizer: Optional[Regularizer] = None
) -> FiniteSumProblem:
    if min(d, n, m) < 1:
        raise InvalidInputError(f"d, n and m must be positive, got d={d}, n={n}, m={m}")
    if lambda2 is None:
        lambda2 = 1.0 / (n * m)
    rng = RandomStreams(seed).generator(0, StreamPurpose.SYNTH, 0)

    if kind == ProblemKind.LOGISTIC:
        features = rng.standard_normal((n * m, d))
        norms = np.linalg.norm(features, axis=1)
        features /= np.where(norms > 0, norms, 1.0)[:, np.newaxis]
        planted = rng.standard_normal(d)
        labels = np.where(features @ planted >= 0, 1.0, -1.0)
        flips = rng.random(n * m) < flip_fraction
        labels[flips] *= -1.0
        return logistic_problem(features.reshape(n, m, d), labels.reshape(n, m), lambda2, regularizer)

    if condition < 1:
        raise InvalidInputError(f"condition ratio must be >= 1, got {condition}")
    basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
    spectrum = np.geomspace(1.0, 1.0 / condition, d)
    matrix = (basis * spectrum) @ basis.T
    matrix = 0.5 * (matrix + matrix.T)
    centers = rng.standard_normal((n, m, d))
    return quadratic_problem(np.broadcast_to(matrix, (n, m, d, d)), centers, lambda2, regularizer)
