from typing import Sequence

import numpy as np


def pairwise_sum(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Sums vectors in index order by recursive halving.

    The association order depends only on len(vectors), so the result is
    identical however the vectors were produced.
    """
    count = len(vectors)
    if count == 0:
        raise ValueError("pairwise_sum of an empty sequence")
    if count == 1:
        return np.array(vectors[0], dtype=np.float64, copy=True)
    middle = count // 2
    return pairwise_sum(vectors[:middle]) + pairwise_sum(vectors[middle:])


def pairwise_mean(vectors: Sequence[np.ndarray]) -> np.ndarray:
    return pairwise_sum(vectors) / len(vectors)


def squared_norm(vector: np.ndarray) -> float:
    return float(np.dot(vector, vector))


def relative_difference(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale
