import math
from typing import List

import numpy as np

from qdiana.services.quantize import dither_outcomes, exact_moments, sparsify_outcomes
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import StreamPurpose
from qdiana.verify import PropertyResult, VerifyProfile

NAME = "enumeration"
PRIORITY = 20

TOLERANCE = 1e-12
VECTORS_PER_DIM = 20


def _mean_error(outcomes, x: np.ndarray) -> float:
    mean, _ = exact_moments(outcomes)
    return float(np.max(np.abs(mean - x)) / max(1.0, float(np.max(np.abs(x)))))


def run(profile: VerifyProfile) -> List[PropertyResult]:
    rng = RandomStreams(profile.seed).generator(3, StreamPurpose.PROBE, 0)
    worst_dither, worst_sparse, worst_second = 0.0, 0.0, 0.0
    probabilities_ok = True

    for dim in (1, 2, 3):
        for _ in range(VECTORS_PER_DIM):
            x = rng.standard_normal(dim) * rng.exponential(2.0)
            for p in (1.0, 2.0, math.inf):
                outcomes = dither_outcomes(x, p, 1)
                probabilities_ok &= abs(sum(weight for weight, _ in outcomes) - 1.0) <= TOLERANCE
                worst_dither = max(worst_dither, _mean_error(outcomes, x))
            for r in range(1, dim + 1):
                outcomes = sparsify_outcomes(x, r)
                worst_sparse = max(worst_sparse, _mean_error(outcomes, x))
                _, second = exact_moments(outcomes)
                expected = dim / r * float(np.dot(x, x))
                worst_second = max(worst_second, abs(second - expected) / max(expected, 1.0))

    mean, second = exact_moments(dither_outcomes(np.array([3.0, 4.0]), 2.0, 1))
    worked = bool(np.allclose(mean, [3.0, 4.0], rtol=0, atol=TOLERANCE)) and abs(second - 35.0) <= 1e-9

    return [
        PropertyResult("dither outcome probabilities sum to one", probabilities_ok),
        PropertyResult("dither exact mean equals x", worst_dither <= TOLERANCE, f"max error {worst_dither:.2e}"),
        PropertyResult("sparsify exact mean equals x", worst_sparse <= TOLERANCE, f"max error {worst_sparse:.2e}"),
        PropertyResult(
            "sparsify exact second moment equals (d/r)||x||²",
            worst_second <= TOLERANCE,
            f"max relative error {worst_second:.2e}",
        ),
        PropertyResult("dither of (3, 4) with p=2, s=1 has E||Q||² = 35", worked, f"E||Q||² = {second:.15g}"),
    ]
