import math
from typing import List, Tuple

import numpy as np

from qdiana.models.quantizer import QuantizerSpec
from qdiana.services.quantize import dither, dither_levels, dither_omega, omega_bound, sample_decoded
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import QuantizerScheme, StreamPurpose
from qdiana.verify import PropertyResult, VerifyProfile, z_threshold

NAME = "quantizer_laws"
PRIORITY = 10

DIM = 20
SPARSITY_DIM = 100
SPARSITY_DRAWS = 10_000
SPARSITY_SLACK = 1.1
CHUNK = 25_000
# floating-point slack on exact second-moment bounds
ROUNDING = 1e-12


def law_specs() -> List[QuantizerSpec]:
    specs = [
        QuantizerSpec(scheme=QuantizerScheme.DITHER, p=p, s=s)
        for p in (1.0, 2.0, math.inf)
        for s in (1, 4)
    ]
    specs += [QuantizerSpec(scheme=QuantizerScheme.SPARSIFY, r=r) for r in (1, 5, 20)]
    specs.append(QuantizerSpec(scheme=QuantizerScheme.BLOCK_DITHER, block_size=5))
    return specs


def describe(spec: QuantizerSpec) -> str:
    if spec.scheme == QuantizerScheme.DITHER:
        return f"dither(p={spec.p:g}, s={spec.s})"
    if spec.scheme == QuantizerScheme.SPARSIFY:
        return f"sparsify(r={spec.r})"
    return f"block_dither(size={spec.block_size})"


def moment_excess(second: float, second_se: float, bound: float) -> float:
    """Excess of a sampled E||Q||² over `bound` in standard errors; -1 when within the bound up to rounding."""
    excess = second - bound * (1.0 + ROUNDING)
    if excess <= 0.0:
        return -1.0
    return excess / second_se if second_se > 0.0 else math.inf


def moments(spec: QuantizerSpec, x: np.ndarray, rng: np.random.Generator, samples: int) -> Tuple[np.ndarray, ...]:
    """Streams samples in chunks; returns mean, coordinate SE, mean ||Q||², SE of ||Q||²."""
    total = np.zeros(x.size)
    total_sq = np.zeros(x.size)
    norms = []
    remaining = samples
    while remaining:
        size = min(CHUNK, remaining)
        draws = sample_decoded(spec, x, rng, size)
        total += draws.sum(axis=0)
        total_sq += np.square(draws).sum(axis=0)
        norms.append(np.einsum("sk,sk->s", draws, draws))
        remaining -= size

    mean = total / samples
    variance = np.maximum(total_sq / samples - mean ** 2, 0.0) * samples / (samples - 1)
    squared = np.concatenate(norms)
    return mean, np.sqrt(variance / samples), squared.mean(), squared.std(ddof=1) / math.sqrt(samples)


def run(profile: VerifyProfile) -> List[PropertyResult]:
    streams = RandomStreams(profile.seed)
    specs = law_specs()
    z = z_threshold(profile.vectors * len(specs) * DIM)
    vectors = streams.generator(0, StreamPurpose.PROBE, 0).standard_normal((profile.vectors, DIM))
    results = []

    second_moments = {}
    for index, spec in enumerate(specs):
        omega = omega_bound(spec, DIM)
        worst_bias, worst_excess, worst_dither = 0.0, -math.inf, -math.inf
        for row, x in enumerate(vectors):
            rng = streams.generator(row, StreamPurpose.SAMPLE, index)
            mean, se, second, second_se = moments(spec, x, rng, profile.samples)
            bias = np.abs(mean - x) / np.maximum(se, 1e-9 * float(np.max(np.abs(x))))
            worst_bias = max(worst_bias, float(bias.max()))
            bound = (omega + 1.0) * float(np.dot(x, x))
            worst_excess = max(worst_excess, moment_excess(second, second_se, bound))
            if spec.scheme == QuantizerScheme.DITHER:
                per_x = (dither_omega(x, spec.p, spec.s) + 1.0) * float(np.dot(x, x))
                worst_dither = max(worst_dither, moment_excess(second, second_se, per_x))
            second_moments[(index, row)] = (second, second_se)

        label = describe(spec)
        results.append(PropertyResult(f"unbiased {label}", worst_bias <= z, f"max |bias|/SE = {worst_bias:.2f}"))
        results.append(PropertyResult(f"second moment {label}", worst_excess <= 4.0, f"omega = {omega:.4g}"))
        if spec.scheme == QuantizerScheme.DITHER:
            results.append(PropertyResult(f"per-vector omega {label}", worst_dither <= 4.0))

    results.append(_monotone_in_p(specs, second_moments, profile.vectors))
    results.append(_expected_sparsity(streams))
    results.append(_payload_ranges(streams))
    return results


def _monotone_in_p(specs, second_moments, vectors: int) -> PropertyResult:
    ordered = {
        s: [index for index, spec in enumerate(specs) if spec.scheme == QuantizerScheme.DITHER and spec.s == s]
        for s in (1, 4)
    }
    violations = 0
    for indices in ordered.values():
        for row in range(vectors):
            for low, high in zip(indices, indices[1:]):
                value_low, se_low = second_moments[(low, row)]
                value_high, se_high = second_moments[(high, row)]
                if value_high > value_low * (1.0 + ROUNDING) + 4.0 * (se_low + se_high):
                    violations += 1
    return PropertyResult("second moment non-increasing in p", violations == 0, f"{violations} violations")


def _expected_sparsity(streams: RandomStreams) -> PropertyResult:
    rng = streams.generator(1, StreamPurpose.PROBE, 0)
    x = rng.standard_normal((SPARSITY_DRAWS, SPARSITY_DIM))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    levels = dither_levels(np.abs(x) / norms, rng.random(x.shape))
    mean_nnz = float(np.count_nonzero(levels, axis=1).mean())
    bound = 1.0 * (1.0 + math.sqrt(SPARSITY_DIM))
    return PropertyResult(
        "dither expected sparsity",
        mean_nnz <= bound * SPARSITY_SLACK,
        f"mean nnz = {mean_nnz:.3f}, bound = {bound:g}",
    )


def _payload_ranges(streams: RandomStreams) -> PropertyResult:
    rng = streams.generator(2, StreamPurpose.PROBE, 0)
    ok = True
    for _ in range(200):
        x = rng.standard_normal(DIM) * rng.exponential(3.0)
        s = int(rng.integers(1, 9))
        message = dither(x, 2.0, s, rng)
        if message.levels.size and (message.levels.max() > s + 1 or message.levels.min() < 1):
            ok = False
        if message.indices.size and message.indices.max() >= DIM:
            ok = False
    return PropertyResult("dither levels within [1, s+1] and indices < d", ok)
