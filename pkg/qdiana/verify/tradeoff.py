"""Communication against iterations: dithering saves bits while the iteration count grows as predicted."""
import itertools
import math
from typing import List, Optional

import numpy as np

from qdiana.services.metrics import contraction_rate
from qdiana.services.quantize import IDENTITY_SPEC
from qdiana.utils.enums import MethodName
from qdiana.verify import PropertyResult, VerifyProfile
from qdiana.verify.harness import DITHER, Setup, optimum_of, prepare, vr_problem

NAME = "tradeoff"
PRIORITY = 60

WIDE_DIM = 1024
BIT_ROUNDS = 20
TARGET_GAP = 1e-8
CHECK_EVERY = 25
SLACK = 1.25


def uplink_per_worker(setup: Setup, seed: int, rounds: int = BIT_ROUNDS) -> float:
    total = sum(log.uplink_bits for _, _, log in itertools.islice(setup.rounds(seed), rounds))
    return total / (rounds * setup.problem.n)


def rounds_to_gap(setup: Setup, seed: int, target: float, cap: int) -> Optional[int]:
    """First checked round at which F(x) - F* <= target, or None within cap rounds."""
    problem, f_star = setup.problem, setup.optimum.f_star
    for master, _, _ in itertools.islice(setup.rounds(seed), cap):
        if master.k % CHECK_EVERY == 0 and problem.objective(master.x) - f_star <= target:
            return master.k
    return None


def predicted_ratio(omega: float, n: int) -> float:
    return (1.0 + 36.0 * (omega + 1.0) / n) / (1.0 + 36.0 / n)


def _bits(profile: VerifyProfile) -> PropertyResult:
    problem = vr_problem(d=WIDE_DIM)
    optimum = optimum_of(problem)
    dithered = prepare(problem, MethodName.VR_DIANA, DITHER, optimum=optimum)
    dense = prepare(problem, MethodName.VR_DIANA, IDENTITY_SPEC, optimum=optimum)
    quantized = uplink_per_worker(dithered, profile.seed)
    full = uplink_per_worker(dense, profile.seed)
    return PropertyResult(
        f"dither(p=2, s=1) uplink <= 1/8 of dense at d={WIDE_DIM}",
        quantized <= full / 8.0,
        f"{quantized:.1f} vs {full:.0f} bits per worker per round",
    )


def _iterations(profile: VerifyProfile) -> PropertyResult:
    problem = vr_problem()
    optimum = optimum_of(problem)
    dithered = prepare(problem, MethodName.VR_DIANA, DITHER, optimum=optimum)
    dense = prepare(problem, MethodName.VR_DIANA, IDENTITY_SPEC, optimum=optimum)
    method = dithered.method
    rho = contraction_rate(
        MethodName.VR_DIANA, problem.L, problem.mu, method.gamma, method.alpha, dithered.omega, problem.n, problem.m
    )
    cap = math.ceil(40.0 / rho)

    counts = {"dithered": [], "dense": []}
    for offset in range(profile.rate_seeds):
        seed = profile.seed + offset
        for label, setup in (("dithered", dithered), ("dense", dense)):
            reached = rounds_to_gap(setup, seed, TARGET_GAP, cap)
            counts[label].append(cap if reached is None else reached)

    ratio = float(np.mean(counts["dithered"]) / np.mean(counts["dense"]))
    bound = SLACK * predicted_ratio(dithered.omega, problem.n)
    return PropertyResult(
        "iterations to 1e-8 grow at most as (1 + 36(ω+1)/n)/(1 + 36/n)",
        ratio <= bound,
        f"ratio {ratio:.2f}, allowed {bound:.2f}",
    )


def run(profile: VerifyProfile) -> List[PropertyResult]:
    return [_bits(profile), _iterations(profile)]
