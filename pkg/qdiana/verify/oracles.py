from typing import List

import numpy as np

from qdiana.models.problem import Regularizer
from qdiana.services.dataio import synth_problem
from qdiana.services.problems import coercivity_ratio, fd_check, prox, smoothness_ratio
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import ProblemKind, RegularizerKind, StreamPurpose
from qdiana.verify import PropertyResult, VerifyProfile

NAME = "oracles"
PRIORITY = 30

FD_PROBES = 20
FD_TOLERANCE = 1e-6
PAIRS = 100
SLACK = 1e-9


def _gradient_checks(profile: VerifyProfile) -> List[PropertyResult]:
    results = []
    for kind in (ProblemKind.LOGISTIC, ProblemKind.QUADRATIC):
        problem = synth_problem(kind, 20, 4, 50, seed=profile.seed)
        x = RandomStreams(profile.seed).generator(4, StreamPurpose.PROBE, 0).standard_normal(problem.d)
        report = fd_check(problem, x, probes=FD_PROBES, seed=profile.seed)
        results.append(
            PropertyResult(
                f"{kind.value} gradients match central differences",
                report.max_relative_error <= FD_TOLERANCE,
                f"max relative error {report.max_relative_error:.2e} over {report.probe_count} probes",
            )
        )

        L, mu = problem.L, problem.mu
        smooth = smoothness_ratio(problem, PAIRS, seed=profile.seed)
        coercive = coercivity_ratio(problem, PAIRS, seed=profile.seed)
        results.append(
            PropertyResult(f"{kind.value} components are L-smooth", smooth <= L * (1 + SLACK), f"{smooth:.6g} <= L = {L:.6g}")
        )
        results.append(
            PropertyResult(
                f"{kind.value} workers are mu-strongly convex",
                coercive >= mu - SLACK * L,
                f"{coercive:.6g} >= mu = {mu:.6g}",
            )
        )
    return results


def _prox_checks(profile: VerifyProfile) -> List[PropertyResult]:
    rng = RandomStreams(profile.seed).generator(5, StreamPurpose.PROBE, 0)
    expansive = 0
    closed_form_error = 0.0
    for _ in range(PAIRS):
        gamma = float(rng.exponential(1.0))
        strength = float(rng.exponential(0.5))
        x = 2.0 * rng.standard_normal(10)
        y = 2.0 * rng.standard_normal(10)
        for kind in (RegularizerKind.L1, RegularizerKind.L2):
            regularizer = Regularizer(kind=kind, strength=strength)
            moved = np.linalg.norm(prox(regularizer, gamma, x) - prox(regularizer, gamma, y))
            if moved > np.linalg.norm(x - y) * (1 + SLACK):
                expansive += 1

        l1 = prox(Regularizer(kind=RegularizerKind.L1, strength=strength), gamma, x)
        expected = np.where(np.abs(x) > gamma * strength, x - np.sign(x) * gamma * strength, 0.0)
        closed_form_error = max(closed_form_error, float(np.max(np.abs(l1 - expected))))

    return [
        PropertyResult("prox is non-expansive", expansive == 0, f"{expansive} expanding pairs"),
        PropertyResult("l1 prox is soft thresholding", closed_form_error <= 1e-12, f"max error {closed_form_error:.2e}"),
    ]


def run(profile: VerifyProfile) -> List[PropertyResult]:
    return _gradient_checks(profile) + _prox_checks(profile)
