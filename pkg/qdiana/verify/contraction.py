"""Geometric decrease of the Lyapunov potentials along DIANA, VR-DIANA and SVRG-DIANA runs."""
import itertools
import logging
import math
from functools import partial
from typing import List

import numpy as np

from qdiana.services.dataio import synth_problem
from qdiana.services.metrics import (
    contraction_rate,
    fitted_log_slope,
    lyapunov_diana,
    lyapunov_vr,
    monte_carlo_step,
    svrg_epoch_factor
)
from qdiana.utils.enums import DianaOracle, MethodName, ProblemKind, VrVariant
from qdiana.verify import PropertyResult, VerifyProfile
from qdiana.verify.harness import Setup, optimum_of, prepare, vr_problem

NAME = "contraction"
PRIORITY = 40

logger = logging.getLogger("Verify")

PRECISION = 1e-12
TRAJECTORY_SHARE = 0.95
FROZEN_AFTER = (0, 200, 2000)
VR_RECORD_EVERY = 100
SVRG_EPOCHS = 4
SVRG_SLACK = 10.0


def diana_setup(seed: int) -> Setup:
    """FullGrad DIANA on a quadratic with κ = (L + μ)/(2μ) = 50 and σ = 0."""
    problem = synth_problem(ProblemKind.QUADRATIC, 10, 4, 5, lambda2=0.0, seed=seed, condition=99.0)
    return prepare(problem, MethodName.DIANA, oracle=DianaOracle.FULL_GRAD)


def _potential_after_step(setup: Setup, master, workers, seed: int) -> float:
    after, moved, _ = next(setup.rounds(seed, master, workers))
    return lyapunov_diana(after, moved, setup.optimum, setup.params)


def _diana_one_step(setup: Setup, profile: VerifyProfile) -> PropertyResult:
    params = setup.params
    factor = 1.0 - contraction_rate(
        MethodName.DIANA, setup.problem.L, setup.problem.mu, setup.method.gamma, setup.method.alpha,
        setup.omega, setup.problem.n, setup.problem.m,
    )
    master, workers = setup.start()
    path = setup.rounds(profile.seed)
    frozen = []
    for k in range(max(FROZEN_AFTER) + 1):
        if k in FROZEN_AFTER:
            frozen.append((master, workers))
        master, workers, _ = next(path)

    worst = -math.inf
    for master, workers in frozen:
        current = lyapunov_diana(master, workers, setup.optimum, params)
        step = partial(_potential_after_step, setup, master, workers)
        mean, error = monte_carlo_step(step, range(profile.seed + 1, profile.seed + 1 + profile.contraction_seeds))
        worst = max(worst, (mean - factor * current) / max(error, 1e-300))

    return PropertyResult(
        "DIANA one-step E[Ψ'] <= (1 - γμ)Ψ",
        worst <= 3.0,
        f"worst excess {worst:.2f} SE over {len(frozen)} frozen states",
    )


def _diana_trajectories(setup: Setup, profile: VerifyProfile) -> PropertyResult:
    params = setup.params
    rate = setup.method.gamma * setup.problem.mu
    cap = math.ceil(3.0 * math.log(1.0 / PRECISION) / rate)
    reached = 0
    for seed in range(profile.trajectory_seeds):
        master, workers = setup.start()
        target = PRECISION * lyapunov_diana(master, workers, setup.optimum, params)
        for master, workers, _ in itertools.islice(setup.rounds(profile.seed + seed), cap):
            if lyapunov_diana(master, workers, setup.optimum, params) <= target:
                reached += 1
                break
        logger.debug(f"DIANA trajectory {seed}: stopped at k={master.k}")

    return PropertyResult(
        "DIANA reaches Ψ <= 1e-12 Ψ⁰ within 3 ln(1e12)/(γμ) rounds",
        reached >= TRAJECTORY_SHARE * profile.trajectory_seeds,
        f"{reached}/{profile.trajectory_seeds} seeds within {cap} rounds",
    )


def _vr_rate(variant: VrVariant, setup: Setup, profile: VerifyProfile) -> List[PropertyResult]:
    problem, method = setup.problem, setup.method
    rho = contraction_rate(
        MethodName.VR_DIANA, problem.L, problem.mu, method.gamma, method.alpha, setup.omega, problem.n, problem.m
    )
    horizon = math.ceil(20.0 / rho)
    params = setup.params
    checkpoints = list(range(0, horizon + 1, VR_RECORD_EVERY))
    if checkpoints[-1] != horizon:
        checkpoints.append(horizon)

    potentials = np.zeros((profile.rate_seeds, len(checkpoints)))
    worst_gap, worst_shift = 0.0, 0.0
    for row in range(profile.rate_seeds):
        master, workers = setup.start()
        psi, H0, _ = lyapunov_vr(master, workers, problem, setup.optimum, params, MethodName.VR_DIANA, variant)
        potentials[row, 0] = psi
        column = 1
        for master, workers, _ in itertools.islice(setup.rounds(profile.seed + row), horizon):
            if master.k == checkpoints[column]:
                psi, H, _ = lyapunov_vr(master, workers, problem, setup.optimum, params, MethodName.VR_DIANA, variant)
                potentials[row, column] = psi
                column += 1
        worst_gap = max(worst_gap, problem.objective(master.x) - setup.optimum.f_star)
        worst_shift = max(worst_shift, H / H0)

    averaged = potentials.mean(axis=0)
    # the fit stops where the potential reaches the precision of x*
    clean = averaged >= PRECISION * averaged[0]
    slope = fitted_log_slope(np.array(checkpoints)[clean], averaged[clean])
    label = variant.value
    return [
        PropertyResult(f"VR-DIANA({label}) ln ψ slope <= -ρ/2", slope <= -rho / 2.0, f"slope {slope:.3e}, ρ = {rho:.3e}"),
        PropertyResult(f"VR-DIANA({label}) f(x^K) - f* <= 1e-10", worst_gap <= 1e-10, f"K = {horizon}, gap {worst_gap:.2e}"),
        PropertyResult(f"VR-DIANA({label}) learns shifts: H^K/H⁰ <= 1e-8", worst_shift <= 1e-8, f"ratio {worst_shift:.2e}"),
    ]


def _svrg_epochs(profile: VerifyProfile) -> List[PropertyResult]:
    problem = vr_problem(lambda2=0.1)
    setup = prepare(problem, MethodName.SVRG_DIANA)
    method, params = setup.method, setup.params
    factor = svrg_epoch_factor(problem.L, problem.mu, method.gamma, method.alpha, setup.omega, problem.n, method.l)

    potentials = np.zeros((profile.rate_seeds, SVRG_EPOCHS + 1))
    for row in range(profile.rate_seeds):
        master, workers = setup.start()
        potentials[row, 0], _, _ = lyapunov_vr(master, workers, problem, setup.optimum, params, MethodName.SVRG_DIANA)
        for master, workers, _ in itertools.islice(setup.rounds(profile.seed + row), SVRG_EPOCHS * method.l):
            if master.k % method.l == 0:
                potentials[row, master.k // method.l], _, _ = lyapunov_vr(
                    master, workers, problem, setup.optimum, params, MethodName.SVRG_DIANA
                )

    averaged = potentials.mean(axis=0)
    ratio = averaged[-1] / averaged[0]
    return [
        PropertyResult(
            "SVRG-DIANA ψˢ decreases every epoch",
            bool(np.all(np.diff(averaged) < 0)),
            f"l = {method.l}, epochs {SVRG_EPOCHS}",
        ),
        PropertyResult(
            "SVRG-DIANA ψˢ contracts at the epoch factor",
            ratio <= SVRG_SLACK * factor ** SVRG_EPOCHS,
            f"ratio {ratio:.3e}, factor {factor:.4f}",
        ),
    ]


def run(profile: VerifyProfile) -> List[PropertyResult]:
    setup = diana_setup(profile.seed)
    results = [_diana_one_step(setup, profile), _diana_trajectories(setup, profile)]

    problem = vr_problem()
    optimum = optimum_of(problem)
    for variant in (VrVariant.LSVRG, VrVariant.SAGA):
        vr_setup = prepare(problem, MethodName.VR_DIANA, variant=variant, optimum=optimum)
        results.extend(_vr_rate(variant, vr_setup, profile))

    results.extend(_svrg_epochs(profile))
    return results
