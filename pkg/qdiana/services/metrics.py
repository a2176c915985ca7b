"""Lyapunov potentials and convergence diagnostics measured against x*."""
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from qdiana.exceptions import InvalidStateError, WrongMethodError
from qdiana.models.state import MasterState, WorkerState
from qdiana.services.problems import FiniteSumProblem
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import MethodName, Regime, StreamPurpose, VrCoefficientForm, VrVariant
from qdiana.utils.numerics import squared_norm

SIGMA_SAMPLES = 10_000


@dataclass(frozen=True)
class Optimum:
    x_star: np.ndarray
    f_star: float
    worker_grads: np.ndarray
    component_grads: np.ndarray

    @classmethod
    def at(cls, problem: FiniteSumProblem, x_star: np.ndarray, f_star: float) -> "Optimum":
        return cls(
            x_star=np.array(x_star, copy=True),
            f_star=float(f_star),
            worker_grads=np.stack([problem.worker_gradient(i, x_star) for i in range(problem.n)]),
            component_grads=np.stack([problem.component_gradients(i, x_star) for i in range(problem.n)]),
        )


@dataclass(frozen=True)
class LyapunovParams:
    gamma: float
    alpha: float
    omega: float
    n: int
    m: int
    c_diana: float
    b_vr: float
    c_vr: float
    b_bar_svrg: float
    regime: Regime = Regime.STRONGLY_CONVEX
    l: int = 1


def svrg_coupling(gamma: float, L: float, omega: float, n: int, alpha: float, b: float) -> float:
    """c = γ²L(6ω/n + 2 + 4/n + 4bαn) of the strongly convex SVRG-DIANA analysis."""
    return gamma ** 2 * L * (6.0 * omega / n + 2.0 + 4.0 / n + 4.0 * b * alpha * n)


def lyapunov_params(
        method: MethodName,
        regime: Regime,
        gamma: float,
        alpha: float,
        omega: float,
        n: int,
        m: int,
        L: float,
        l: int = 1,
        form: VrCoefficientForm = VrCoefficientForm.PROOF
) -> LyapunovParams:
    c_diana = 4.0 * omega / (alpha * n)

    if regime == Regime.CONVEX:
        b_vr = 2.0 * (omega + 1.0) / (alpha * n ** 2)
        c_vr = 6.0 * (omega + 1.0) / n ** 2
    else:
        b_vr = 4.0 * (omega + 1.0) / (alpha * n ** 2)
        c_vr = 16.0 * (omega + 1.0) / n ** 2
        if form == VrCoefficientForm.STATEMENT:
            c_vr /= alpha

    if method == MethodName.SVRG_DIANA and regime == Regime.STRONGLY_CONVEX:
        b = 6.0 * omega / (n ** 2 * alpha)
        b_bar = b / (l * (2.0 * gamma - svrg_coupling(gamma, L, omega, n, alpha, b)))
    else:
        b_bar = 3.0 * omega * (omega + 1.0) / n ** 2

    return LyapunovParams(
        gamma=gamma,
        alpha=alpha,
        omega=omega,
        n=n,
        m=m,
        c_diana=c_diana,
        b_vr=b_vr,
        c_vr=c_vr,
        b_bar_svrg=b_bar,
        regime=regime,
        l=l,
    )


def shift_error(workers: Sequence[WorkerState], optimum: Optimum) -> float:
    """H = Σ_i ||h_i - ∇f_i(x*)||²."""
    return float(sum(squared_norm(worker.h - optimum.worker_grads[worker.index]) for worker in workers))


def _check_dimensions(master: MasterState, workers: Sequence[WorkerState], optimum: Optimum) -> None:
    if master.x.shape != optimum.x_star.shape or len(workers) != optimum.worker_grads.shape[0]:
        raise InvalidStateError("state does not match the reference solution")


def lyapunov_diana(
        master: MasterState,
        workers: Sequence[WorkerState],
        optimum: Optimum,
        params: LyapunovParams
) -> float:
    """Ψ = ||x - x*||² + (cγ²/n) Σ_i ||h_i - ∇f_i(x*)||²."""
    _check_dimensions(master, workers, optimum)
    weight = params.c_diana * params.gamma ** 2 / params.n
    return squared_norm(master.x - optimum.x_star) + weight * shift_error(workers, optimum)


def svrg_epoch_anchor(master: MasterState, l: int) -> Optional[np.ndarray]:
    """The anchor round k adopts: the finished epoch's weighted sum when k is a positive multiple of l."""
    if master.k > 0 and master.k % l == 0:
        return master.epoch_sum
    return master.anchor


def table_error(
        problem: FiniteSumProblem,
        workers: Sequence[WorkerState],
        optimum: Optimum,
        variant: VrVariant
) -> float:
    """D = Σ_i Σ_j ||∇f_ij(w_ij) - ∇f_ij(x*)||²."""
    total = 0.0
    for worker in workers:
        if variant == VrVariant.SAGA:
            if worker.table is None:
                raise InvalidStateError(f"worker {worker.index} has no SAGA table")
            gradients = worker.table
        else:
            if worker.anchor is None:
                raise InvalidStateError(f"worker {worker.index} has no L-SVRG anchor")
            gradients = problem.component_gradients(worker.index, worker.anchor)
        difference = gradients - optimum.component_grads[worker.index]
        total += float(np.einsum("jk,jk->", difference, difference))
    return total


def lyapunov_vr(
        master: MasterState,
        workers: Sequence[WorkerState],
        problem: FiniteSumProblem,
        optimum: Optimum,
        params: LyapunovParams,
        method: MethodName,
        variant: VrVariant = VrVariant.LSVRG
) -> Tuple[float, float, float]:
    """Returns (ψ, H, D) for VR-DIANA and (ψˢ, H, epoch) for SVRG-DIANA.

    ψˢ = (F(zˢ) - f*) + b̄γ²H is only meaningful at epoch boundaries, the states entering round k = sl.
    """
    if method == MethodName.DIANA:
        raise WrongMethodError("variance-reduced Lyapunov requested for a DIANA run")
    _check_dimensions(master, workers, optimum)
    gamma_sq = params.gamma ** 2
    H = shift_error(workers, optimum)

    if method == MethodName.SVRG_DIANA:
        anchor = svrg_epoch_anchor(master, params.l)
        if anchor is None:
            raise InvalidStateError("SVRG state has no anchor")
        gap = problem.objective(anchor) - optimum.f_star
        return gap + params.b_bar_svrg * gamma_sq * H, H, float(master.epoch)

    D = table_error(problem, workers, optimum, variant)
    psi = squared_norm(master.x - optimum.x_star) + params.b_vr * gamma_sq * H + params.c_vr * gamma_sq * D
    return psi, H, D


def vr_rate(L: float, mu: float, omega: float, n: int, alpha: float, m: int) -> float:
    """ρ = min{μ/(L(1 + 36(ω+1)/n)), α/2, 3/(8m)}."""
    return min(mu / (L * (1.0 + 36.0 * (omega + 1.0) / n)), alpha / 2.0, 3.0 / (8.0 * m))


def contraction_rate(
        method: MethodName,
        L: float,
        mu: float,
        gamma: float,
        alpha: float,
        omega: float,
        n: int,
        m: int,
        l: Optional[int] = None
) -> float:
    """Per-round rate for DIANA and VR-DIANA, per-epoch rate for SVRG-DIANA."""
    if method == MethodName.DIANA:
        return gamma * mu
    if method == MethodName.VR_DIANA:
        return vr_rate(L, mu, omega, n, alpha, m)
    return 1.0 - svrg_epoch_factor(L, mu, gamma, alpha, omega, n, l or m)


def svrg_epoch_factor(
        L: float,
        mu: float,
        gamma: float,
        alpha: float,
        omega: float,
        n: int,
        l: int
) -> float:
    """Per-epoch contraction factor of ψˢ for SVRG-DIANA using b = 6ω/(n²α)."""
    theta = min(mu * gamma, alpha / 2.0)
    b = 6.0 * omega / (n ** 2 * alpha)
    c = svrg_coupling(gamma, L, omega, n, alpha, b)
    decay = (1.0 - theta) ** l
    left = decay / (1.0 - decay) * (2.0 * theta + (1.0 - decay) * c * mu) / (mu * (2.0 * gamma - c))
    return max(left, decay)


def estimate_sigma_sq(
        problem: FiniteSumProblem,
        x: np.ndarray,
        samples: int = SIGMA_SAMPLES,
        seed: int = 0
) -> float:
    """Empirical σ² = (1/n) Σ_i E||∇f_ij(x) - ∇f_i(x)||² under uniform j."""
    streams = RandomStreams(seed)
    total = 0.0
    for i in range(problem.n):
        picks = streams.worker(i, StreamPurpose.ESTIMATE, 0).integers(problem.m, size=samples)
        gradients = problem.component_gradients(i, x)
        deviations = gradients[picks] - np.mean(gradients, axis=0)
        total += float(np.mean(np.einsum("sk,sk->s", deviations, deviations)))
    return total / problem.n


def diana_neighborhood(sigma_sq: float, mu: float, L: float) -> float:
    return 2.0 * sigma_sq / (mu * (mu + L))


def nonconvex_bound(f0: float, f_star: float, L: float, omega: float, n: int, m: int, k: int) -> float:
    return 40.0 * (f0 - f_star) * L * math.sqrt(1.0 + omega / n) * (m ** (2.0 / 3.0) + omega + 1.0) / k


def vr_convex_bound(psi0: float, gamma: float, L: float, omega: float, n: int, k: int) -> float:
    return psi0 / (2.0 * k * (gamma - L * gamma ** 2 * (1.0 + 36.0 * (omega + 1.0) / n)))


def svrg_convex_bound(
        dist0: float,
        gap0: float,
        H0: float,
        gamma: float,
        L: float,
        alpha: float,
        omega: float,
        n: int,
        l: int,
        k: int
) -> float:
    b = 3.0 * omega * (omega + 1.0) / n ** 2
    c = L * gamma ** 2 * (6.0 * omega / n + 2.0 + 1.0 / n + 4.0 * b * alpha * n)
    return (dist0 + l * c * gap0 + b * gamma ** 2 * H0) / (2.0 * k * (gamma - c))


def grad_norm_sq(problem: FiniteSumProblem, x: np.ndarray) -> float:
    return squared_norm(problem.full_gradient(x))


def running_gradient_average(values: Iterable[float]) -> np.ndarray:
    series = np.asarray(list(values), dtype=np.float64)
    return np.cumsum(series) / np.arange(1, series.size + 1)


def fitted_log_slope(ks: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ln(values) against k over the positive entries."""
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    mask = values > 0
    if mask.sum() < 2:
        raise InvalidStateError("need at least two positive values to fit a slope")
    slope, _ = np.polyfit(ks[mask], np.log(values[mask]), 1)
    return float(slope)


def monte_carlo_step(
        step: Callable[[int], float],
        seeds: Iterable[int],
        baseline: Optional[float] = None
) -> Tuple[float, float]:
    """Mean and standard error of step(seed) over independent seeds.

    With a baseline the ratio step(seed)/baseline is averaged instead.
    """
    values = np.array([step(seed) for seed in seeds], dtype=np.float64)
    if baseline is not None:
        values = values / baseline
    if values.size < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))
