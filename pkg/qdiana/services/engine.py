"""Simulated parameter server: drives rounds, keeps the bit ledger, records traces."""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import settings
from qdiana.exceptions import ConfigError, DivergenceError, NoConvergenceError
from qdiana.models.run_config import MethodConfig, MethodSection, ProblemSection, RunConfig
from qdiana.models.state import MasterState, RoundLog, WorkerState
from qdiana.models.trace import Trace, TraceRecord
from qdiana.services.algos import ROUNDS, check_alpha, default_hyperparams, init_states
from qdiana.services.dataio import load_libsvm, partition, synth_problem
from qdiana.services.metrics import (
    LyapunovParams,
    Optimum,
    diana_neighborhood,
    estimate_sigma_sq,
    grad_norm_sq,
    lyapunov_diana,
    lyapunov_params,
    lyapunov_vr,
    shift_error
)
from qdiana.services.problems import FiniteSumProblem
from qdiana.services.quantize import omega_bound
from qdiana.services.streams import RandomStreams
from qdiana.services.traces import write_binary_trace, write_csv
from qdiana.utils.enums import DianaOracle, MethodName, Regime
from qdiana.utils.numerics import squared_norm

logger = logging.getLogger("Engine")


def prox_gradient_residual(problem: FiniteSumProblem, x: np.ndarray, step: float) -> float:
    """||x - prox_{γR}(x - γ∇f(x))|| / γ, zero exactly at minimizers of F."""
    moved = problem.prox(step, x - step * problem.full_gradient(x))
    return math.sqrt(squared_norm(x - moved)) / step


def solve_reference(
        problem: FiniteSumProblem,
        tol: Optional[float] = None,
        max_iters: Optional[int] = None,
        x0: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, float]:
    """Full-gradient proximal descent with step 1/L down to the residual tolerance."""
    tol = tol if tol is not None else settings.runtime.reference_tol
    max_iters = max_iters if max_iters is not None else settings.runtime.reference_max_iters
    step = 1.0 / problem.L
    x = np.zeros(problem.d) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    best_x, best_residual = x, math.inf

    for iteration in range(max_iters + 1):
        gradient = problem.full_gradient(x)
        moved = problem.prox(step, x - step * gradient)
        residual = math.sqrt(squared_norm(x - moved)) / step
        if residual < best_residual:
            best_x, best_residual = x, residual
        if residual <= tol:
            f_star = problem.objective(x)
            logger.info(f"Reference solution after {iteration} iterations: f* = {f_star:.17g}, residual = {residual:.3g}")
            return x, f_star
        x = moved

    raise NoConvergenceError(
        f"reference solver stopped at residual {best_residual:.3g} > {tol:g} after {max_iters} iterations",
        best_iterate=best_x,
        residual=best_residual,
    )


def build_problem(section: ProblemSection) -> FiniteSumProblem:
    if section.source == "libsvm":
        try:
            dataset = load_libsvm(section.path or "")
        except OSError as exc:
            raise ConfigError("problem.path", f"cannot read {section.path}: {exc.strerror or exc}")
        return partition(
            dataset,
            section.n,
            seed=section.partition_seed,
            lambda2=section.lambda2,
            normalize_rows=section.normalize_rows,
            regularizer=section.regularizer,
        )
    return synth_problem(
        section.kind,
        section.d,
        section.n,
        section.m,
        lambda2=section.lambda2,
        seed=section.seed,
        condition=section.condition,
        flip_fraction=section.flip_fraction,
        regularizer=section.regularizer,
    )


def default_regime(problem: FiniteSumProblem) -> Regime:
    return Regime.STRONGLY_CONVEX if problem.mu > 0 else Regime.CONVEX


def resolve_method(section: MethodSection, problem: FiniteSumProblem, omega: float) -> MethodConfig:
    """Turns the config section into concrete hyperparameters; explicit values override defaults."""
    regime = section.auto_regime
    if regime is not None:
        resolved = default_hyperparams(
            section.name, regime, problem, omega, oracle=section.oracle, variant=section.variant
        )
        updates = {}
        if section.alpha is not None:
            updates["alpha"] = section.alpha
        if section.l is not None:
            updates["l"] = section.l
            updates["p_weights"] = section.p_weights or [1.0 / section.l] * section.l
        config = resolved.model_copy(update=updates) if updates else resolved
        config = MethodConfig.model_validate(config.model_dump())
    else:
        l = section.l or (problem.m if section.name == MethodName.SVRG_DIANA else 1)
        config = MethodConfig(
            method=section.name,
            oracle=section.oracle,
            variant=section.variant,
            alpha=section.alpha if section.alpha is not None else 1.0 / (omega + 1.0),
            gamma=float(section.gamma),
            l=l,
            p_weights=section.p_weights or [1.0 / l] * l,
        )

    check_alpha(config, omega)
    return config


@dataclass
class Ledger:
    """Bit totals of everything the simulated network carried."""

    uplink: int = 0
    downlink: int = 0
    rounds: List[List[int]] = field(default_factory=list)

    def record(self, log: RoundLog) -> None:
        costs = [message.bit_cost for message in log.messages]
        self.rounds.append(costs)
        self.uplink += sum(costs)
        self.downlink += log.downlink_bits


@dataclass(frozen=True)
class Observer:
    problem: FiniteSumProblem
    optimum: Optimum
    params: LyapunovParams
    method: MethodConfig

    def record(self, master: MasterState, workers: List[WorkerState], ledger: Ledger, wall_ms: float) -> TraceRecord:
        x = master.x
        f_gap = self.problem.objective(x) - self.optimum.f_star
        dist_sq = squared_norm(x - self.optimum.x_star)
        if self.method.method == MethodName.DIANA:
            lyapunov = lyapunov_diana(master, workers, self.optimum, self.params)
            H = shift_error(workers, self.optimum)
            D = math.nan
        else:
            lyapunov, H, D = lyapunov_vr(
                master, workers, self.problem, self.optimum, self.params, self.method.method, self.method.variant
            )
            if self.method.method == MethodName.SVRG_DIANA:
                D = math.nan
        return TraceRecord(
            k=master.k,
            f_gap=float(f_gap),
            dist_sq=float(dist_sq),
            lyapunov=float(lyapunov),
            H=float(H),
            D=float(D),
            grad_norm_sq=grad_norm_sq(self.problem, x),
            bits_up_cum=ledger.uplink,
            bits_down_cum=ledger.downlink,
            wall_ms=float(wall_ms),
        )


def _diverged(x: np.ndarray, threshold: float) -> bool:
    return not np.all(np.isfinite(x)) or float(np.max(np.abs(x))) > threshold


def _settle(trace: Trace, master: MasterState, ledger: Ledger) -> None:
    trace.final_x = master.x
    trace.uplink_bits = ledger.uplink
    trace.downlink_bits = ledger.downlink
    trace.round_costs = ledger.rounds


def run_experiment(
        config: RunConfig,
        problem: Optional[FiniteSumProblem] = None,
        optimum: Optional[Optimum] = None
) -> Trace:
    started = time.perf_counter()
    problem = problem or build_problem(config.problem)
    quantizer = config.quantizer.validate_for(problem.d)
    omega = omega_bound(quantizer, problem.d)
    method = resolve_method(config.method, problem, omega)
    logger.info(
        f"{method.method.value} on n={problem.n}, m={problem.m}, d={problem.d}: "
        f"omega={omega:.6g}, alpha={method.alpha:.6g}, gamma={method.gamma:.6g}"
    )

    if optimum is None:
        x_star, f_star = solve_reference(problem, config.reference.tol, config.reference.max_iters)
        optimum = Optimum.at(problem, x_star, f_star)
    reference_done = time.perf_counter()

    regime = config.metrics.regime or method.regime or default_regime(problem)
    params = lyapunov_params(
        method.method,
        regime,
        method.gamma,
        method.alpha,
        omega,
        problem.n,
        problem.m,
        problem.L,
        l=method.l,
        form=config.metrics.coefficient_form,
    )
    observer = Observer(problem, optimum, params, method)
    streams = RandomStreams(config.run.seed)
    ledger = Ledger()
    step = ROUNDS[method.method]
    threads = config.run.threads or settings.runtime.threads
    threshold = settings.runtime.divergence_threshold

    def wall_ms() -> float:
        return (time.perf_counter() - reference_done) * 1000.0 if config.run.record_wall_time else 0.0

    master, workers = init_states(problem, method, shifts=config.run.init_shifts)
    trace = Trace(config=config.to_json(), f_star=optimum.f_star, omega=omega)
    if method.method == MethodName.DIANA and method.oracle == DianaOracle.UNIFORM1:
        trace.sigma_sq = estimate_sigma_sq(problem, master.x, seed=config.run.seed)
        if problem.mu > 0:
            logger.info(
                f"sigma^2 at x0 = {trace.sigma_sq:.6g}; DIANA neighborhood 2sigma^2/(mu(mu+L)) = "
                f"{diana_neighborhood(trace.sigma_sq, problem.mu, problem.L):.6g}"
            )
    trace.records.append(observer.record(master, workers, ledger, wall_ms()))

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else nullcontext()
    with pool as executor:
        for k in range(config.run.iters):
            master, workers, log = step(
                master, workers, problem, quantizer, method, streams, config.ledger, executor
            )
            ledger.record(log)
            if _diverged(master.x, threshold):
                logger.error(f"Iterate diverged at k={master.k}; gamma={method.gamma:.6g} is likely too large")
                _settle(trace, master, ledger)
                raise DivergenceError(f"iterate norm exceeded {threshold:g} at k={master.k}", trace=trace)
            if master.k % config.run.cadence == 0 or master.k == config.run.iters:
                trace.records.append(observer.record(master, workers, ledger, wall_ms()))
                logger.debug(f"k={master.k} f_gap={trace.records[-1].f_gap:.3e}")

    _settle(trace, master, ledger)
    trace.phase_seconds = {
        "reference": reference_done - started,
        "iterate": time.perf_counter() - reference_done,
    }

    if config.output.path:
        write_csv(trace, config.output.path)
        logger.info(f"Trace written to {config.output.path}")
    if config.output.binary_path:
        write_binary_trace(trace, config.output.binary_path)
    return trace
