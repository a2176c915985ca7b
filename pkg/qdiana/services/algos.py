"""Single-round transitions of DIANA, VR-DIANA and SVRG-DIANA.

A round takes the master and worker states at iterate x^k and returns the
states at x^{k+1}. States are immutable; every array a round changes is
replaced, so a frozen state can be stepped many times from the same point.
Worker work may run on a thread pool: each worker draws only from its own
(seed, worker, purpose, round) streams and the master aggregates in worker
order, so the result never depends on scheduling.
"""
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from pydantic import ValidationError

from qdiana.exceptions import InvalidInputError, InvalidStateError, RegimeError
from qdiana.models.base import config_error_from
from qdiana.models.quantizer import LedgerModel, QuantizedMessage, QuantizerSpec
from qdiana.models.run_config import MethodConfig
from qdiana.models.state import MasterState, RoundLog, WorkerState
from qdiana.services.problems import FiniteSumProblem
from qdiana.services.quantize import decode, quantize
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import DianaOracle, MethodName, Regime, ShiftInit, StreamPurpose, VrVariant
from qdiana.utils.numerics import pairwise_mean

logger = logging.getLogger("Algos")

ALPHA_SLACK = 1e-12
COIN_BITS = 1

T = TypeVar("T")


@dataclass(frozen=True)
class WorkerOutcome:
    state: WorkerState
    message: QuantizedMessage
    decoded: np.ndarray
    estimate: np.ndarray
    sampled: int


def map_workers(fn: Callable[[WorkerState], T], workers: Sequence[WorkerState], executor: Optional[Executor]) -> List[T]:
    if executor is None:
        return [fn(worker) for worker in workers]
    return list(executor.map(fn, workers))


def check_alpha(config: MethodConfig, omega: float) -> None:
    if config.alpha * (omega + 1.0) > 1.0 + ALPHA_SLACK:
        raise InvalidInputError(f"alpha={config.alpha} violates alpha*(omega+1) <= 1 with omega={omega}")


def _check_states(master: MasterState, workers: Sequence[WorkerState], problem: FiniteSumProblem) -> None:
    if master.x.shape != (problem.d,) or master.shifts.shape != (problem.n, problem.d):
        raise InvalidStateError(f"master state does not match problem with n={problem.n}, d={problem.d}")
    if len(workers) != problem.n:
        raise InvalidStateError(f"{len(workers)} worker states for {problem.n} workers")
    for position, worker in enumerate(workers):
        if worker.index != position or worker.h.shape != (problem.d,):
            raise InvalidStateError(f"worker state {position} is malformed")


def _transmit(
        worker: WorkerState,
        estimate: np.ndarray,
        quantizer: QuantizerSpec,
        config: MethodConfig,
        streams: RandomStreams,
        k: int,
        ledger: Optional[LedgerModel]
) -> Tuple[WorkerState, QuantizedMessage, np.ndarray]:
    rng = streams.worker(worker.index, StreamPurpose.QUANTIZE, k)
    message = quantize(quantizer, estimate - worker.h, rng, ledger)
    decoded = decode(message)
    return replace(worker, h=worker.h + config.alpha * decoded), message, decoded


def _sample_component(problem: FiniteSumProblem, streams: RandomStreams, i: int, k: int) -> int:
    return int(streams.worker(i, StreamPurpose.SAMPLE, k).integers(problem.m))


def _component_gradient(problem: FiniteSumProblem, i: int, j: int, x: np.ndarray) -> np.ndarray:
    _, gradient = problem.component(i, j, x)
    return gradient


def _master_step(
        master: MasterState,
        outcomes: Sequence[WorkerOutcome],
        problem: FiniteSumProblem,
        config: MethodConfig,
        ledger: LedgerModel,
        coin: Optional[bool] = None,
        **changes
) -> Tuple[MasterState, RoundLog]:
    aggregate = pairwise_mean([master.shifts[i] + outcome.decoded for i, outcome in enumerate(outcomes)])
    x_next = problem.prox(config.gamma, master.x - config.gamma * aggregate)
    shifts = np.stack([master.shifts[i] + config.alpha * outcome.decoded for i, outcome in enumerate(outcomes)])

    downlink = master.d * ledger.float_bits + (COIN_BITS if coin is not None else 0)
    log = RoundLog(
        k=master.k,
        messages=tuple(outcome.message for outcome in outcomes),
        uplink_bits=sum(outcome.message.bit_cost for outcome in outcomes),
        downlink_bits=downlink,
        estimates=np.stack([outcome.estimate for outcome in outcomes]),
        aggregate=aggregate,
        sampled=tuple(outcome.sampled for outcome in outcomes),
        coin=coin,
        epoch_started=changes.pop("epoch_started", False),
    )
    state = replace(
        master,
        x=x_next,
        shifts=shifts,
        h_mean=pairwise_mean(list(shifts)),
        k=master.k + 1,
        **changes,
    )
    return state, log


def diana_round(
        master: MasterState,
        workers: Sequence[WorkerState],
        problem: FiniteSumProblem,
        quantizer: QuantizerSpec,
        config: MethodConfig,
        streams: RandomStreams,
        ledger: Optional[LedgerModel] = None,
        executor: Optional[Executor] = None
) -> Tuple[MasterState, List[WorkerState], RoundLog]:
    _check_states(master, workers, problem)
    ledger = ledger or LedgerModel()
    x, k = master.x, master.k

    def work(worker: WorkerState) -> WorkerOutcome:
        if config.oracle == DianaOracle.FULL_GRAD:
            j = -1
            estimate = problem.worker_gradient(worker.index, x)
        else:
            j = _sample_component(problem, streams, worker.index, k)
            estimate = _component_gradient(problem, worker.index, j, x)
        state, message, decoded = _transmit(worker, estimate, quantizer, config, streams, k, ledger)
        return WorkerOutcome(state, message, decoded, estimate, j)

    outcomes = map_workers(work, workers, executor)
    state, log = _master_step(master, outcomes, problem, config, ledger)
    return state, [outcome.state for outcome in outcomes], log


def draw_coin(streams: RandomStreams, k: int, m: int) -> bool:
    return bool(streams.master(StreamPurpose.COIN, k).random() < 1.0 / m)


def vr_diana_round(
        master: MasterState,
        workers: Sequence[WorkerState],
        problem: FiniteSumProblem,
        quantizer: QuantizerSpec,
        config: MethodConfig,
        streams: RandomStreams,
        ledger: Optional[LedgerModel] = None,
        executor: Optional[Executor] = None
) -> Tuple[MasterState, List[WorkerState], RoundLog]:
    _check_states(master, workers, problem)
    ledger = ledger or LedgerModel()
    x, k = master.x, master.k
    lsvrg = config.variant == VrVariant.LSVRG
    coin = draw_coin(streams, k, problem.m) if lsvrg else None

    def work(worker: WorkerState) -> WorkerOutcome:
        i = worker.index
        j = _sample_component(problem, streams, i, k)
        current = _component_gradient(problem, i, j, x)

        if lsvrg:
            if worker.anchor is None or worker.mu is None:
                raise InvalidStateError(f"worker {i} has no L-SVRG anchor")
            estimate = current - _component_gradient(problem, i, j, worker.anchor) + worker.mu
            if coin:
                memory = {"anchor": np.array(x, copy=True), "mu": problem.worker_gradient(i, x)}
            else:
                memory = {}
        else:
            if worker.table is None or worker.mu is None:
                raise InvalidStateError(f"worker {i} has no SAGA table")
            estimate = current - worker.table[j] + worker.mu
            table = np.array(worker.table, copy=True)
            table[j] = current
            memory = {"table": table, "mu": np.mean(table, axis=0)}

        state, message, decoded = _transmit(worker, estimate, quantizer, config, streams, k, ledger)
        return WorkerOutcome(replace(state, **memory), message, decoded, estimate, j)

    outcomes = map_workers(work, workers, executor)
    state, log = _master_step(master, outcomes, problem, config, ledger, coin=coin)
    return state, [outcome.state for outcome in outcomes], log


def svrg_diana_round(
        master: MasterState,
        workers: Sequence[WorkerState],
        problem: FiniteSumProblem,
        quantizer: QuantizerSpec,
        config: MethodConfig,
        streams: RandomStreams,
        ledger: Optional[LedgerModel] = None,
        executor: Optional[Executor] = None
) -> Tuple[MasterState, List[WorkerState], RoundLog]:
    """One SVRG-DIANA round.

    When k is a positive multiple of l, the anchor moves to the weighted
    sum Σ_r p_r x^{(s-1)l+r} accumulated over the finished epoch and every
    worker recomputes ∇f_i at it before sampling.
    """
    _check_states(master, workers, problem)
    if len(config.p_weights) != config.l:
        raise InvalidInputError(f"p_weights has {len(config.p_weights)} entries, expected l={config.l}")
    if master.anchor is None or master.epoch_sum is None:
        raise InvalidStateError("master has no SVRG epoch state")
    ledger = ledger or LedgerModel()
    x, k = master.x, master.k

    boundary = k > 0 and k % config.l == 0
    anchor = master.epoch_sum if boundary else master.anchor
    epoch = master.epoch + 1 if boundary else master.epoch
    epoch_sum = np.zeros(problem.d) if boundary else master.epoch_sum
    epoch_sum = epoch_sum + config.p_weights[k % config.l] * x

    def work(worker: WorkerState) -> WorkerOutcome:
        i = worker.index
        if boundary:
            worker = replace(worker, anchor=np.array(anchor, copy=True), mu=problem.worker_gradient(i, anchor))
        if worker.anchor is None or worker.mu is None:
            raise InvalidStateError(f"worker {i} has no SVRG anchor")
        j = _sample_component(problem, streams, i, k)
        estimate = (
            _component_gradient(problem, i, j, x) - _component_gradient(problem, i, j, worker.anchor) + worker.mu
        )
        state, message, decoded = _transmit(worker, estimate, quantizer, config, streams, k, ledger)
        return WorkerOutcome(state, message, decoded, estimate, j)

    outcomes = map_workers(work, workers, executor)
    state, log = _master_step(
        master,
        outcomes,
        problem,
        config,
        ledger,
        anchor=np.array(anchor, copy=True),
        epoch=epoch,
        epoch_sum=epoch_sum,
        epoch_started=boundary,
    )
    return state, [outcome.state for outcome in outcomes], log


ROUNDS = {
    MethodName.DIANA: diana_round,
    MethodName.VR_DIANA: vr_diana_round,
    MethodName.SVRG_DIANA: svrg_diana_round,
}


def init_states(
        problem: FiniteSumProblem,
        config: MethodConfig,
        x0: Optional[np.ndarray] = None,
        shifts: ShiftInit = ShiftInit.ZERO
) -> Tuple[MasterState, List[WorkerState]]:
    x = np.zeros(problem.d) if x0 is None else np.array(problem.check_point(x0), copy=True)
    workers = []
    for i in range(problem.n):
        h = problem.worker_gradient(i, x) if shifts == ShiftInit.GRADIENT else np.zeros(problem.d)
        memory = {}
        if config.method == MethodName.VR_DIANA and config.variant == VrVariant.SAGA:
            table = problem.component_gradients(i, x)
            memory = {"table": table, "mu": np.mean(table, axis=0)}
        elif config.method != MethodName.DIANA:
            memory = {"anchor": np.array(x, copy=True), "mu": problem.worker_gradient(i, x)}
        workers.append(WorkerState(index=i, h=h, **memory))

    master_shifts = np.stack([worker.h for worker in workers])
    master = MasterState(x=x, shifts=master_shifts, h_mean=pairwise_mean(list(master_shifts)))
    if config.method == MethodName.SVRG_DIANA:
        master = replace(master, anchor=np.array(x, copy=True), epoch_sum=np.zeros(problem.d))
    return master, workers


def svrg_epoch_weights(theta: float, l: int) -> List[float]:
    """Weights p_r ∝ (1 - θ)^{l-1-r}, r = 0..l-1."""
    raw = [(1.0 - theta) ** (l - 1 - r) for r in range(l)]
    total = math.fsum(raw)
    return [weight / total for weight in raw]


def svrg_theta(mu: float, gamma: float, alpha: float) -> float:
    return min(mu * gamma, alpha / 2.0)


def _require_strong_convexity(problem: FiniteSumProblem, method: MethodName) -> None:
    if problem.mu <= 0.0:
        raise RegimeError(f"{method.value} strongly convex defaults need mu > 0")


def default_hyperparams(
        method: MethodName,
        regime: Regime,
        problem: FiniteSumProblem,
        omega: float,
        n: Optional[int] = None,
        m: Optional[int] = None,
        oracle: DianaOracle = DianaOracle.UNIFORM1,
        variant: VrVariant = VrVariant.LSVRG
) -> MethodConfig:
    n = n or problem.n
    m = m or problem.m
    L, mu = problem.L, problem.mu
    alpha = 1.0 / (omega + 1.0)
    l, p_weights = 1, [1.0]

    if method == MethodName.DIANA:
        if regime != Regime.STRONGLY_CONVEX:
            raise RegimeError(f"DIANA has step-size defaults only for the strongly convex regime, got {regime.value}")
        _require_strong_convexity(problem, method)
        gamma = min(2.0 / ((mu + L) * (1.0 + 6.0 * omega / n)), 1.0 / (2.0 * mu * (omega + 1.0)))

    elif method == MethodName.VR_DIANA:
        if regime == Regime.STRONGLY_CONVEX:
            _require_strong_convexity(problem, method)
            gamma = 1.0 / (L * (1.0 + 36.0 * (omega + 1.0) / n))
        elif regime == Regime.CONVEX:
            gamma = 1.0 / (2.0 * L * math.sqrt(m) * (1.0 + 36.0 * (omega + 1.0) / n))
        else:
            gamma = nonconvex_gamma(L, omega, n, m)

    else:
        if regime == Regime.STRONGLY_CONVEX:
            _require_strong_convexity(problem, method)
            gamma = 1.0 / (10.0 * L * (2.0 + 4.0 / n + 30.0 * omega / n))
            theta = svrg_theta(mu, gamma, alpha)
            l = math.ceil(2.0 / theta)
            p_weights = svrg_epoch_weights(theta, l)
        elif regime == Regime.CONVEX:
            gamma = 1.0 / (L * math.sqrt(m) * (2.0 + 4.0 / n + 18.0 * omega / n))
            l = m
            p_weights = [1.0 / m] * m
        else:
            gamma = nonconvex_gamma(L, omega, n, m)
            l = m
            p_weights = [0.0] * (m - 1) + [1.0]

    logger.info(f"Resolved {method.value} defaults for {regime.value}: alpha={alpha:.6g}, gamma={gamma:.6g}, l={l}")
    try:
        return MethodConfig(
            method=method,
            oracle=oracle,
            variant=variant,
            alpha=alpha,
            gamma=gamma,
            l=l,
            p_weights=p_weights,
            regime=regime,
        )
    except ValidationError as exc:
        raise config_error_from(exc)


def nonconvex_gamma(L: float, omega: float, n: int, m: int) -> float:
    return 1.0 / (10.0 * L * math.sqrt(1.0 + omega / n) * (m ** (2.0 / 3.0) + omega + 1.0))
