"""Unquantized distributed baselines: prox-SGD, SAGA, L-SVRG and SVRG.

They read the same (seed, worker, purpose, round) streams as the quantized
methods, so an identity-quantizer run can be compared iterate by iterate.
"""
from typing import List, Optional, Sequence

import numpy as np

from qdiana.services.algos import draw_coin
from qdiana.services.problems import FiniteSumProblem
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import DianaOracle, StreamPurpose
from qdiana.utils.numerics import pairwise_mean


def _start(problem: FiniteSumProblem, x0: Optional[np.ndarray]) -> np.ndarray:
    return np.zeros(problem.d) if x0 is None else np.array(problem.check_point(x0), copy=True)


def _sample(problem: FiniteSumProblem, streams: RandomStreams, i: int, k: int) -> int:
    return int(streams.worker(i, StreamPurpose.SAMPLE, k).integers(problem.m))


def _gradient(problem: FiniteSumProblem, i: int, j: int, x: np.ndarray) -> np.ndarray:
    _, gradient = problem.component(i, j, x)
    return gradient


def prox_sgd(
        problem: FiniteSumProblem,
        gamma: float,
        iters: int,
        seed: int,
        oracle: DianaOracle = DianaOracle.UNIFORM1,
        x0: Optional[np.ndarray] = None
) -> np.ndarray:
    streams = RandomStreams(seed)
    x = _start(problem, x0)
    path = [x]
    for k in range(iters):
        if oracle == DianaOracle.FULL_GRAD:
            estimates = [problem.worker_gradient(i, x) for i in range(problem.n)]
        else:
            estimates = [_gradient(problem, i, _sample(problem, streams, i, k), x) for i in range(problem.n)]
        x = problem.prox(gamma, x - gamma * pairwise_mean(estimates))
        path.append(x)
    return np.stack(path)


def saga(
        problem: FiniteSumProblem,
        gamma: float,
        iters: int,
        seed: int,
        x0: Optional[np.ndarray] = None
) -> np.ndarray:
    streams = RandomStreams(seed)
    x = _start(problem, x0)
    tables = [problem.component_gradients(i, x) for i in range(problem.n)]
    means = [np.mean(table, axis=0) for table in tables]
    path = [x]
    for k in range(iters):
        estimates = []
        for i in range(problem.n):
            j = _sample(problem, streams, i, k)
            current = _gradient(problem, i, j, x)
            estimates.append(current - tables[i][j] + means[i])
            tables[i] = np.array(tables[i], copy=True)
            tables[i][j] = current
            means[i] = np.mean(tables[i], axis=0)
        x = problem.prox(gamma, x - gamma * pairwise_mean(estimates))
        path.append(x)
    return np.stack(path)


def lsvrg(
        problem: FiniteSumProblem,
        gamma: float,
        iters: int,
        seed: int,
        x0: Optional[np.ndarray] = None
) -> np.ndarray:
    streams = RandomStreams(seed)
    x = _start(problem, x0)
    anchor = np.array(x, copy=True)
    means = [problem.worker_gradient(i, anchor) for i in range(problem.n)]
    path = [x]
    for k in range(iters):
        coin = draw_coin(streams, k, problem.m)
        estimates = []
        for i in range(problem.n):
            j = _sample(problem, streams, i, k)
            estimates.append(_gradient(problem, i, j, x) - _gradient(problem, i, j, anchor) + means[i])
        if coin:
            anchor = np.array(x, copy=True)
            means = [problem.worker_gradient(i, anchor) for i in range(problem.n)]
        x = problem.prox(gamma, x - gamma * pairwise_mean(estimates))
        path.append(x)
    return np.stack(path)


def svrg(
        problem: FiniteSumProblem,
        gamma: float,
        iters: int,
        seed: int,
        l: int,
        p_weights: Sequence[float],
        x0: Optional[np.ndarray] = None
) -> np.ndarray:
    streams = RandomStreams(seed)
    x = _start(problem, x0)
    anchor = np.array(x, copy=True)
    means: List[np.ndarray] = [problem.worker_gradient(i, anchor) for i in range(problem.n)]
    epoch_sum = np.zeros(problem.d)
    path = [x]
    for k in range(iters):
        if k > 0 and k % l == 0:
            anchor = epoch_sum
            means = [problem.worker_gradient(i, anchor) for i in range(problem.n)]
            epoch_sum = np.zeros(problem.d)
        epoch_sum = epoch_sum + p_weights[k % l] * x
        estimates = []
        for i in range(problem.n):
            j = _sample(problem, streams, i, k)
            estimates.append(_gradient(problem, i, j, x) - _gradient(problem, i, j, anchor) + means[i])
        x = problem.prox(gamma, x - gamma * pairwise_mean(estimates))
        path.append(x)
    return np.stack(path)
