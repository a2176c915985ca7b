"""Shared plumbing of the trajectory suites: problem setup and round iteration."""
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from qdiana.models.quantizer import QuantizerSpec
from qdiana.models.run_config import MethodConfig
from qdiana.models.state import MasterState, RoundLog, WorkerState
from qdiana.services.algos import ROUNDS, check_alpha, default_hyperparams, init_states
from qdiana.services.dataio import synth_problem
from qdiana.services.engine import solve_reference
from qdiana.services.metrics import LyapunovParams, Optimum, lyapunov_params
from qdiana.services.problems import FiniteSumProblem
from qdiana.services.quantize import dither_spec, omega_bound
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import DianaOracle, MethodName, ProblemKind, Regime, VrVariant

DITHER = dither_spec(2.0, 1)


@dataclass(frozen=True)
class Setup:
    problem: FiniteSumProblem
    optimum: Optimum
    quantizer: QuantizerSpec
    method: MethodConfig
    omega: float

    @property
    def params(self) -> LyapunovParams:
        problem, method = self.problem, self.method
        return lyapunov_params(
            method.method,
            method.regime or Regime.STRONGLY_CONVEX,
            method.gamma,
            method.alpha,
            self.omega,
            problem.n,
            problem.m,
            problem.L,
            l=method.l,
        )

    def start(self, x0: Optional[np.ndarray] = None) -> Tuple[MasterState, List[WorkerState]]:
        return init_states(self.problem, self.method, x0=x0)

    def rounds(
            self,
            seed: int,
            master: Optional[MasterState] = None,
            workers: Optional[List[WorkerState]] = None
    ) -> Iterator[Tuple[MasterState, List[WorkerState], RoundLog]]:
        """Steps the method forever from the given (or initial) state; callers stop iterating."""
        if master is None or workers is None:
            master, workers = self.start()
        streams = RandomStreams(seed)
        step = ROUNDS[self.method.method]
        while True:
            master, workers, log = step(master, workers, self.problem, self.quantizer, self.method, streams)
            yield master, workers, log


def vr_problem(d: int = 20, seed: int = 0, lambda2: Optional[float] = None) -> FiniteSumProblem:
    """Synthetic logistic regression with n = 4 workers of m = 50 samples."""
    return synth_problem(ProblemKind.LOGISTIC, d, 4, 50, lambda2=lambda2, seed=seed)


def optimum_of(problem: FiniteSumProblem) -> Optimum:
    x_star, f_star = solve_reference(problem)
    return Optimum.at(problem, x_star, f_star)


def prepare(
        problem: FiniteSumProblem,
        method: MethodName,
        quantizer: QuantizerSpec = DITHER,
        regime: Regime = Regime.STRONGLY_CONVEX,
        variant: VrVariant = VrVariant.LSVRG,
        oracle: DianaOracle = DianaOracle.UNIFORM1,
        optimum: Optional[Optimum] = None,
        **overrides
) -> Setup:
    omega = omega_bound(quantizer, problem.d)
    config = default_hyperparams(method, regime, problem, omega, oracle=oracle, variant=variant)
    if overrides:
        config = MethodConfig.model_validate({**config.model_dump(), **overrides})
    check_alpha(config, omega)
    return Setup(problem, optimum or optimum_of(problem), quantizer, config, omega)
