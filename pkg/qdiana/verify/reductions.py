"""With the identity quantizer and α = 1 every method collapses to its unquantized baseline."""
import itertools
from typing import Callable, List

import numpy as np

from qdiana.services import reference
from qdiana.services.quantize import IDENTITY_SPEC
from qdiana.utils.enums import MethodName, VrVariant
from qdiana.verify import PropertyResult, VerifyProfile
from qdiana.verify.harness import Setup, optimum_of, prepare, vr_problem

NAME = "reductions"
PRIORITY = 50

ROUNDS = 100
TOLERANCE = 1e-10


def quantized_path(setup: Setup, seed: int, rounds: int = ROUNDS) -> np.ndarray:
    master, _ = setup.start()
    path = [master.x]
    path.extend(state.x for state, _, _ in itertools.islice(setup.rounds(seed), rounds))
    return np.stack(path)


def path_mismatch(left: np.ndarray, right: np.ndarray) -> float:
    """Largest per-iterate relative distance between two paths."""
    scale = np.maximum(np.linalg.norm(right, axis=1), 1.0)
    return float(np.max(np.linalg.norm(left - right, axis=1) / scale))


def _compare(name: str, setup: Setup, baseline: Callable[[Setup], np.ndarray], seed: int) -> PropertyResult:
    mismatch = path_mismatch(quantized_path(setup, seed), baseline(setup))
    return PropertyResult(
        f"{name} with ω = 0 matches its baseline within relative {TOLERANCE:g}",
        mismatch <= TOLERANCE,
        f"max relative gap {mismatch:.2e}",
    )


def run(profile: VerifyProfile) -> List[PropertyResult]:
    problem = vr_problem()
    optimum = optimum_of(problem)
    seed = profile.seed

    def reduced(method: MethodName, **overrides) -> Setup:
        return prepare(problem, method, IDENTITY_SPEC, optimum=optimum, **overrides)

    saga = reduced(MethodName.VR_DIANA, variant=VrVariant.SAGA)
    lsvrg = reduced(MethodName.VR_DIANA, variant=VrVariant.LSVRG)
    # two epoch boundaries inside the compared window
    svrg = reduced(MethodName.SVRG_DIANA, l=problem.m, p_weights=[1.0 / problem.m] * problem.m)
    diana = reduced(MethodName.DIANA)

    return [
        _compare(
            "VR-DIANA(saga)", saga, lambda s: reference.saga(problem, s.method.gamma, ROUNDS, seed), seed
        ),
        _compare(
            "VR-DIANA(lsvrg)", lsvrg, lambda s: reference.lsvrg(problem, s.method.gamma, ROUNDS, seed), seed
        ),
        _compare(
            "SVRG-DIANA",
            svrg,
            lambda s: reference.svrg(problem, s.method.gamma, ROUNDS, seed, s.method.l, s.method.p_weights),
            seed,
        ),
        _compare(
            "DIANA",
            diana,
            lambda s: reference.prox_sgd(problem, s.method.gamma, ROUNDS, seed, s.method.oracle),
            seed,
        ),
    ]
