import itertools
from typing import List

from qdiana.services.dataio import synth_problem
from qdiana.services.metrics import grad_norm_sq, nonconvex_bound, running_gradient_average
from qdiana.utils.enums import MethodName, ProblemKind, Regime
from qdiana.verify import PropertyResult, VerifyProfile
from qdiana.verify.harness import prepare

NAME = "nonconvex"
PRIORITY = 70

ROUNDS = 5000
ENVELOPE = 10.0
# a third of the labels disagree with the planted model
FLIP_FRACTION = 0.3


def run(profile: VerifyProfile) -> List[PropertyResult]:
    problem = synth_problem(ProblemKind.LOGISTIC, 20, 4, 50, lambda2=0.0, seed=profile.seed, flip_fraction=FLIP_FRACTION)
    setup = prepare(problem, MethodName.VR_DIANA, regime=Regime.NONCONVEX)
    master, _ = setup.start()
    f0 = problem.objective(master.x)

    norms = [grad_norm_sq(problem, master.x)]
    for master, _, _ in itertools.islice(setup.rounds(profile.seed), ROUNDS - 1):
        norms.append(grad_norm_sq(problem, master.x))
    average = float(running_gradient_average(norms)[-1])
    bound = nonconvex_bound(
        f0, setup.optimum.f_star, problem.L, setup.omega, problem.n, problem.m, ROUNDS
    )
    return [
        PropertyResult(
            "VR-DIANA non-convex steps: mean ||∇f||² within 10x the worst-case bound",
            average <= ENVELOPE * bound,
            f"average {average:.3e}, bound {bound:.3e} at k={ROUNDS}",
        ),
        PropertyResult("non-convex run decreases the objective", problem.objective(master.x) < f0),
    ]
