import itertools
from typing import List

from qdiana.models.quantizer import LedgerModel
from qdiana.models.run_config import RunConfig
from qdiana.services.engine import build_problem, run_experiment
from qdiana.services.quantize import bit_cost, decode, deserialize_message, serialize_message
from qdiana.services.traces import trace_csv
from qdiana.utils.enums import MethodName
from qdiana.verify import PropertyResult, VerifyProfile
from qdiana.verify.harness import DITHER, optimum_of, prepare

NAME = "determinism"
PRIORITY = 5

ITERS = 200
REPLAY_ROUNDS = 50


def config_for(method: MethodName, seed: int, threads: int = 1) -> RunConfig:
    return RunConfig.model_validate(
        {
            "problem": {"kind": "logistic", "d": 20, "n": 4, "m": 50, "seed": seed},
            "method": {"name": method.value, "variant": "lsvrg"},
            "quantizer": DITHER.model_dump(),
            "run": {"iters": ITERS, "seed": seed, "cadence": 10, "threads": threads},
        }
    )


def run(profile: VerifyProfile) -> List[PropertyResult]:
    results = []
    base = config_for(MethodName.VR_DIANA, profile.seed)
    problem = build_problem(base.problem)
    optimum = optimum_of(problem)

    for method in MethodName:
        first = run_experiment(config_for(method, profile.seed), problem, optimum)
        again = run_experiment(config_for(method, profile.seed), problem, optimum)
        threaded = run_experiment(config_for(method, profile.seed, threads=4), problem, optimum)
        csv = trace_csv(first)
        results.append(
            PropertyResult(f"{method.value} CSV identical across runs", csv == trace_csv(again))
        )
        results.append(
            PropertyResult(f"{method.value} CSV identical across 1 and 4 threads", csv == trace_csv(threaded))
        )

        coin_bits = ITERS if method == MethodName.VR_DIANA else 0
        replayed = sum(sum(costs) for costs in first.round_costs)
        ledger_ok = (
            replayed == first.uplink_bits == first.records[-1].bits_up_cum
            and first.downlink_bits == ITERS * problem.d * 64 + coin_bits
        )
        results.append(
            PropertyResult(
                f"{method.value} ledger totals match per-message costs",
                ledger_ok,
                f"uplink {first.uplink_bits}, downlink {first.downlink_bits}",
            )
        )

    setup = prepare(problem, MethodName.VR_DIANA, optimum=optimum)
    ledger = LedgerModel()
    consistent = True
    for _, _, log in itertools.islice(setup.rounds(profile.seed), REPLAY_ROUNDS):
        consistent &= sum(bit_cost(message, ledger) for message in log.messages) == log.uplink_bits
        for message in log.messages:
            copy = deserialize_message(serialize_message(message), ledger)
            consistent &= copy.bit_cost == message.bit_cost and bool((decode(copy) == decode(message)).all())
    results.append(PropertyResult("messages replay to the logged bit costs", consistent))
    return results
