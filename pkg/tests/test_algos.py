from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest

from qdiana.exceptions import InvalidInputError, InvalidStateError, RegimeError
from qdiana.models.run_config import MethodConfig
from qdiana.services.algos import (
    check_alpha,
    default_hyperparams,
    diana_round,
    init_states,
    svrg_diana_round,
    svrg_epoch_weights,
    vr_diana_round
)
from qdiana.services.problems import quadratic_problem
from qdiana.services.quantize import IDENTITY_SPEC, dither_spec
from qdiana.services.streams import RandomStreams
from qdiana.utils.enums import DianaOracle, MethodName, Regime, ShiftInit, VrVariant

DITHER = dither_spec(2.0, 1)


def diagonal_problem(*diagonal):
    size = len(diagonal)
    return quadratic_problem(np.diag(diagonal)[np.newaxis, np.newaxis], np.zeros((1, 1, size)))


def diana_config(alpha=1.0, gamma=0.5, oracle=DianaOracle.FULL_GRAD):
    return MethodConfig(method=MethodName.DIANA, oracle=oracle, alpha=alpha, gamma=gamma)


def run_rounds(step, problem, quantizer, config, rounds, seed=3, executor=None):
    streams = RandomStreams(seed)
    master, workers = init_states(problem, config)
    logs = []
    for _ in range(rounds):
        master, workers, log = step(master, workers, problem, quantizer, config, streams, executor=executor)
        logs.append(log)
    return master, workers, logs


def test_identity_shifts_learn_worker_gradients(small_logistic):
    master, workers = init_states(small_logistic, diana_config())
    x0 = master.x

    master, workers, log = diana_round(
        master, workers, small_logistic, IDENTITY_SPEC, diana_config(), RandomStreams(0)
    )

    for i, worker in enumerate(workers):
        np.testing.assert_array_equal(worker.h, small_logistic.worker_gradient(i, x0))
        np.testing.assert_array_equal(master.shifts[i], worker.h)
    np.testing.assert_allclose(log.aggregate, small_logistic.full_gradient(x0), rtol=1e-12, atol=1e-15)
    assert master.k == 1


def test_exact_step_on_unit_quadratic():
    problem = diagonal_problem(1.0, 1.0)
    master, workers = init_states(problem, diana_config(gamma=1.0), x0=np.array([3.0, -4.0]))

    master, _, _ = diana_round(master, workers, problem, IDENTITY_SPEC, diana_config(gamma=1.0), RandomStreams(0))

    np.testing.assert_array_equal(master.x, [0.0, 0.0])


def test_master_and_worker_shifts_stay_identical(small_logistic):
    config = MethodConfig(method=MethodName.VR_DIANA, alpha=0.2, gamma=0.05)

    master, workers, logs = run_rounds(vr_diana_round, small_logistic, DITHER, config, 25)

    for i, worker in enumerate(workers):
        np.testing.assert_array_equal(master.shifts[i], worker.h)
    np.testing.assert_allclose(master.h_mean, np.mean(np.stack([w.h for w in workers]), axis=0), rtol=1e-12, atol=1e-15)
    assert all(log.coin is not None for log in logs)
    assert all(log.downlink_bits == small_logistic.d * 64 + 1 for log in logs)


def test_saga_table_refreshes_sampled_entry(small_logistic):
    config = MethodConfig(method=MethodName.VR_DIANA, variant=VrVariant.SAGA, alpha=0.2, gamma=0.05)
    streams = RandomStreams(8)
    master, workers = init_states(small_logistic, config)
    master, workers, _ = vr_diana_round(master, workers, small_logistic, DITHER, config, streams)
    before = workers
    x = master.x

    master, workers, log = vr_diana_round(master, workers, small_logistic, DITHER, config, streams)

    for worker, old, j in zip(workers, before, log.sampled):
        _, gradient = small_logistic.component(worker.index, j, x)
        np.testing.assert_array_equal(worker.table[j], gradient)
        untouched = np.arange(small_logistic.m) != j
        np.testing.assert_array_equal(worker.table[untouched], old.table[untouched])
        np.testing.assert_allclose(worker.mu, worker.table.mean(axis=0))
    assert log.coin is None
    assert log.downlink_bits == small_logistic.d * 64


def test_lsvrg_anchor_moves_only_on_coin(small_logistic):
    config = MethodConfig(method=MethodName.VR_DIANA, alpha=0.2, gamma=0.05)
    streams = RandomStreams(4)
    master, workers = init_states(small_logistic, config)

    for _ in range(40):
        x = master.x
        previous = workers
        master, workers, log = vr_diana_round(master, workers, small_logistic, DITHER, config, streams)
        for worker, old in zip(workers, previous):
            expected = x if log.coin else old.anchor
            np.testing.assert_array_equal(worker.anchor, expected)


def test_svrg_anchor_is_weighted_epoch_sum(small_logistic):
    weights = [0.2, 0.3, 0.5]
    config = MethodConfig(method=MethodName.SVRG_DIANA, alpha=0.2, gamma=0.05, l=3, p_weights=weights)
    streams = RandomStreams(5)
    master, workers = init_states(small_logistic, config)
    iterates = []

    for k in range(4):
        iterates.append(master.x)
        master, workers, log = svrg_diana_round(master, workers, small_logistic, DITHER, config, streams)
        assert log.epoch_started == (k == 3)

    expected = sum(weight * x for weight, x in zip(weights, iterates[:3]))
    np.testing.assert_allclose(master.anchor, expected, rtol=1e-12)
    assert master.epoch == 1
    for worker in workers:
        np.testing.assert_allclose(worker.anchor, expected, rtol=1e-12)
        np.testing.assert_allclose(worker.mu, small_logistic.worker_gradient(worker.index, master.anchor), rtol=1e-12)


def test_single_component_svrg_estimate_is_the_gradient():
    problem = diagonal_problem(2.0, 0.5)
    config = MethodConfig(method=MethodName.SVRG_DIANA, alpha=1.0, gamma=0.1, l=2, p_weights=[0.5, 0.5])
    master, workers = init_states(problem, config, x0=np.array([1.0, 1.0]))
    streams = RandomStreams(2)

    for _ in range(5):
        x = master.x
        master, workers, log = svrg_diana_round(master, workers, problem, IDENTITY_SPEC, config, streams)
        np.testing.assert_allclose(log.estimates[0], problem.worker_gradient(0, x), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize(
    "method, config",
    [
        (diana_round, diana_config(alpha=0.2, gamma=0.05, oracle=DianaOracle.UNIFORM1)),
        (vr_diana_round, MethodConfig(method=MethodName.VR_DIANA, alpha=0.2, gamma=0.05)),
        (svrg_diana_round, MethodConfig(method=MethodName.SVRG_DIANA, alpha=0.2, gamma=0.05, l=4, p_weights=[0.25] * 4)),
    ],
)
def test_rounds_do_not_depend_on_threads(small_logistic, method, config):
    serial, _, serial_logs = run_rounds(method, small_logistic, DITHER, config, 12)
    with ThreadPoolExecutor(max_workers=3) as executor:
        threaded, _, threaded_logs = run_rounds(method, small_logistic, DITHER, config, 12, executor=executor)

    np.testing.assert_array_equal(serial.x, threaded.x)
    assert [log.uplink_bits for log in serial_logs] == [log.uplink_bits for log in threaded_logs]


def test_rounds_reject_mismatched_states(small_logistic):
    config = MethodConfig(method=MethodName.VR_DIANA, alpha=0.2, gamma=0.05)
    master, workers = init_states(small_logistic, config)
    streams = RandomStreams(0)

    with pytest.raises(InvalidStateError):
        vr_diana_round(master, workers[:-1], small_logistic, DITHER, config, streams)
    with pytest.raises(InvalidStateError):
        vr_diana_round(replace(master, x=np.zeros(2)), workers, small_logistic, DITHER, config, streams)

    _, plain_workers = init_states(small_logistic, diana_config())
    with pytest.raises(InvalidStateError):
        vr_diana_round(master, plain_workers, small_logistic, DITHER, config, streams)


def test_gradient_shift_initialisation(small_logistic):
    master, workers = init_states(small_logistic, diana_config(), shifts=ShiftInit.GRADIENT)

    for i, worker in enumerate(workers):
        np.testing.assert_array_equal(worker.h, small_logistic.worker_gradient(i, master.x))


def test_check_alpha():
    check_alpha(diana_config(alpha=0.25), 3.0)
    with pytest.raises(InvalidInputError):
        check_alpha(diana_config(alpha=0.5), 2.0)


def test_default_step_sizes():
    problem = diagonal_problem(1.0, 0.1)

    diana = default_hyperparams(MethodName.DIANA, Regime.STRONGLY_CONVEX, problem, 0.0)
    assert diana.gamma == pytest.approx(2.0 / 1.1)
    assert diana.alpha == 1.0

    vr = default_hyperparams(MethodName.VR_DIANA, Regime.STRONGLY_CONVEX, problem, 0.0)
    assert vr.gamma == pytest.approx(1.0 / 37.0)

    nonconvex = default_hyperparams(MethodName.VR_DIANA, Regime.NONCONVEX, problem, 0.0, m=8)
    assert nonconvex.gamma == pytest.approx(1.0 / 50.0)

    assert default_hyperparams(MethodName.DIANA, Regime.STRONGLY_CONVEX, problem, 3.0).alpha == 0.25


def test_svrg_defaults_use_epoch_weights():
    problem = diagonal_problem(1.0, 0.5)

    config = default_hyperparams(MethodName.SVRG_DIANA, Regime.STRONGLY_CONVEX, problem, 1.0)

    assert config.l == len(config.p_weights)
    assert sum(config.p_weights) == pytest.approx(1.0)
    assert config.p_weights[-1] == max(config.p_weights)

    convex = default_hyperparams(MethodName.SVRG_DIANA, Regime.CONVEX, problem, 1.0)
    assert convex.l == problem.m


def test_default_step_size_regime_errors():
    problem = diagonal_problem(1.0, 0.0)

    with pytest.raises(RegimeError):
        default_hyperparams(MethodName.DIANA, Regime.CONVEX, diagonal_problem(1.0, 1.0), 0.0)
    with pytest.raises(RegimeError):
        default_hyperparams(MethodName.VR_DIANA, Regime.STRONGLY_CONVEX, problem, 0.0)
    assert default_hyperparams(MethodName.VR_DIANA, Regime.CONVEX, problem, 0.0).gamma > 0


def test_epoch_weights_favour_the_end():
    weights = svrg_epoch_weights(0.1, 5)

    assert sum(weights) == pytest.approx(1.0)
    assert weights == sorted(weights)
    assert weights[-1] / weights[-2] == pytest.approx(1.0 / 0.9)


@pytest.mark.slow
@pytest.mark.parametrize(
    "method, config",
    [
        (diana_round, diana_config(alpha=0.1, gamma=0.05, oracle=DianaOracle.UNIFORM1)),
        (vr_diana_round, MethodConfig(method=MethodName.VR_DIANA, variant=VrVariant.SAGA, alpha=0.1, gamma=0.05)),
        (vr_diana_round, MethodConfig(method=MethodName.VR_DIANA, variant=VrVariant.LSVRG, alpha=0.1, gamma=0.05)),
        (svrg_diana_round, MethodConfig(method=MethodName.SVRG_DIANA, alpha=0.1, gamma=0.05, l=4, p_weights=[0.25] * 4)),
    ],
    ids=["diana", "saga", "lsvrg", "svrg"],
)
def test_dithered_aggregate_is_unbiased(small_logistic, method, config):
    draws = 10_000
    # five rounds in: shifts, tables and anchors are all off their start values, k is not an epoch boundary
    master, workers, _ = run_rounds(method, small_logistic, DITHER, config, 5)

    aggregates = np.stack([
        method(master, workers, small_logistic, DITHER, config, RandomStreams(seed))[2].aggregate
        for seed in range(100, 100 + draws)
    ])

    mean = aggregates.mean(axis=0)
    se = aggregates.std(axis=0, ddof=1) / np.sqrt(draws)
    gradient = small_logistic.full_gradient(master.x)
    assert np.all(np.abs(mean - gradient) <= 4.0 * se + 1e-12)
