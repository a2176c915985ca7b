import math

import numpy as np
import pytest

from qdiana.exceptions import DivergenceError, InvalidInputError
from qdiana.models.run_config import MethodSection, RunConfig
from qdiana.services.engine import build_problem, resolve_method, run_experiment
from qdiana.services.traces import trace_csv
from qdiana.utils.enums import MethodName, Regime


def config(name="diana", iters=10, **sections):
    document = {
        "problem": {"kind": "quadratic", "d": 4, "n": 2, "m": 3, "seed": 1},
        "method": {"name": name},
        "quantizer": {"scheme": "dither", "p": 2, "s": 1},
        "run": {"iters": iters, "seed": 9},
    }
    for key, values in sections.items():
        document.setdefault(key, {}).update(values)
    return RunConfig.model_validate(document)


def test_trace_has_one_record_per_round():
    trace = run_experiment(config(iters=10))

    assert [record.k for record in trace.records] == list(range(11))
    assert all(record.wall_ms == 0.0 for record in trace.records)
    assert all(record.f_gap >= -1e-10 for record in trace.records)


def test_cadence_keeps_the_final_round():
    trace = run_experiment(config(iters=10, run={"cadence": 4}))

    assert [record.k for record in trace.records] == [0, 4, 8, 10]


@pytest.mark.parametrize("method", [name.value for name in MethodName])
def test_runs_are_reproducible_across_threads(method):
    serial = trace_csv(run_experiment(config(method)))

    assert trace_csv(run_experiment(config(method))) == serial
    assert trace_csv(run_experiment(config(method, run={"threads": 3}))) == serial


def test_ledger_totals():
    trace = run_experiment(config("vr_diana", iters=12))

    replayed = sum(sum(costs) for costs in trace.round_costs)
    assert replayed == trace.uplink_bits == trace.records[-1].bits_up_cum
    assert trace.downlink_bits == 12 * (4 * 64 + 1)
    assert len(trace.round_costs) == 12
    assert all(len(costs) == 2 for costs in trace.round_costs)
    assert np.all(np.diff(trace.column("bits_up_cum")) > 0)


def test_table_error_only_for_vr_diana():
    diana = run_experiment(config("diana", iters=2))
    vr = run_experiment(config("vr_diana", iters=2, method={"variant": "saga"}))
    svrg = run_experiment(config("svrg_diana", iters=2))

    assert all(math.isnan(record.D) for record in diana.records)
    assert all(math.isfinite(record.D) for record in vr.records)
    assert all(math.isnan(record.D) for record in svrg.records)


def test_sampled_diana_reports_sigma():
    assert run_experiment(config("diana", iters=1)).sigma_sq > 0.0
    assert math.isnan(run_experiment(config("diana", iters=1, method={"oracle": "full_grad"})).sigma_sq)


def test_huge_step_diverges_with_partial_trace():
    with pytest.raises(DivergenceError) as caught:
        run_experiment(config(iters=500, method={"gamma": 1e6}))

    trace = caught.value.trace
    assert trace.records[0].k == 0
    assert not np.all(np.abs(trace.final_x) <= 1e300)
    rounds = len(trace.round_costs)
    assert rounds >= 1
    assert trace.uplink_bits == sum(sum(costs) for costs in trace.round_costs) > trace.records[-1].bits_up_cum
    assert trace.downlink_bits == rounds * 4 * 64


def test_outputs_are_written(tmp_path):
    csv_path = tmp_path / "out" / "trace.csv"
    binary_path = tmp_path / "trace.bin"

    trace = run_experiment(config(iters=3, output={"path": str(csv_path), "binary_path": str(binary_path)}))

    assert csv_path.read_text(encoding="utf-8") == trace_csv(trace)
    assert binary_path.stat().st_size > 0


def test_resolve_method_overrides():
    problem = build_problem(config().problem)

    explicit = resolve_method(MethodSection(name=MethodName.VR_DIANA, gamma=0.01), problem, 4.0)
    assert explicit.gamma == 0.01
    assert explicit.alpha == pytest.approx(0.2)

    automatic = resolve_method(MethodSection(name=MethodName.SVRG_DIANA, alpha=0.1, l=3), problem, 4.0)
    assert automatic.alpha == 0.1
    assert automatic.l == 3
    assert automatic.p_weights == pytest.approx([1.0 / 3.0] * 3)
    assert automatic.regime == Regime.STRONGLY_CONVEX

    with pytest.raises(InvalidInputError):
        resolve_method(MethodSection(name=MethodName.DIANA, alpha=0.5), problem, 4.0)


def test_gradient_shift_start_is_recorded():
    trace = run_experiment(config(iters=1, run={"init_shifts": "gradient"}))

    assert trace.records[0].H > 0.0
    assert trace.records[0].lyapunov >= trace.records[0].dist_sq
