import pytest

from qdiana.__main__ import main
from qdiana.commands import get_all_commands

HEADER = "k,f_gap,dist_sq,lyapunov,H,D,grad_norm_sq,bits_up_cum,bits_down_cum,wall_ms"

TINY = {
    "problem": {"kind": "quadratic", "d": 4, "n": 2, "m": 3, "seed": 1},
    "method": {"name": "diana", "oracle": "full_grad"},
    "quantizer": {"scheme": "dither", "p": 2, "s": 1},
    "run": {"iters": 5, "seed": 7},
}


def test_commands_are_discovered():
    assert [command.NAME for command in get_all_commands()] == ["plot", "run", "sweep", "verify"]


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "verify" in capsys.readouterr().out


def test_missing_command_is_a_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_option_is_a_usage_error():
    assert main(["run", "--no-such-flag"]) == 2


def test_missing_config_file(capsys, tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    assert "config file not found" in capsys.readouterr().err


def test_run_writes_trace_to_stdout(capsys, tiny_config_path):
    assert main(["run", str(tiny_config_path)]) == 0

    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == HEADER
    assert len(lines) == 7
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2", "3", "4", "5"]


def test_run_output_is_reproducible(capsys, write_config):
    path = write_config(TINY)

    main(["run", str(path)])
    first = capsys.readouterr().out
    main(["run", str(path)])

    assert capsys.readouterr().out == first


def test_unknown_key_reports_its_path(capsys, write_config):
    path = write_config({**TINY, "problem": {**TINY["problem"], "bogus": 1}})

    assert main(["run", str(path)]) == 2
    assert "problem.bogus" in capsys.readouterr().err


def test_invalid_value_reports_its_path(capsys, write_config):
    path = write_config({**TINY, "quantizer": {"scheme": "dither", "s": 0}})

    assert main(["run", str(path)]) == 2
    assert "quantizer.s" in capsys.readouterr().err


def test_unreadable_dataset_is_a_config_error(capsys, tmp_path, write_config):
    missing = tmp_path / "absent.svm"
    path = write_config({**TINY, "problem": {"source": "libsvm", "path": str(missing), "n": 2}})

    assert main(["run", str(path)]) == 2
    assert "problem.path" in capsys.readouterr().err


def test_run_output_file_and_plot(capsys, tmp_path, write_config):
    trace = tmp_path / "trace.csv"
    svg = tmp_path / "plot.svg"

    assert main(["run", str(write_config(TINY)), "--output", str(trace)]) == 0
    assert capsys.readouterr().out.strip() == str(trace)
    assert trace.read_text(encoding="utf-8").startswith(HEADER)

    assert main(["plot", str(trace), "--output", str(svg)]) == 0
    assert svg.read_text(encoding="utf-8").startswith("<svg")


def test_plot_of_missing_trace_fails(capsys, tmp_path):
    assert main(["plot", str(tmp_path / "nothing.csv"), "--output", str(tmp_path / "p.svg")]) == 1
    assert "not found" in capsys.readouterr().err


def test_divergent_run_keeps_partial_trace(capsys, tmp_path, write_config):
    trace = tmp_path / "diverged.csv"
    path = write_config({**TINY, "method": {"name": "diana", "gamma": 1e6}, "run": {"iters": 500}})

    assert main(["run", str(path), "-o", str(trace)]) == 1
    assert "error: iterate norm exceeded" in capsys.readouterr().err
    assert trace.read_text(encoding="utf-8").startswith(HEADER)


def test_sweep_writes_summary(capsys, tmp_path, write_config):
    path = write_config({"base": TINY, "grid": {"alpha": [0.1, 0.2], "s": [1, 2]}}, "sweep.json")

    assert main(["sweep", str(path), "--output-dir", str(tmp_path / "cells"), "--jobs", "2"]) == 0

    summary = tmp_path / "cells" / "summary.csv"
    assert capsys.readouterr().out.strip() == str(summary)
    rows = summary.read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("alpha,gamma,block_size,s,status")
    assert len(rows) == 5


def test_verify_single_suite(capsys):
    assert main(["verify", "--quick", "--suite", "enumeration"]) == 0

    out = capsys.readouterr().out
    assert out.startswith("PASS")
    assert "FAIL" not in out


def test_verify_unknown_suite(capsys):
    assert main(["verify", "--suite", "nope"]) == 1
    assert "no verification suite" in capsys.readouterr().err


@pytest.mark.parametrize("level", ["debug", "WARNING"])
def test_log_level_option(level, tiny_config_path, capsys):
    assert main(["--log-level", level, "run", str(tiny_config_path)]) == 0
