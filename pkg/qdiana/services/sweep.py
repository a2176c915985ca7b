"""Grid sweeps over α, γ, block size and dithering levels on one shared problem."""
import csv
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

from qdiana.exceptions import DivergenceError, QDianaError
from qdiana.models.run_config import RunConfig, SweepConfig
from qdiana.services.engine import build_problem, run_experiment, solve_reference
from qdiana.services.metrics import Optimum
from qdiana.services.problems import FiniteSumProblem
from qdiana.services.traces import format_value, write_csv
from qdiana.utils.enums import QuantizerScheme

logger = logging.getLogger("Sweep")

GRID_KEYS = ("alpha", "gamma", "block_size", "s")
SUMMARY_COLUMNS = GRID_KEYS + ("status", "iters", "f_gap", "dist_sq", "bits_up", "bits_down", "path")


@dataclass(frozen=True)
class SweepCell:
    index: int
    values: Dict[str, Union[int, float]]
    config: RunConfig

    @property
    def label(self) -> str:
        parts = [f"{key}={value:g}" for key, value in self.values.items()]
        return "_".join(parts) or "base"


def cell_config(base: RunConfig, values: Dict[str, Union[int, float]]) -> RunConfig:
    method_updates = {key: values[key] for key in ("alpha", "gamma") if key in values}
    quantizer_updates: Dict[str, object] = {}
    if "block_size" in values:
        quantizer_updates.update(scheme=QuantizerScheme.BLOCK_DITHER, block_size=values["block_size"], block_sizes=None)
    if "s" in values:
        quantizer_updates["s"] = values["s"]

    document = base.model_dump()
    document["method"].update(method_updates)
    document["quantizer"].update(quantizer_updates)
    return RunConfig.model_validate(document)


def expand(sweep: SweepConfig) -> List[SweepCell]:
    axes = [(key, getattr(sweep.grid, key)) for key in GRID_KEYS if getattr(sweep.grid, key)]
    cells = []
    for index, combination in enumerate(itertools.product(*(values for _, values in axes))):
        values = {key: value for (key, _), value in zip(axes, combination)}
        cells.append(SweepCell(index, values, cell_config(sweep.base, values)))
    return cells


def _run_cell(
        cell: SweepCell,
        output_dir: Path,
        problem: FiniteSumProblem,
        optimum: Optimum
) -> Dict[str, object]:
    path = output_dir / f"cell{cell.index:03d}_{cell.label}.csv"
    row: Dict[str, object] = {key: cell.values.get(key, "") for key in GRID_KEYS}
    try:
        trace = run_experiment(cell.config, problem, optimum)
        status = "ok"
    except DivergenceError as exc:
        logger.warning(f"Cell {cell.label} diverged: {exc.detail}")
        trace = exc.trace
        status = "diverged"
    except QDianaError as exc:
        logger.warning(f"Cell {cell.label} is invalid: {exc.detail}")
        trace = None
        status = "invalid"

    if trace is None or not trace.records:
        row.update(status=status, iters=0, f_gap=math.nan, dist_sq=math.nan, bits_up=0, bits_down=0, path="")
        return row

    write_csv(trace, path)
    last = trace.records[-1]
    row.update(
        status=status,
        iters=last.k,
        f_gap=last.f_gap,
        dist_sq=last.dist_sq,
        bits_up=last.bits_up_cum,
        bits_down=last.bits_down_cum,
        path=str(path),
    )
    return row


def run_sweep(sweep: SweepConfig, output_dir: Optional[Union[str, Path]] = None, jobs: int = 1) -> Path:
    """Runs every grid cell against one problem and one reference solution; returns the summary path."""
    directory = Path(output_dir or sweep.output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    cells = expand(sweep)

    problem = build_problem(sweep.base.problem)
    x_star, f_star = solve_reference(problem, sweep.base.reference.tol, sweep.base.reference.max_iters)
    optimum = Optimum.at(problem, x_star, f_star)
    logger.info(f"Sweeping {len(cells)} cells with {jobs} job(s) into {directory}")

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as executor:
        rows = list(executor.map(lambda cell: _run_cell(cell, directory, problem, optimum), cells))

    summary = directory / "summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as stream:
        writer = csv.DictWriter(stream, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_value(value) if isinstance(value, float) else value for key, value in row.items()})
    return summary
