import json
import logging
from pathlib import Path

import pytest

from config import settings
from qdiana.services.dataio import synth_problem
from qdiana.services.engine import solve_reference
from qdiana.services.metrics import Optimum
from qdiana.utils.enums import ProblemKind

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def small_logistic():
    return synth_problem(ProblemKind.LOGISTIC, 5, 3, 6, seed=3)


@pytest.fixture(scope="session")
def small_optimum(small_logistic):
    x_star, f_star = solve_reference(small_logistic)
    return Optimum.at(small_logistic, x_star, f_star)


@pytest.fixture(scope="session")
def small_quadratic():
    return synth_problem(ProblemKind.QUADRATIC, 4, 2, 3, lambda2=0.0, seed=5, condition=4.0)


@pytest.fixture
def tiny_config_path():
    return FIXTURES / "tiny.json"


@pytest.fixture
def write_config(tmp_path):
    def write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write


@pytest.fixture(autouse=True)
def restore_logging():
    level = settings.runtime.log_level
    root = logging.getLogger()
    handlers, root_level = root.handlers[:], root.level
    yield
    settings.runtime.log_level = level
    root.handlers[:] = handlers
    root.setLevel(root_level)
