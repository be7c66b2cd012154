import numpy as np
import pytest

from niqs import DirectD, InteractionModel, SpaceLayout, assemble_D, find_witness, kernel_decomposition
from niqs.catalog import EXAMPLES
from niqs.modelfile import dump_model

from oracles import mz_D

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture
def accept():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def mz_model():
    return InteractionModel(SpaceLayout(2, 2, 2), DirectD(mz_D()))


@pytest.fixture
def mz(mz_model):
    d = assemble_D(mz_model)
    w = find_witness(d)[0]
    return d, w, kernel_decomposition(d, w)


@pytest.fixture
def example_files(tmp_path):
    paths = {}
    for name, make in EXAMPLES.items():
        p = tmp_path / f"{name}.json"
        p.write_text(dump_model(make()))
        paths[name] = p
    return paths
