import numpy as np
import pytest
from hypothesis import settings

from hotspot import core, features, synthgen

settings.register_profile("hotspot", max_examples=60, deadline=None)
settings.load_profile("hotspot")


def no_missing():
    return synthgen.MissingnessConfig(0.0, 0.0, 0.0, 6.0, 0.0)


@pytest.fixture(scope="session")
def clean_set():
    """Noisy but complete 60-sector dataset with its scores and tensor."""
    cfg = synthgen.GeneratorConfig(n_sectors=60, seed=123, missingness=no_missing())
    data, truth, scoring = synthgen.generate_dataset(cfg)
    scores = core.compute_scores(data, scoring)
    x = features.assemble_input_tensor(data, scores)
    return data, truth, scoring, scores, x


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion and assert on it."""

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
