import dataclasses
import sys
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tesplan.fixtures import load_fixture  # noqa: E402
from tesplan.pipeline import run_plan  # noqa: E402

CRITERIA = pytest.StashKey[dict]()


@lru_cache(maxsize=None)
def cached_plan(name, solver="highs", k=None, **changes):
    """One solved scenario per argument set, shared across test modules."""
    data = load_fixture(name)
    cfg = dataclasses.replace(data.scenario, solver=solver, **changes)
    return run_plan(data, cfg, k=k)


@pytest.fixture(scope="session")
def toy3_plan():
    return cached_plan("toy3", k=1)


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(CRITERIA, {})

    @contextmanager
    def record(number, label):
        notes = []
        try:
            yield notes
        except BaseException as exc:
            lines[number] = f"criterion {number:2d}  FAIL  {label}: {type(exc).__name__} {exc}".splitlines()[0]
            print(lines[number])
            raise
        detail = f" ({'; '.join(notes)})" if notes else ""
        lines[number] = f"criterion {number:2d}  PASS  {label}{detail}"
        print(lines[number])

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA, {})
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
