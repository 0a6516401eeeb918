import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def e2e_dir():
    return FIXTURES / "e2e"


@pytest.fixture
def criterion(request):
    """Time a block, record one PASS/FAIL line for it and fail on overrun."""
    import contextlib
    import time

    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    @contextlib.contextmanager
    def run(label, limit):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            if type(exc).__name__ == "Skipped":
                raise
            line = f"FAIL  {label}  ({elapsed:.2f}s): {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}"
            lines.append(line)
            print(line)
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed < limit
        line = f"{'PASS' if ok else 'FAIL'}  {label}  ({elapsed:.2f}s, limit {limit:g}s)"
        lines.append(line)
        print(line)
        assert ok, f"{label} took {elapsed:.2f}s, limit {limit:g}s"

    def skip(label, reason):
        line = f"SKIP  {label}: {reason}"
        lines.append(line)
        print(line)
        pytest.skip(reason)

    run.skip = skip
    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
