import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, tuple[str, str, str]] = {}


class _Criterion:
    detail = ""


@pytest.fixture
def criterion():
    """``with criterion(3, "title", budget_s) as c:`` records PASS/FAIL for the
    acceptance summary; the block fails if it exceeds its runtime budget."""

    @contextmanager
    def run(number: int, title: str, budget_s: float):
        c = _Criterion()
        start = time.perf_counter()
        try:
            yield c
            elapsed = time.perf_counter() - start
            assert elapsed < budget_s, f"runtime {elapsed:.2f}s exceeds budget {budget_s}s"
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            _RESULTS[number] = ("FAIL", title, f"{elapsed:.2f}s; {type(exc).__name__}: {exc}".splitlines()[0])
            raise
        _RESULTS[number] = ("PASS", title, f"{elapsed:.2f}s (< {budget_s:g}s); {c.detail}")

    return run


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail}")
