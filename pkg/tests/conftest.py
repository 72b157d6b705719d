import time
from contextlib import contextmanager

import pytest


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line[1])


class Record:
    detail = ""


@pytest.fixture
def criterion(request):
    """``with criterion(n, title, budget_s) as rec:`` logs one PASS/FAIL line."""
    lines = request.config._acceptance_lines

    @contextmanager
    def run(number, title, budget):
        rec = Record()
        t0 = time.perf_counter()
        status, reason = "PASS", ""
        try:
            yield rec
        except BaseException as e:
            status, reason = "FAIL", str(e).splitlines()[0] if str(e) else type(e).__name__
            raise
        finally:
            elapsed = time.perf_counter() - t0
            if status == "PASS" and elapsed > budget:
                status, reason = "FAIL", f"runtime {elapsed:.1f}s over {budget}s budget"
            text = f"[{status}] {number:2d}. {title}: {rec.detail}"
            if reason and reason not in rec.detail:
                text += f" ({reason})"
            text += f" [{elapsed:.2f}s]"
            lines.append((number, text))
            print(text)
        assert elapsed <= budget, f"runtime {elapsed:.1f}s over {budget}s budget"

    return run
