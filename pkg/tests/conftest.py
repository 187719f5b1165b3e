import time

import pytest

ACCEPTANCE_LINES: list[str] = []


class Criterion:
    """Times one acceptance criterion and records a PASS/FAIL line."""

    def __init__(self, number: int, title: str, max_runtime_s: float | None = None):
        self.number, self.title, self.max_runtime_s = number, title, max_runtime_s

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        return False

    def finish(self, checks: dict[str, bool], detail: str) -> None:
        elapsed = time.perf_counter() - self.t0
        if self.max_runtime_s is not None:
            checks = {**checks, f"runtime < {self.max_runtime_s:g} s": elapsed < self.max_runtime_s}
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"{'PASS' if ok else 'FAIL'}  [{self.number:2d}] {self.title}: {detail} ({elapsed:.2f} s)"
        if failed:
            line += "  -- failed: " + "; ".join(failed)
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
