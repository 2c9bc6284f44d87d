import pytest

from harag.simulator import gen_corpus

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Log one acceptance line, shown in the terminal summary, then assert it."""

    def _record(name: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        assert ok, f"{name}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus():
    return gen_corpus(6, tokens_per_chunk=32, width=64, seed=7)
