from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"
DATA = Path(__file__).parent / "data"


@pytest.fixture
def golden_greetings_log() -> str:
    return (GOLDEN / "greetings_seed7.jsonl").read_text(encoding="utf-8")


@pytest.fixture
def data_dir() -> Path:
    return DATA


_ACCEPTANCE: list[str] = []


class Recorder:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __call__(self, number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)


@pytest.fixture
def record() -> Recorder:
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
