import pytest

_CRITERIA: dict[int, str] = {}


class Criterion:
    """Records a pass/fail line for an acceptance criterion, then asserts it."""

    def __call__(self, number: int, ok: bool, detail: str) -> None:
        _CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail


@pytest.fixture
def criterion():
    return Criterion()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
