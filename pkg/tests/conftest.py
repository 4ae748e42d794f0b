import pytest

from edfcap.bench import gen_forest_scene
from edfcap.field import AnalyticField, Scene
from edfcap.geometry import Box

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(criterion, passed, detail)``; the terminal summary prints them."""

    def record(key: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[key] = (bool(passed), detail)
        print(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[1])):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def unit_bounds():
    return Box((0, 0, 0), (1, 1, 1))


@pytest.fixture(scope="session")
def empty_field():
    return AnalyticField(Scene((), Box((-50, -50, -50), (50, 50, 50))))


@pytest.fixture(scope="session")
def forest_scene():
    return gen_forest_scene(7)


@pytest.fixture(scope="session")
def forest_analytic(forest_scene):
    return AnalyticField(forest_scene)
