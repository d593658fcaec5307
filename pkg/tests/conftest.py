import pytest
from hypothesis import settings

from inlslab.ground_state import solve_ground_state

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def gs_cubic():
    """Ground state for (b, p) = (0, 3)."""
    return solve_ground_state(0.0, 3.0)


@pytest.fixture(scope="session")
def gs_half():
    """Ground state for (b, p) = (0.5, 3)."""
    return solve_ground_state(0.5, 3.0)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture(scope="session")
def acceptance(pytestconfig):
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict for asserting."""
    lines = pytestconfig.stash[_ACCEPTANCE_KEY]

    def record(tag: str, ok: bool, detail: str, notes=()) -> bool:
        line = f"{tag:<4} {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        lines.extend(f"       note: {n}" for n in notes)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
