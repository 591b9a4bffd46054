import pytest

from _report import RESULTS


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail, seconds = RESULTS[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if ok else 'FAIL'} ({seconds:.2f} s) {detail}")


@pytest.fixture(scope="session")
def cfg1_scene():
    from enclosure.scene import cfg1
    return cfg1()


@pytest.fixture(scope="session")
def cfg1_pair(cfg1_scene):
    from enclosure.stationary import find_pairs
    return find_pairs(cfg1_scene)[0]
