import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_x_state(rng):
    """Random valid X state: two independent 2x2 PSD blocks on {ee,gg} and {eg,ge}."""
    outer = random_density(rng, 2)
    inner = random_density(rng, 2)
    w = rng.uniform()
    rho = np.zeros((4, 4), dtype=complex)
    rho[np.ix_([0, 3], [0, 3])] = w * outer
    rho[np.ix_([1, 2], [1, 2])] = (1 - w) * inner
    return rho


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "PASS" if report.passed else "FAIL"
    line = f"[{status}] {number:>2}. {title} ({report.duration:.1f} s)"
    ACCEPTANCE_LINES.append(line + (f": {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
