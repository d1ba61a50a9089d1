import numpy as np
import pytest

from heatback.core import ProblemConfig
from heatback.experiment import Instance, TruthProfile
from heatback.operator import assemble_operator


@pytest.fixture(scope="session")
def standard_cfg():
    return ProblemConfig(x0=0.5, t0=1.0, m=800, n_modes=200, r1=1.0)


@pytest.fixture(scope="session")
def standard_instance(standard_cfg):
    return Instance(standard_cfg, TruthProfile("poly_bump"))


@pytest.fixture(scope="session")
def small_cfg():
    return ProblemConfig(x0=0.5, t0=1.0, m=40, n_modes=200, r1=1.0)


@pytest.fixture(scope="session")
def small_op(small_cfg):
    return assemble_operator(small_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


class Criterion:
    """Collects the checks of one acceptance criterion and logs a verdict line."""

    def __init__(self, log, number, title, tolerance):
        self.log, self.number, self.title, self.tolerance = log, number, title, tolerance
        self.failures, self.notes, self.done = [], [], False

    def check(self, ok, detail):
        (self.notes if ok else self.failures).append(detail)
        return ok

    def note(self, detail):
        self.notes.append(detail)

    def line(self, status):
        detail = "; ".join(self.failures or self.notes)
        return f"[{status}] criterion {self.number:>2}: {self.title} (tol: {self.tolerance}) :: {detail}"

    def finish(self):
        self.done = True
        status = "FAIL" if self.failures else "PASS"
        text = self.line(status)
        self.log.append(text)
        print(text)
        assert not self.failures, text


@pytest.fixture
def criterion(request):
    log = request.config.stash.setdefault(_ACCEPTANCE, [])
    made = []

    def make(number, title, tolerance):
        c = Criterion(log, number, title, tolerance)
        made.append(c)
        return c

    yield make
    for c in made:
        if not c.done:
            c.failures.append("raised before completing")
            log.append(c.line("FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for text in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(text)
