import os
import sys

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

hypothesis.settings.register_profile("default", max_examples=30, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=300, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: runs for more than a few seconds")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = []


class CriterionReport:
    """Collects sub-checks of one acceptance criterion and prints a verdict."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def passed(self):
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def line(self):
        failed = [n for n, ok, _ in self.checks if not ok]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.number}: {self.title}{tail}"

    def finish(self):
        _CRITERIA.append(self)
        print(self.line())
        for name, ok, detail in self.checks:
            print(f"    {'ok ' if ok else 'BAD'} {name} {detail}")
        assert self.passed, self.line()


@pytest.fixture
def criterion():
    return CriterionReport


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for rep in sorted(_CRITERIA, key=lambda r: r.number):
        terminalreporter.write_line(rep.line())
        for name, ok, detail in rep.checks:
            terminalreporter.write_line(f"    {'ok ' if ok else 'BAD'} {name} {detail}")
