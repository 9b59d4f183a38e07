import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from coldreact.frames import mass_factors
from coldreact.propagator import Waveguide
from coldreact.reference import fh2_li7, fh2_surface

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "repo", max_examples=200, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

ANGSTROM = 1e-10


@pytest.fixture(scope="session")
def ref():
    return fh2_li7()


@pytest.fixture(scope="session")
def surface():
    return fh2_surface()


@pytest.fixture(scope="session")
def factors(ref):
    return mass_factors(ref.masses)


@pytest.fixture(scope="session")
def waveguide(ref):
    return Waveguide.from_values(ref.surface, ref.masses, ref.m_tilde, ref.l)


# -- acceptance criteria report ---------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """``with criterion(3, "design report"):`` records one PASS/FAIL line."""
    from contextlib import contextmanager

    @contextmanager
    def check(number, title):
        notes = []
        try:
            yield notes
        except BaseException:
            verdict = "FAIL"
            raise
        else:
            verdict = "PASS"
        finally:
            line = f"{verdict}  criterion {number:>2}: {title}"
            if notes:
                line += "  [" + "; ".join(notes) + "]"
            print(line)
            request.config.stash[_ACCEPTANCE].append((number, line))

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
