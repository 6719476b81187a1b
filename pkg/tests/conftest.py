import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent / "oracles"))

from ramanmirror.config import AtomicConfig  # noqa: E402
from ramanmirror.presets import paper_config  # noqa: E402

TWO_PI = 2.0 * math.pi
GAMMA = 3.4e6
RATE_NAMES = ("gamma_a", "gamma_b", "gamma_c", "gamma_d", "gamma_ab", "gamma_ac",
              "gamma_ad", "gamma_bc", "gamma_bd", "gamma_cd")


@pytest.fixture(scope="session")
def fig2_cfg():
    return paper_config()


@pytest.fixture(scope="session")
def fig4_cfg():
    return paper_config(g=TWO_PI * 4e6, Omega=15.0, n=50.0, N=1.0, power=0.02e-9)


def random_atomic(rng, eta=None, **fixed):
    """Log-uniform decay rates over [0.1, 10] gamma and broad drive/detuning ranges."""
    rates = {k: GAMMA * 10 ** rng.uniform(-1, 1) for k in RATE_NAMES}
    kw = dict(g1=TWO_PI * 3e6 * 10 ** rng.uniform(-1, 0.5), g2=TWO_PI * 3e6 * 10 ** rng.uniform(-1, 0.5),
              Omega=GAMMA * 10 ** rng.uniform(-1, 1.5), Omega_p=GAMMA * 10 ** rng.uniform(-2, 1),
              Delta_1=GAMMA * rng.uniform(-2, 2), Delta_2=GAMMA * rng.uniform(-2, 2),
              Delta_c=GAMMA * rng.uniform(-2, 2), r_a=1.6e6 * 10 ** rng.uniform(-1, 1),
              eta=rng.uniform(-1, 1) if eta is None else eta)
    kw.update(rates)
    kw.update(fixed)
    return AtomicConfig(**kw)


# one PASS/FAIL line per acceptance criterion, shown after the test report
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
