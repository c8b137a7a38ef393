import numpy as np
import pytest

from lsme.generators import LAPLACE, LOGISTIC, NORMAL, student_t

FAMILIES = [NORMAL, student_t(5), LOGISTIC, LAPLACE]
FAMILY_IDS = [str(f) for f in FAMILIES]


@pytest.fixture(params=FAMILIES, ids=FAMILY_IDS)
def family(request):
    return request.param


def random_spd(rng, n, ridge=0.3):
    a = rng.normal(size=(n, n))
    return a @ a.T / n + ridge * np.eye(n)


# Lines recorded by the acceptance suite; echoed after the run so they appear
# in the plain ``pytest -v`` output even with capture enabled.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
