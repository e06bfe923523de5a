import numpy as np
import pytest

from spreduce.lti import StateSpaceModel


def random_stable(rng, n, shift=None):
    """Random dense Hurwitz matrix (spectrum shifted left of -0.3)."""
    A = rng.standard_normal((n, n))
    ev = np.linalg.eigvals(A)
    return A - (np.max(ev.real) + (0.3 if shift is None else shift)) * np.eye(n)


def random_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def random_model(rng, n, m=2, observed=(0,), dense_C=False):
    """Stable model whose outputs observe the given states through unit rows."""
    A = random_stable(rng, n)
    B = rng.standard_normal((n, m))
    if dense_C:
        C = rng.standard_normal((len(observed), n))
    else:
        C = np.zeros((len(observed), n))
        C[np.arange(len(observed)), list(observed)] = 1.0
    return StateSpaceModel(A, B, C)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scalar_pair():
    """Full x' = -x + u, y = x and the reduced 1-state model with rate 2."""
    from spreduce.lti import ReducedModel

    full = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]])
    reduced = ReducedModel([[-2.0]], [[1.0]], [[1.0]], [[0.0]])
    return full, reduced


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts, one line per criterion, after the run."""
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[number])
