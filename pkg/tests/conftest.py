import numpy as np
import pytest

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_complex(rng, n, m=None):
    m = n if m is None else m
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


def random_psd(rng, n, rank=None):
    G = random_complex(rng, rank or n, n)
    return G.conj().T @ G


def random_unit_diag_psd(rng, n, rank=None):
    P = random_psd(rng, n, rank)
    d = 1 / np.sqrt(np.real(np.diag(P)))
    return P * np.outer(d, d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import CRITERIA, NOTES, RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for check in CRITERIA:
        note = NOTES.get(check.label)
        terminalreporter.write_line(
            f"{RESULTS.get(check.label, 'SKIP'):4s}  {check.label}" + (f"  [{note}]" if note else "")
        )
