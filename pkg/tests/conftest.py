import numpy as np
import pytest

from pilotgain import PilotCodebook


def random_unit_columns(rng, q, k, real=False):
    a = rng.standard_normal((q, k))
    if not real:
        a = a + 1j * rng.standard_normal((q, k))
    return a / np.linalg.norm(a, axis=0)


def etf_gram(q, k):
    """``c_d * ones + (1 - c_d) * I``: squared Gram of an equiangular frame."""
    c_d = (k - q) / (q * (k - 1))
    return c_d * np.ones((k, k)) + (1 - c_d) * np.eye(k)


def sic_q2():
    """Four lines in C^2 with pairwise |<p_i, p_j>|^2 = 1/3 (the SIC-POVM of a qubit).

    Bloch vectors on a regular tetrahedron; each line is the +1 eigenvector
    of ``n . sigma``.
    """
    ns = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
    cols = []
    for x, y, z in ns:
        theta = np.arccos(z)
        phi = np.arctan2(y, x)
        cols.append([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    return np.array(cols).T


def hesse_sic_q3():
    """Nine lines in C^3 with pairwise |<p_i, p_j>|^2 = 1/4 (Weyl-Heisenberg orbit)."""
    w = np.exp(2j * np.pi / 3)
    fid = np.array([0, 1, -1]) / np.sqrt(2)
    x = np.roll(np.eye(3), 1, axis=0)
    z = np.diag([1, w, w * w])
    cols = []
    for a in range(3):
        for b in range(3):
            cols.append(np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) @ fid)
    return np.array(cols).T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sic3():
    return PilotCodebook.from_matrix(hesse_sic_q3(), normalize=True)


# Acceptance criteria append ("PASS"/"FAIL", line) here; printed after the run.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].lstrip("C").rstrip(":"))):
        terminalreporter.write_line(line)
