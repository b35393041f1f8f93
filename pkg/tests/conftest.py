"""Independent oracles shared across test modules."""

import numpy as np
import pytest


def gauss_cheb2(n):
    """Nodes and weights for int_{-1}^{1} sqrt(1-x^2) g(x) dx."""
    t = np.arange(1, n + 1) * np.pi / (n + 1)
    return np.cos(t), np.pi / (n + 1) * np.sin(t) ** 2


def _dsinc(t):
    t = np.asarray(t, float)
    out = np.empty_like(t)
    small = np.abs(t) < 1e-4
    ts = t[~small]
    out[~small] = (np.cos(np.pi * ts) * np.pi * ts - np.sin(np.pi * ts)) / (np.pi * ts**2)
    out[small] = -(np.pi**2) * t[small] / 3
    return out


def nystrom_qfi(B, l, n=160, pair=False, tol=1e-14):
    """QFI from a pupil-coordinate discretisation of the density operator.

    The state is written directly in the one-dimensional pupil variable
    with the sqrt(1 - x^2) marginal weight; the band average becomes a
    sinc factor. No PSWFs or Fourier-domain kernels are involved.
    """
    x, w = gauss_cheb2(n)
    w = w * 2 / np.pi
    y = x[:, None] - x[None, :]
    if pair:
        ph = np.cos(2 * np.pi * l * y)
        dph = -2 * np.pi * y * np.sin(2 * np.pi * l * y)
    else:
        ph = np.exp(-2j * np.pi * l * y)
        dph = -2j * np.pi * y * ph
    s = np.sinc(B * l * y)
    R = ph * s
    dR = dph * s + ph * B * y * _dsinc(B * l * y)
    sw = np.sqrt(w)
    R = sw[:, None] * R * sw[None, :]
    dR = sw[:, None] * dR * sw[None, :]
    lam, V = np.linalg.eigh(R)
    D = V.conj().T @ dR @ V
    S = lam[:, None] + lam[None, :]
    m = S > tol
    return float((2 * np.abs(D[m]) ** 2 / S[m]).sum().real), lam[::-1]


@pytest.fixture(scope="session")
def oracle():
    return nystrom_qfi


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
