import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, special

from qfi_bandlimit.errors import DomainError
from qfi_bandlimit.fisher import qfi_point
from qfi_bandlimit.zernike_cfi import cfi, mode_amplitude, mode_prob_derivatives, mode_probabilities

FOUR_PI2 = 4 * math.pi**2


def _pupil_oracle(B, l, phi, n_rho=60, n_theta=64, n_f=24):
    """P_1..P_4 by dense polar quadrature of the projected tilted plane wave."""
    r, wr = np.polynomial.legendre.leggauss(n_rho)
    r, wr = 0.5 * (r + 1), 0.5 * wr
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    wt = np.full(n_theta, 2 * np.pi / n_theta)
    R, T = np.meshgrid(r, th, indexing="ij")
    W = (wr[:, None] * wt[None, :]) * R
    modes = [
        np.ones_like(R),
        2 * R * np.cos(T),
        2 * R * np.sin(T),
        math.sqrt(3) * (2 * R**2 - 1),
    ]
    if B == 0:
        fs, wf = np.array([0.0]), np.array([1.0])
    else:
        fs, wf = np.polynomial.legendre.leggauss(n_f)
        fs, wf = 0.5 * B * fs, 0.5 * wf
    P = np.zeros(4)
    for f, w in zip(fs, wf):
        field = np.exp(-2j * np.pi * (1 + f) * l * R * np.cos(T - phi)) / math.sqrt(math.pi)
        for k, Z in enumerate(modes):
            a = np.sum(W * Z / math.sqrt(math.pi) * field)
            P[k] += w * abs(a) ** 2
    return P


@pytest.mark.parametrize("B,l,phi", [(0.1, 0.2, 0.0), (0.2, 1.0, 0.4), (0.05, 2.5, 1.2), (0.0, 0.7, 0.3)])
def test_probabilities_against_pupil_quadrature(B, l, phi):
    ours = mode_probabilities(B, l, phi).probs
    np.testing.assert_allclose(ours, _pupil_oracle(B, l, phi), rtol=1e-10, atol=1e-14)


def test_defocus_amplitude_against_expanded_bracket():
    x = np.linspace(2.0, 40.0, 200)
    j0, j1 = special.j0(x), special.j1(x)
    bracket = (
        j0**2 / x**4
        + j1**2 * (4 / x**6 - 1 / x**4 + 1 / (16 * x**2))
        + j0 * j1 * (1 / (2 * x**3) - 4 / x**5)
    )
    g, _ = mode_amplitude(4, x)
    np.testing.assert_allclose(g**2, bracket, rtol=1e-12, atol=1e-18)


def test_defocus_series_branch_is_continuous_and_accurate():
    x = np.array([0.1, 0.3, 0.4999999, 0.5000001, 1.0])
    g, _ = mode_amplitude(4, x)
    # (1/4) int_0^1 (1 - 2u^2) J0(xu) u du by quadrature
    u, w = np.polynomial.legendre.leggauss(40)
    u, w = 0.5 * (u + 1), 0.5 * w
    ref = np.array([0.25 * np.sum(w * (1 - 2 * u**2) * special.j0(xx * u) * u) for xx in x])
    np.testing.assert_allclose(g, ref, rtol=1e-12, atol=1e-15)
    # the quadrature oracle cancels at tiny x; the leading term is x^2 / 192
    tiny = np.array([1e-6, 1e-4])
    np.testing.assert_allclose(mode_amplitude(4, tiny)[0], tiny**2 / 192, rtol=1e-7)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_amplitude_derivatives(n):
    x = np.linspace(0.3, 30, 50)
    h = 1e-6 * x
    _, dg = mode_amplitude(n, x)
    fd = (mode_amplitude(n, x + h)[0] - mode_amplitude(n, x - h)[0]) / (2 * h)
    np.testing.assert_allclose(dg, fd, rtol=1e-6, atol=1e-11)


@pytest.mark.parametrize("B", [0.05, 0.1, 0.2])
def test_derivatives_against_finite_differences(B):
    for l in np.linspace(0.05, 2.0, 14):
        h = 1e-5 * l
        d = mode_prob_derivatives(mode_probabilities(B, l, 0.3))
        fd = (mode_probabilities(B, l + h, 0.3).probs - mode_probabilities(B, l - h, 0.3).probs) / (2 * h)
        # atol covers the difference-quotient rounding floor ~1e-16 / h near stationary points
        np.testing.assert_allclose(d, fd, rtol=1e-6, atol=1e-10)


def test_zero_bandwidth_derivatives_against_finite_differences():
    for l in (0.1, 0.7, 1.9):
        h = 1e-5 * l
        d = mode_probabilities(0.0, l).derivs
        fd = (mode_probabilities(0.0, l + h).probs - mode_probabilities(0.0, l - h).probs) / (2 * h)
        np.testing.assert_allclose(d, fd, rtol=1e-6, atol=1e-12)


def test_zero_bandwidth_closed_form():
    l = 0.8
    x = 2 * math.pi * l
    assert mode_probabilities(0.0, l).probs[0] == pytest.approx(4 * special.j1(x) ** 2 / x**2, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.01, 6.0), st.floats(-math.pi, math.pi))
def test_probability_invariants(B, l, phi):
    m = mode_probabilities(B, l, phi)
    m0 = mode_probabilities(B, l, 0.0)
    assert np.all(m.probs >= 0)
    assert m.probs.sum() <= 1 + 1e-12
    assert m.probs[1] + m.probs[2] == pytest.approx(m0.probs[1] + m0.probs[2], rel=1e-12, abs=1e-300)
    assert m0.probs[2] == 0.0 and m0.derivs[2] == 0.0


@pytest.mark.parametrize("B", [1e-12, 1e-8, 1e-5, 9.9e-4, 1e-3])
def test_narrow_band_continuity(B):
    a = mode_probabilities(0.0, 0.7, 0.3)
    m = mode_probabilities(B, 0.7, 0.3)
    # band averaging shifts P by O(B^2)
    np.testing.assert_allclose(m.probs, a.probs, rtol=10 * B**2 + 1e-14)
    np.testing.assert_allclose(m.derivs, a.derivs, rtol=10 * B**2 + 1e-14)


def test_small_l_limit_all_piston():
    m = mode_probabilities(0.3, 1e-6)
    assert m.probs[0] == pytest.approx(1.0, abs=1e-10)
    assert np.all(m.probs[1:] < 1e-10)


def test_stationary_point_of_tip_probability():
    B = 0.1
    lstar = optimize.brentq(lambda l: mode_probabilities(B, l).derivs[1], 0.4, 0.9, xtol=1e-14)
    m = mode_probabilities(B, lstar)
    assert abs(m.derivs[1]) < 1e-10
    at = cfi(m, (2, 3)).value
    assert at < 1e-15
    assert at < cfi(mode_probabilities(B, lstar - 0.01), (2, 3)).value
    assert at < cfi(mode_probabilities(B, lstar + 0.01), (2, 3)).value


def test_discussion_values():
    m = mode_probabilities(0.1, 0.2)
    # bucket-off values; the published 22.85 and 39.29 include the bucket
    assert cfi(m, (2, 3)).value == pytest.approx(15.94974415, rel=1e-8)
    assert cfi(m, (1, 2, 3, 4)).value == pytest.approx(31.31432911, rel=1e-8)
    assert abs(cfi(m, (2, 3), include_bucket=True).value - 22.85) < 0.05
    assert abs(cfi(m, (1, 2, 3, 4), include_bucket=True).value - 39.29) < 0.05


@pytest.mark.parametrize("B", [0.0, 0.2])
def test_tip_tilt_tends_to_monochromatic_qfi(B):
    for l in (1e-3, 1e-4):
        assert cfi(mode_probabilities(B, l), (2, 3)).value == pytest.approx(FOUR_PI2, rel=5e-3)
    limit = cfi(mode_probabilities(B, 0.0), (2, 3)).value
    assert limit == pytest.approx(FOUR_PI2 * (1 + B**2 / 12), rel=1e-15)
    assert cfi(mode_probabilities(B, 1e-4), (2, 3)).value == pytest.approx(limit, rel=1e-6)


def test_adding_modes_never_decreases_cfi():
    m = mode_probabilities(0.15, 0.9, 0.2)
    order = [(2,), (2, 3), (1, 2, 3), (1, 2, 3, 4)]
    vals = [cfi(m, s).value for s in order]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("B", [0.0, 0.1, 0.2])
def test_cfi_below_qfi(B):
    for l in (0.1, 0.4, 1.0, 1.6):
        total = cfi(mode_probabilities(B, l), (1, 2, 3, 4), include_bucket=True).value
        assert total <= qfi_point("loc", B, l).value + 1e-6
        assert total <= qfi_point("pair", B, l).value + 1e-6


def test_vanishing_probability_is_flagged():
    m = mode_probabilities(0.1, 0.5, 0.0)
    r = cfi(m, (2, 3))
    assert r.term_breakdown["Z3"] == 0.0
    assert any("P3" in f for f in r.flags)


def test_input_errors():
    with pytest.raises(DomainError):
        mode_probabilities(0.6, 1.0)
    with pytest.raises(DomainError):
        mode_probabilities(0.1, -1.0)
    with pytest.raises(DomainError):
        cfi(mode_probabilities(0.1, 1.0), ())
    with pytest.raises(DomainError):
        cfi(mode_probabilities(0.1, 1.0), (5,))
