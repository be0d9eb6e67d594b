import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from etsafe.classk import Linear, Power
from etsafe.systems import counterexample_system, scalar_stabilization_demo
from etsafe.triggers import (NaiveSafety, SignedNaiveSafety, Stabilization, StrongISSf,
                             check_dominance, miet_bound, scaled, shift_certificate,
                             strong_law, trigger_error_radius, trigger_residual)

SYS, CERT = counterexample_system(1.2)
SHIFTED = shift_certificate(CERT, 0.1)


def test_signed_naive_example():
    law = SignedNaiveSafety(CERT.iota, CERT.alpha, 0.5)
    x = np.array([math.sqrt(0.5), 0.0])  # h = 0.5
    res = trigger_residual(law, x, CERT.value(x), np.array([0.05, 0.0]))
    assert res == pytest.approx(0.25 - 3.456 * 0.05, abs=1e-12)
    assert res == pytest.approx(0.0772, abs=1e-12)


def test_naive_negative_outside_safe_set():
    law = NaiveSafety(CERT.iota, CERT.alpha, 0.5)
    x = np.array([1.1, 0.0])
    assert trigger_residual(law, x, CERT.value(x), np.zeros(2)) < 0
    signed = SignedNaiveSafety(CERT.iota, CERT.alpha, 0.5)
    assert trigger_residual(signed, x, CERT.value(x), np.zeros(2)) > 0


def test_stabilization_residual():
    _, v = scalar_stabilization_demo()
    law = Stabilization(v.gamma, v.alpha3, 0.5)
    # 0.5 * 0.5 * 1^2 - 0.5 * 0.5^2
    assert trigger_residual(law, np.array([1.0]), 0.5, np.array([0.5])) == pytest.approx(0.125)


def test_sigma_ranges():
    for bad in (0.0, 1.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            SignedNaiveSafety(CERT.iota, CERT.alpha, bad)
        with pytest.raises(ValueError):
            Stabilization(CERT.iota, CERT.alpha, bad)
    StrongISSf(CERT.iota, CERT.alpha, CERT.alpha, 1.0, 0.1)  # sigma = 1 allowed here
    for bad in (0.0, 1.5):
        with pytest.raises(ValueError):
            StrongISSf(CERT.iota, CERT.alpha, CERT.alpha, bad, 0.1)
    with pytest.raises(ValueError):
        StrongISSf(CERT.iota, CERT.alpha, CERT.alpha, 0.5, 0.0)
    with pytest.raises(ValueError):
        NaiveSafety(CERT.iota, CERT.alpha, 0.0)


def test_shift_certificate_examples():
    assert SHIFTED.strong_margin == 0.1
    r = np.linspace(-3, 3, 1000)
    assert np.array_equal(SHIFTED.alpha(r), r)
    x = np.array([0.3, 0.4])
    assert SHIFTED.value(x) == CERT.value(x) + 0.1
    assert SHIFTED.iota == CERT.iota
    cubic = shift_certificate(CERT.__class__(h=CERT.h, grad_h=CERT.grad_h,
                                             alpha=Power(coefficient=1.0, exponent=3.0),
                                             iota=CERT.iota), 0.5)
    assert cubic.strong_margin == 0.125
    with pytest.raises(ValueError):
        shift_certificate(CERT, 0.0)


def test_shifted_certificate_has_strong_property(rng):
    # h_b' >= -alpha_b(h_b) + d_b - iota(|e|) on random samples in |x| <= r
    from etsafe.systems import certify_barrier_inequality
    rad = 1.2 * np.sqrt(rng.random(2000))
    ang = rng.uniform(0, 2 * np.pi, 2000)
    X = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    E = rng.normal(scale=0.3, size=(2000, 2))
    assert min(certify_barrier_inequality(SYS, SHIFTED, x, e) for x, e in zip(X, E)) >= -1e-12


def test_miet_bound_examples():
    law = strong_law(SHIFTED, 0.9)
    assert miet_bound(law, 3.456, 1.0) == pytest.approx(0.09 / 3.456, rel=1e-15)
    with pytest.raises(ValueError):
        miet_bound(law, 0.0, 1.0)
    with pytest.raises(ValueError):
        miet_bound(law, 3.456, 0.0)


@given(st.floats(0.01, 1.0), st.floats(0.01, 5.0), st.floats(0.1, 10), st.floats(0.1, 10),
       st.floats(1.01, 10))
def test_miet_bound_scaling(sigma, d, L, F, c):
    law = StrongISSf(CERT.iota, CERT.alpha, CERT.alpha, sigma, d)
    tau = miet_bound(law, L, F)
    assert tau > 0
    assert miet_bound(law, c * L, F) == pytest.approx(tau / c, rel=1e-12)
    assert miet_bound(law, L, c * F) == pytest.approx(tau / c, rel=1e-12)
    assert miet_bound(law, L, c * F) < tau
    bigger = StrongISSf(CERT.iota, CERT.alpha, CERT.alpha, sigma, c * d)
    assert miet_bound(bigger, L, F) == pytest.approx(c * tau, rel=1e-12)


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.05, 1.0))
def test_strong_residual_at_zero_error(x1, x2, sigma):
    law = strong_law(SHIFTED, sigma)
    x = np.array([x1, x2])
    res = trigger_residual(law, x, SHIFTED.value(x), np.zeros(2))
    assert res >= sigma * 0.1 - 1e-15


def test_strong_law_dominance():
    law = strong_law(SHIFTED, 0.9, scaled(SHIFTED.alpha, 2.0), h_range=(0.0, 1.1))
    assert law.beta(0.5) == 1.0
    assert check_dominance(law.beta, law.alpha, 0.0, 1.1)
    with pytest.raises(ValueError):
        strong_law(SHIFTED, 0.9, Linear(0.5), h_range=(0.0, 1.1))
    with pytest.raises(ValueError):
        scaled(SHIFTED.alpha, 0.5)
    with pytest.raises(ValueError):
        scaled(Power(coefficient=1.0, exponent=3.0), 2.0)


def test_event_surface_error_radius():
    # with beta = alpha the strong surface is iota(|e|) = sigma d everywhere
    law = strong_law(SHIFTED, 0.9)
    er = trigger_error_radius(law, SHIFTED.value, math.sqrt(1.1), 2, grid=11)
    assert er == pytest.approx(0.09 / 3.456, rel=1e-14)
