#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
jet运算测试
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from error_handler import DomainError, InvalidJetError, OverflowGuardError, SingularJetError
from jet_arith import (Jet, MAX_JET_ORDER, inverse_jet_at, jet_compose_scalar, jet_div,
                       jet_distance, jet_exp, jet_inverse_series, jet_log, jet_log1p, jet_mul,
                       polynomial)

small_coeffs = st.lists(st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
                        min_size=2, max_size=7)


def test_variable_and_constant():
    x = Jet.variable(1.5, 4)
    assert x.order == 4
    assert list(x.coeffs) == [1.5, 1.0, 0.0, 0.0, 0.0]
    assert list(Jet.constant(2.0, 2).coeffs) == [2.0, 0.0, 0.0]


def test_order_limits():
    with pytest.raises(InvalidJetError):
        Jet.variable(0.0, MAX_JET_ORDER + 1)
    with pytest.raises(InvalidJetError):
        Jet([])
    with pytest.raises(InvalidJetError):
        Jet.variable(0.0, 2) + Jet.variable(0.0, 3)


def test_non_finite_coefficients_rejected():
    with pytest.raises(InvalidJetError):
        Jet([1.0, float('nan')])
    with pytest.raises(InvalidJetError):
        Jet([float('inf')])


def test_mul_is_polynomial_product():
    # (1 + t)^2 在 t0 = 2 处：9 + 6u + u^2
    x = Jet.variable(2.0, 3)
    y = jet_mul(x + 1.0, x + 1.0)
    np.testing.assert_allclose(y.coeffs, [9.0, 6.0, 1.0, 0.0])


def test_div_inverts_mul():
    a = Jet([1.0, 2.0, -0.5, 0.25])
    b = Jet([3.0, -1.0, 0.5, 2.0])
    q = jet_div(jet_mul(a, b), b)
    assert q.allclose(a)


def test_div_by_zero_constant_term():
    with pytest.raises(SingularJetError):
        jet_div(Jet.variable(1.0, 2), Jet.variable(0.0, 2))


def test_exp_derivatives_all_equal():
    derivs = jet_exp(Jet.variable(0.5, 6)).derivatives()
    np.testing.assert_allclose(derivs, math.exp(0.5), rtol=1e-13)


def test_exp_overflow():
    with pytest.raises(OverflowGuardError):
        jet_exp(Jet.variable(800.0, 2))


def test_log_series():
    # log(x0 + u) = log x0 + u/x0 - u²/(2x0²) + u³/(3x0³)
    x0 = 2.0
    got = jet_log(Jet.variable(x0, 3))
    np.testing.assert_allclose(got.coeffs, [math.log(x0), 1 / x0, -1 / (2 * x0 ** 2), 1 / (3 * x0 ** 3)],
                               rtol=1e-14)


def test_log_domain():
    with pytest.raises(DomainError):
        jet_log(Jet.variable(0.0, 2))
    with pytest.raises(DomainError):
        jet_log1p(Jet.variable(-1.0, 2))


def test_log1p_small_argument():
    got = jet_log1p(Jet.variable(1e-17, 2))
    assert got.value == pytest.approx(1e-17, rel=1e-12)
    assert got.coeffs[1] == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(small_coeffs)
def test_exp_log_inverse(coeffs):
    a = Jet(coeffs)
    assert jet_distance(jet_log(jet_exp(a)), a) < 1e-9


def test_compose_with_exp():
    a = Jet([0.3, 1.2, -0.4, 0.1])
    f_jet = Jet.variable(a.value, a.order).exp()
    assert jet_compose_scalar(f_jet, a).allclose(a.exp())


def test_compose_accepts_callable():
    a = Jet([0.3, 1.2, -0.4])
    composed = jet_compose_scalar(lambda c: Jet.variable(c, 2).exp(), a)
    assert composed.allclose(a.exp())


def test_inverse_series_of_exp_is_log():
    y0 = 0.3
    g = jet_inverse_series(Jet.variable(y0, 4).exp(), y0)
    expected = jet_log(Jet.variable(math.exp(y0), 4))
    assert g.allclose(expected, rtol=1e-12, atol=1e-13)


def test_inverse_series_singular():
    with pytest.raises(SingularJetError):
        jet_inverse_series(Jet([1.0, 0.0, 1.0]), 0.0)


def test_inverse_jet_at():
    y0 = 1.1
    x = Jet.variable(math.exp(y0), 3)
    got = inverse_jet_at(Jet.variable(y0, 5).exp(), y0, x)
    assert got.allclose(jet_log(x), rtol=1e-12, atol=1e-13)


def test_polynomial_on_jet_and_array():
    coeffs = [1.0, -2.0, 0.5]
    x = Jet.variable(2.0, 2)
    got = polynomial(coeffs, x)
    np.testing.assert_allclose(got.coeffs, [1.0 - 4.0 + 2.0, -2.0 + 2.0, 0.5])
    np.testing.assert_allclose(polynomial(coeffs, np.array([0.0, 1.0])), [1.0, -0.5])
