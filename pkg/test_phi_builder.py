#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
辅助函数 φ、Φ_k 与层级索引实数测试
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from error_handler import DomainError, OverflowGuardError, ValidationError
from hyperop_tower import ExpLevel
from jet_arith import Jet
from phi_builder import (BigPhi, GuardedReal, R_MAX, R_MIN, big_phi,
                         big_phi_guarded, guarded_gap, phi_grid)


# ---- GuardedReal ----

def test_guarded_plain_roundtrip():
    g = GuardedReal.from_float(12.5)
    assert g.is_plain
    assert g.to_float() == 12.5


def test_guarded_canonical_form():
    g = GuardedReal.from_log(1000.0)
    assert g.level == 2
    assert R_MIN <= g.residual < R_MAX
    assert g.log().to_float() == pytest.approx(1000.0, rel=1e-14)


def test_guarded_level_one_collapses():
    g = GuardedReal(1, 5.0)
    assert g.is_plain
    assert g.to_float() == pytest.approx(math.exp(5.0))


def test_guarded_to_float_overflow():
    with pytest.raises(OverflowGuardError):
        GuardedReal.from_log(1e4).to_float()


def test_guarded_log_of_non_positive():
    with pytest.raises(DomainError):
        GuardedReal.from_float(-1.0).log()


def test_guarded_ordering_follows_exp():
    values = [GuardedReal.from_float(x) for x in (-3.0, 0.0, 1e10, 1e299)]
    values += [GuardedReal.from_log(800.0), GuardedReal.from_log(1e5),
               GuardedReal.from_log(1e5).exp()]
    assert values == sorted(values)
    assert GuardedReal.from_log(800.0) > 1e300


def test_guarded_add_and_mul_exp():
    g = GuardedReal.from_log(1000.0)
    assert g.add_float(5.0).log().to_float() == pytest.approx(1000.0, rel=1e-14)
    h = g.mul_exp(3.0)
    assert h.log().to_float() == pytest.approx(1003.0, rel=1e-14)
    assert g.reciprocal() == 0.0
    assert guarded_gap(h, h) == 0.0


# ---- φ ----

def test_phi_at_one(phi):
    assert phi.phi(1.0) == pytest.approx(1.5285, abs=5e-4)


def test_phi_far_left(phi):
    value = phi.phi(-10.0)
    assert 0.0 < value < 2e-5


def test_phi_overflow_directs_to_log(phi):
    with pytest.raises(OverflowGuardError):
        phi.phi(5.0)


def test_phi_log_plain(phi):
    g = phi.phi_log(2.0)
    assert g.level == 0
    assert g.residual == pytest.approx(math.exp(1.0 + phi.phi(1.0)), rel=1e-12)
    assert g.residual == pytest.approx(12.53, abs=0.01)


def test_phi_log_guarded(phi):
    g = phi.phi_log(4.0)
    assert g.level >= 1
    assert g.log().to_float() == pytest.approx(3.0 + phi.phi(3.0), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-6.0, max_value=2.5))
def test_phi_functional_equation(phi, t):
    assert phi.phi_residual(t) < 1e-10


def test_phi_functional_equation_log_space(phi):
    for t in (3.5, 5.0, 8.0):
        assert phi.phi_residual(t) < 1e-10


@pytest.mark.parametrize("s", [0.5 + 0.5j, -1.0 + 1.5j, 1.0 - 1.0j])
def test_phi_complex_functional_equation(phi, s):
    assert phi.complex_residual(s) < 1e-10


def test_phi_conjugate_symmetry(phi):
    s = 0.3 + 0.7j
    assert phi.phi(s.conjugate()) == pytest.approx(np.conj(phi.phi(s)), rel=1e-13)


def test_phi_monotone_positive(phi):
    values = phi.phi_array(np.linspace(-8.0, 3.0, 111))
    assert np.all(values > 0)
    assert np.all(np.diff(values) > 0)


def test_phi_array_matches_scalar(phi):
    pts = np.array([-2.0, 0.0, 1.5])
    np.testing.assert_allclose(phi.phi_array(pts), [phi.phi(float(p)) for p in pts], rtol=1e-12)
    assert phi.phi_array(np.array([])).size == 0


def test_phi_jet_matches_contour(phi):
    jet = phi.phi(Jet.variable(0.3, 3))
    derivs = jet.derivatives()
    for k in (1, 2, 3):
        assert phi.cauchy_derivative(0.3, k).real == pytest.approx(derivs[k], rel=1e-8)


def test_phi_contour_order_zero(phi):
    assert phi.cauchy_derivative(0.0, 0).real == pytest.approx(phi.phi(0.0), rel=1e-9)


def test_phi_contour_rejects_negative_order(phi):
    with pytest.raises(ValueError):
        phi.cauchy_derivative(0.0, -1)


def test_phi_grid_shape(phi):
    re, im, values = phi_grid(phi, -1.0, 1.0, -1.0, 1.0, 5)
    assert re.shape == im.shape == values.shape == (25,)
    assert values[12] == pytest.approx(phi.phi(0.0))


def test_phi_grid_too_large(phi):
    with pytest.raises(ValidationError):
        phi_grid(phi, -1.0, 1.0, -1.0, 1.0, 1001)


# ---- Φ_k ----

def test_big_phi_two_is_phi(phi):
    bp = BigPhi(ExpLevel(), eps=1e-14)
    for t in np.linspace(-2.0, 1.0, 7):
        now = bp.evaluate(float(t))
        nxt = bp.evaluate(float(t) + 1.0)
        assert abs(nxt - math.exp(t) * math.exp(now)) < 1e-10 * max(1.0, nxt)
        assert now == pytest.approx(phi.phi(float(t)), rel=1e-12)


def test_big_phi_guarded_climb():
    bp = BigPhi(ExpLevel(), eps=1e-14)
    g = bp.guarded(4.0)
    assert not g.is_plain
    chain = bp.chain(1.0, 4)
    assert all(a < b for a, b in zip(chain, chain[1:]))


def test_big_phi_three_monotone(level3):
    ts = np.linspace(-2.0, level3.window_T, 12)
    values = [big_phi(level3, float(t)) for t in ts]
    assert all(v > 0 for v in values)
    assert all(b > a for a, b in zip(values, values[1:]))
    assert big_phi_guarded(level3, float(ts[-1])).to_float() == pytest.approx(values[-1], rel=1e-9)


def test_big_phi_three_functional_equation(level3):
    t = 0.25
    now = big_phi(level3, t)
    nxt = big_phi(level3, t + 1.0)
    assert nxt == pytest.approx(math.exp(t) * level3.predecessor.evaluate(now), rel=1e-9)
