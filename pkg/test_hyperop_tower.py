#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
超运算塔测试
第 4 层构建较慢，只取少量点
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from error_handler import (ConstructionError, DomainError, RangeError, ValidationError,
                           WindowError)
from hyperop_tower import (ExpLevel, HyperOpLevel, alpha_estimate, build_level, hyperop_eval,
                           hyperop_inverse, lambda_correction, normalize_tetration, parity_summary,
                           window_shift_eval, TetrationFunction)
from jet_arith import Jet
from phi_builder import GuardedReal


def rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


# ---- 第 1 层 ----

def test_exp_level():
    level = ExpLevel()
    assert level.evaluate(1.0) == pytest.approx(math.e)
    assert level.inverse(math.e) == pytest.approx(1.0)
    with pytest.raises(RangeError) as info:
        level.inverse(-1.0)
    assert info.value.alpha == 0.0
    np.testing.assert_allclose(level.taylor_at_zero(3), [1.0, 1.0, 0.5, 1.0 / 6.0])


def test_build_level_arguments():
    assert isinstance(build_level(1), ExpLevel)
    with pytest.raises(ValidationError):
        build_level(0)
    with pytest.raises(ConstructionError):
        build_level(3, ExpLevel())
    with pytest.raises(ValidationError):
        HyperOpLevel(1, None)


# ---- 四级运算（τ 路径） ----

def test_tetration_normalization(tetration, config):
    assert abs(tetration.tetration(0.0) - 1.0) <= 1e-12
    assert tetration.tetration(1.0) == pytest.approx(math.e, rel=1e-9)
    assert abs(tetration.tetration(-1.0)) <= 1e-12


def test_normalize_tetration_from_scratch(phi, tetration, config):
    fresh = TetrationFunction(phi, config)
    omega = normalize_tetration(fresh)
    assert fresh.window_T == tetration.window_T
    assert omega == pytest.approx(tetration.omega, abs=1e-12)
    assert fresh.tetration(0.0) == pytest.approx(1.0, abs=1e-10)


def test_tetration_window(tetration):
    assert tetration.window_T >= 0.0
    assert (2 * tetration.window_T) == int(2 * tetration.window_T)
    a, b, _, _ = tetration.normalization_trace[-1]
    assert b - a <= tetration.config.normalize_width * 2


def test_tetration_domain(tetration):
    for t in (-2.5, -2.0, -2.0 + 1e-9):
        with pytest.raises(DomainError) as info:
            tetration.tetration(t)
        assert info.value.alpha == -2.0
    assert tetration.tetration(-1.99) < -1.0


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-1.95, max_value=1.5))
def test_tetration_functional_equation(tetration, t):
    assert rel(math.exp(tetration.tetration(t)), tetration.tetration(t + 1.0)) < 1e-8


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=-1.5, max_value=2.0))
def test_slog_inverts_tetration(tetration, t):
    assert abs(tetration.slog(tetration.tetration(t)) - t) < 1e-8


def test_slog_whole_real_line(tetration):
    for x in (-5.0, -1.0, 0.5, 1e100):
        y = tetration.slog(x)
        assert y > -2.0
        if x < 1e6:
            assert tetration.tetration(y) == pytest.approx(x, rel=1e-8, abs=1e-9)


def test_slog_guarded(tetration):
    g = GuardedReal.from_log(1e10)
    assert tetration.inverse_guarded(g) == pytest.approx(1.0 + tetration.slog(1e10), rel=1e-9)


def test_tetration_guarded(tetration):
    assert tetration.evaluate_guarded(1.0).to_float() == pytest.approx(math.e, rel=1e-9)
    g4 = tetration.evaluate_guarded(4.0)
    g5 = tetration.evaluate_guarded(5.0)
    assert not g4.is_plain
    assert g5.level == g4.level + 1
    assert g5.residual == pytest.approx(g4.residual, rel=1e-12)


def test_tau_fixed_depth(tetration, phi):
    value, seq = tetration.tau(2.0, depth=2)
    assert value == pytest.approx(2.0 + math.log1p(3.0 / phi.phi(3.0)), rel=1e-14)
    assert seq.depth == 2


def test_tau_converges_in_window(tetration):
    T = tetration.window_T
    value, seq = tetration.tau(T + 2.0)
    assert seq.report.converged
    assert seq.to_dict()['kind'] == 'tau'
    assert abs(value - (T + 2.0)) < 1e-10
    with pytest.raises(WindowError):
        tetration.tau(T - 1.0)


def test_tau_jet_derivative_near_one(tetration):
    jet, _ = tetration.tau(Jet.variable(tetration.window_T + 2.0, 3))
    assert abs(jet.coeffs[1] - 1.0) < 1e-6
    assert np.max(np.abs(jet.coeffs[2:])) < 1e-6


def test_tetration_jet_matches_difference(tetration):
    t0, h = 0.3, 1e-5
    jet = tetration.tetration_jet(t0, 2)
    fd = (tetration.tetration(t0 + h) - tetration.tetration(t0 - h)) / (2 * h)
    assert jet.value == pytest.approx(tetration.tetration(t0), rel=1e-12)
    assert jet.coeffs[1] == pytest.approx(fd, rel=1e-6)


def test_tetration_chain_derivative(tetration):
    now = tetration.tetration_jet(0.5, 1).coeffs
    before = tetration.tetration_jet(-0.5, 1).coeffs
    assert before[1] == pytest.approx(now[1] / now[0], rel=1e-8)


def test_iterated_log_path(tetration):
    for t in (-1.2, 0.0, 0.7, 1.9):
        assert tetration.tetration_iterated_log(t) == pytest.approx(tetration.tetration(t), rel=1e-9, abs=1e-10)


def test_window_shift(tetration):
    for t in (-1.5, 0.25, 1.75):
        assert rel(window_shift_eval(tetration, t, 1), tetration.tetration(t)) < 1e-9


# ---- Λ 路径 ----

def test_cross_construction(level2, tetration):
    assert level2.alpha == -2.0
    for t in np.arange(-1.5, 2.0 + 1e-9, 0.25):
        assert rel(level2.evaluate(float(t)), tetration.tetration(float(t))) < 1e-9


def test_lambda_correction_record(level2):
    lam, seq = lambda_correction(level2, level2.window_T + 0.5)
    assert seq.kind == 'lambda'
    assert seq.report.converged
    assert seq.values[0] == lam


def test_level_three_ladder(level3):
    for t, expected in ((-2.0, -1.0), (-1.0, 0.0), (0.0, 1.0)):
        assert hyperop_eval(level3, t) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("t", [-3.0, -1.5, -0.4, 0.3, 1.0])
def test_level_three_functional_equation(level3, t):
    lhs = level3.predecessor.evaluate(level3.evaluate(t))
    assert rel(lhs, level3.evaluate(t + 1.0)) < 1e-8


def test_level_three_accepts_real_line(level3):
    for t in (-50.0, -10.0, -3.0, 2.0):
        assert level3.evaluate(t) > level3.alpha - 1e-8
    g = hyperop_eval(level3, 3.0, guarded=True)
    assert not g.is_plain


def test_level_three_alpha(level3):
    assert -2.0 < level3.alpha < -1.0
    assert level3.alpha_converged
    assert abs(level3.predecessor.inverse(level3.alpha) - level3.alpha) < 1e-8
    short = alpha_estimate(level3, iteration_cap=30)
    long = alpha_estimate(level3, iteration_cap=200)
    assert abs(short.value - long.value) < 1e-8


def test_level_three_range(level3):
    with pytest.raises(RangeError) as info:
        hyperop_inverse(level3, level3.alpha - 0.1)
    assert info.value.alpha == level3.alpha
    for t in (-3.0, -1.5, 0.3, 1.5):
        assert hyperop_inverse(level3, level3.evaluate(t)) == pytest.approx(t, abs=1e-8)


def test_level_three_monotone_jets(level3):
    for t in (-4.0, -1.0, 0.5):
        assert level3.evaluate(Jet.variable(t, 1)).coeffs[1] > 0


def test_level_three_parity(level3):
    summary = parity_summary(level3)
    assert summary['parity'] == 'odd'
    assert summary['domain'] == (-math.inf, math.inf)
    assert summary['range'][0] == level3.alpha
    assert not summary['alpha_in_minus_k_band']


def test_level_three_landing_report(level3):
    assert level3.landing_report(-0.5).report.converged


def test_level_four(level4):
    for j in range(4):
        assert level4.evaluate(float(-j)) == pytest.approx(1.0 - j, abs=1e-8)
    assert -4.0 < level4.alpha < -3.0
    assert parity_summary(level4)['alpha_in_minus_k_band']
    with pytest.raises(DomainError) as info:
        level4.evaluate(level4.alpha - 0.1)
    assert info.value.alpha == level4.alpha
    t = -0.5
    assert rel(level4.predecessor.evaluate(level4.evaluate(t)), level4.evaluate(t + 1.0)) < 1e-8


def test_level_four_inverse_near_alpha(level4):
    with pytest.raises(RangeError) as info:
        level4.inverse(-20.0)
    assert info.value.alpha == level4.alpha
    t = level4.inverse(-5.0)
    assert t > level4.alpha + level4.config.edge_refusal
    assert level4.evaluate(t) == pytest.approx(-5.0, abs=1e-7)


def test_level_four_lambda_on_guarded_phi(level4):
    t0 = None
    for t in np.arange(level4.window_T, level4.window_T + 4.0, 0.25):
        if not level4.big_phi.guarded(float(t)).is_plain:
            t0 = float(t)
            break
    assert t0 is not None

    lam, _ = level4.correction(t0)
    assert lam == 0.0
    tilde = level4.tilde(t0)
    assert isinstance(tilde, GuardedReal) and not tilde.is_plain
    assert window_shift_eval(level4, 0.0, -1) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("k", [2, 3])
def test_window_jet_contraction(tower, config, k):
    level = tower.level(k)
    assert level.window_jet_contraction is not None
    assert level.window_jet_contraction <= config.jet_contraction_bound
    lambdas = level.jet_contraction(level.window_T)
    assert lambdas is not None and max(lambdas) < 1.0


def test_level_three_log_step_matches_direct(level3):
    t = Jet.variable(0.5, 3)
    nxt = Jet([0.05, 0.01, -0.002, 0.0005])
    aux = level3.big_phi.evaluate(t)
    direct = level3.predecessor.inverse(level3.big_phi.climb_jet(t, aux) + nxt) - aux
    np.testing.assert_allclose(level3.step_map(t, nxt).coeffs, direct.coeffs, rtol=1e-9, atol=1e-12)
