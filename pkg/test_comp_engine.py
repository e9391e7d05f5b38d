#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
无穷复合引擎测试
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from comp_engine import (Region, StepFamily, converge, delta_profile, estimate_rho, identity_family,
                         nest, tail_norm_threshold)
from error_handler import DomainError, NoThresholdError, StepDomainError


def phi_family():
    """h_j(s, z) = e^{s-j+z}，|s| ≤ 1、|z| ≤ 1 上 ρ_j = e^{2-j}"""
    return StepFamily(step=lambda j, s, z: np.exp(s - j + z),
                      rho=lambda j: math.exp(2.0 - j), name="phi")


def test_nest_depth_40():
    assert nest(phi_family(), 1.0, 1, 40, 0.0) == pytest.approx(1.5285, abs=5e-4)


def test_nest_counts_steps():
    calls = []

    def step(j, s, z):
        calls.append(j)
        return z + 1

    assert nest(StepFamily(step=step), 0.0, 3, 7, 0) == 5
    assert calls == [7, 6, 5, 4, 3]


def test_nest_rejects_empty_range():
    with pytest.raises(ValueError):
        nest(phi_family(), 0.0, 5, 4, 0.0)


def test_nest_attaches_failing_index():
    def step(j, s, z):
        if j == 5:
            raise DomainError("越界")
        return z

    with pytest.raises(StepDomainError) as info:
        nest(StepFamily(step=step), 0.0, 1, 10, 0.0)
    assert info.value.index == 5


@pytest.mark.parametrize("eps, expected", [(0.01, 7), (0.9, 3)])
def test_tail_norm_threshold(eps, expected):
    assert tail_norm_threshold(phi_family(), eps) == expected


def test_tail_norm_threshold_without_decay():
    flat = StepFamily(step=lambda j, s, z: z, rho=lambda j: 1.0)
    with pytest.raises(NoThresholdError):
        tail_norm_threshold(flat, 0.5, index_cap=100)


def test_tail_norm_threshold_eps_range():
    with pytest.raises(ValueError):
        tail_norm_threshold(phi_family(), 1.5)


def test_converge_matches_deep_nest():
    value, report = converge(phi_family(), 1.0, 1e-13)
    assert report.converged
    assert report.depth_used < 60
    assert value == pytest.approx(nest(phi_family(), 1.0, 1, 80, 0.0), rel=1e-13)
    assert report.to_dict()['converged'] is True


def test_converge_reports_failure():
    counter = StepFamily(step=lambda j, s, z: z + 1.0, name="counter")
    value, report = converge(counter, 0.0, 1e-12, depth_cap=20)
    assert not report.converged
    assert value == pytest.approx(20.0)


def test_identity_family_returns_seed():
    value, report = converge(identity_family(), 0.0, 1e-12, seed=3.5)
    assert value == 3.5
    assert report.converged


def test_converge_with_start_offset():
    fam = phi_family()
    tail, _ = converge(fam, 0.5, 1e-14, start=6)
    head = nest(fam, 0.5, 1, 5, tail)
    full, _ = converge(fam, 0.5, 1e-14)
    assert head == pytest.approx(full, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=-2.0, max_value=1.0), st.integers(min_value=1, max_value=29))
def test_split_associativity(s, k):
    fam = phi_family()
    whole = nest(fam, s, 1, 30, 0.0)
    split = nest(fam, s, 1, k, nest(fam, s, k + 1, 30, 0.0))
    assert whole == split


def test_geometric_decay():
    deltas = delta_profile(phi_family(), 0.5, list(range(3, 12)))
    slope = np.polyfit(np.arange(3, 12), np.log(deltas), 1)[0]
    assert slope <= -0.95


def test_estimate_rho_on_disk():
    rho = estimate_rho(phi_family().step, Region(0.0, 1.0, 1.0), grid=32)
    for j in (1, 3, 10):
        assert rho(j) == pytest.approx(math.exp(2.0 - j), rel=1e-12)
