#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
错误处理模块测试
"""

import pytest

from error_handler import (EXIT_INFRASTRUCTURE, EXIT_USAGE, ConstructionError, DomainError,
                           ErrorHandler, OverflowGuardError, RangeError, StepDomainError,
                           SuiteError, ValidationError, check_dependencies, exit_code_for,
                           validate_grid_size, validate_output_path, validate_tolerance)


@pytest.mark.parametrize("exc, code", [
    (ValidationError("x"), EXIT_USAGE),
    (DomainError("x", alpha=-2.0), EXIT_USAGE),
    (RangeError("x"), EXIT_USAGE),
    (StepDomainError("x", index=3), EXIT_USAGE),
    (ConstructionError("x"), EXIT_INFRASTRUCTURE),
    (SuiteError("x"), EXIT_INFRASTRUCTURE),
    (OverflowGuardError("x"), EXIT_INFRASTRUCTURE),
    (OSError("x"), EXIT_INFRASTRUCTURE),
])
def test_exit_codes(exc, code):
    assert exit_code_for(exc) == code


def test_step_domain_error_carries_index():
    err = StepDomainError("log 的自变量非正", index=7)
    assert isinstance(err, DomainError)
    assert err.index == 7


def test_friendly_message_reports_alpha():
    handler = ErrorHandler()
    message = handler.get_user_friendly_message(DomainError("t 太小", alpha=-2.0))
    assert 'α = -2' in message
    assert '定义域' in message
    assert '--guarded' in handler.get_user_friendly_message(OverflowGuardError("大"))
    assert '未知错误' in handler.get_user_friendly_message(KeyError("k"))


def test_validators(tmp_path):
    assert validate_tolerance(1e-10)
    with pytest.raises(ValidationError):
        validate_tolerance(-1.0)
    with pytest.raises(ValidationError):
        validate_tolerance(float("nan"))

    assert validate_output_path(str(tmp_path / 'out.csv'))
    with pytest.raises(FileNotFoundError):
        validate_output_path(str(tmp_path / 'missing' / 'out.csv'))
    with pytest.raises(ValidationError):
        validate_output_path('')

    assert validate_grid_size(100)
    with pytest.raises(ValidationError):
        validate_grid_size(0)
    with pytest.raises(ValidationError):
        validate_grid_size(10 ** 6 + 1)


def test_dependencies_available():
    assert check_dependencies()
