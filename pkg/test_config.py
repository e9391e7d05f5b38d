#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置模块测试
"""

import argparse
from pathlib import Path

import pytest

from config import CACHE_DIR_ENV, Config


def test_defaults_validate():
    config = Config()
    assert config.validate()
    assert config.tolerance == 1e-10
    assert config.rho_grid == 32
    assert config.jet_window_max_level == 3
    assert config.max_jet_order == 12


@pytest.mark.parametrize("changes", [
    {'tolerance': -1.0},
    {'tolerance': 0.0},
    {'jet_order': 13},
    {'max_level': 0},
    {'depth_cap': 0},
    {'output_format': 'xml'},
    {'jet_contraction_bound': 1.0},
    {'rho_grid': 2},
])
def test_bad_values(changes):
    assert not Config(**changes).validate()


def test_internal_eps():
    assert Config(tolerance=1e-6).internal_eps == pytest.approx(1e-9)
    assert Config(tolerance=1e-14).internal_eps == 1e-15


def test_cache_dir_resolution(monkeypatch, tmp_path):
    monkeypatch.delenv(CACHE_DIR_ENV, raising=False)
    assert Config().resolve_cache_dir() is None

    monkeypatch.setenv(CACHE_DIR_ENV, str(tmp_path))
    assert Config().resolve_cache_dir() == Path(tmp_path)

    explicit = tmp_path / 'explicit'
    assert Config(cache_dir=str(explicit)).resolve_cache_dir() == explicit


def test_from_args_overrides_non_empty():
    args = argparse.Namespace(tolerance=1e-8, depth_cap=None, output_format='json', k=3)
    config = Config.from_args(args, Config(depth_cap=64))
    assert config.tolerance == 1e-8
    assert config.depth_cap == 64
    assert config.output_format == 'json'
    assert not hasattr(config, 'k')


def test_file_round_trip(tmp_path):
    path = tmp_path / 'config.json'
    Config(tolerance=1e-7, seed=5).save_to_file(str(path))
    loaded = Config.load_from_file(str(path))
    assert loaded.tolerance == 1e-7
    assert loaded.seed == 5


def test_missing_or_corrupt_file_gives_defaults(tmp_path):
    assert Config.load_from_file(str(tmp_path / 'none.json')) == Config()
    bad = tmp_path / 'bad.json'
    bad.write_text('{', encoding='utf-8')
    assert Config.load_from_file(str(bad)) == Config()


def test_removed_keys_are_ignored(tmp_path):
    path = tmp_path / 'old.json'
    path.write_text('{"overflow_guard": 1e300, "rho_grid": 16}', encoding='utf-8')
    loaded = Config.load_from_file(str(path))
    assert loaded.rho_grid == 16
    assert not hasattr(loaded, 'overflow_guard')
