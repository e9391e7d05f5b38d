#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试夹具
各层只构建一次，整个测试会话共享
"""

import pytest

from config import Config
from hyperop_tower import HyperOpTower


@pytest.fixture(scope='session')
def config():
    return Config()


@pytest.fixture(scope='session')
def tower(config):
    return HyperOpTower(config)


@pytest.fixture(scope='session')
def phi(tower):
    return tower.phi


@pytest.fixture(scope='session')
def tetration(tower):
    return tower.tetration_function


@pytest.fixture(scope='session')
def level2(tower):
    return tower.level(2)


@pytest.fixture(scope='session')
def level3(tower):
    return tower.level(3)


@pytest.fixture(scope='session')
def level4(tower):
    return tower.level(4)
