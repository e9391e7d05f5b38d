#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
安装脚本
安装依赖，检查数值库是否可用，并对前三层做一次快速自检
"""

import sys
import subprocess
from pathlib import Path

MIN_PYTHON = (3, 9)
TEST_ONLY_PACKAGES = ('pytest', 'hypothesis')

# (说明, 层号, 自变量, 期望值)
SMOKE_POINTS = [
    ("𝓕(0) = 1", 2, 0.0, 1.0),
    ("𝓕(-1) = 0", 2, -1.0, 0.0),
    ("𝓕(1) = e", 2, 1.0, 2.718281828459045),
    ("E_3(-2) = -1", 3, -2.0, -1.0),
]


def check_python_version():
    """检查Python版本"""
    if sys.version_info[:2] < MIN_PYTHON:
        need = '.'.join(map(str, MIN_PYTHON))
        print(f"错误: 需要Python {need}或更高版本，当前版本: {sys.version.split()[0]}")
        return False

    print(f"Python版本检查通过: {sys.version.split()[0]}")
    return True


def install_requirements():
    """pip 安装 requirements.txt"""
    requirements_file = Path(__file__).with_name("requirements.txt")
    if not requirements_file.exists():
        print(f"错误: 找不到 {requirements_file}")
        return False

    print("正在安装依赖包...")
    result = subprocess.run([sys.executable, "-m", "pip", "install", "-r", str(requirements_file)])
    if result.returncode != 0:
        print(f"依赖包安装失败，pip 退出码 {result.returncode}")
        return False
    return True


def check_libraries():
    """数值库缺失时终止；测试库缺失只提示"""
    from error_handler import check_dependencies

    try:
        check_dependencies()
    except ImportError as e:
        print(e)
        return False
    print("✓ numpy, scipy")

    for name in TEST_ONLY_PACKAGES:
        try:
            __import__(name)
            print(f"✓ {name}")
        except ImportError:
            print(f"- {name} 未安装，无法运行测试")
    return True


def smoke_test():
    """在少数整数点上核对各层的值"""
    from config import Config
    from hyperop_tower import HyperOpTower

    config = Config()
    if not config.validate():
        print("默认配置未通过验证")
        return False

    tower = HyperOpTower(config)
    ok = True
    for label, k, t, expected in SMOKE_POINTS:
        level = tower.tetration_function if k == 2 else tower.level(k)
        value = level.evaluate(t)
        passed = abs(value - expected) <= 1e-9 * max(1.0, abs(expected))
        ok = ok and passed
        print(f"{'✓' if passed else '✗'} {label}: {value:.17g}")
    return ok


STEPS = [
    ("检查Python版本", check_python_version),
    ("安装依赖", install_requirements),
    ("检查依赖库", check_libraries),
    ("快速自检", smoke_test),
]


def main():
    """依次执行各步骤，任一步失败即停止"""
    print("超运算塔数值引擎 - 安装脚本")
    print("=" * 50)

    for title, step in STEPS:
        print(f"\n[{title}]")
        try:
            if not step():
                print(f"{title}失败")
                return False
        except Exception as e:
            print(f"{title}出错: {e}")
            return False

    print("\n" + "=" * 50)
    print("安装完成！常用命令:")
    print("  python cli_main.py eval --k 2 --t 0.5")
    print("  python cli_main.py verify --max-level 3")
    print("  python -m pytest")
    return True


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
