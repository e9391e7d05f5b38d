#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置模块
包含数值构造、校验套件与命令行的各种配置参数
"""

from dataclasses import dataclass, asdict, fields
from pathlib import Path
from typing import Optional
import json
import logging
import os

logger = logging.getLogger(__name__)

CACHE_DIR_ENV = 'HYPEROP_CACHE_DIR'
OUTPUT_FORMATS = ('csv', 'json', 'text')


@dataclass
class Config:
    """程序配置类"""

    # 用户容差与命令行选项
    tolerance: float = 1e-10
    jet_order: int = 6
    max_level: int = 4
    depth_cap: int = 256
    seed: int = 0
    output_format: str = 'csv'

    # 数值常量
    max_jet_order: int = 12
    contour_radius: float = 1.0
    contour_nodes: int = 64
    contour_agreement: float = 1e-9
    normalize_width: float = 1e-13
    bracket_expansions: int = 60
    shift_cap: int = 60
    alpha_tolerance: float = 1e-10
    alpha_iteration_cap: int = 200
    rho_grid: int = 32
    edge_refusal: float = 1e-8
    window_cap: int = 8  # 窗口搜索的 T 上限
    jet_window_max_level: int = 3  # 更高层的 Φ 在窗口右侧很快超出jet范围
    jet_contraction_bound: float = 0.9

    # 校验套件
    edge_density: int = 200  # 每单位长度，靠近定义域边缘
    bulk_density: int = 50
    inversion_threshold: float = 1e-8
    composition_threshold: float = 1e-10
    edge_band: float = 0.05

    # 缓存与日志
    cache_dir: Optional[str] = None
    log_file: Optional[str] = None

    @property
    def internal_eps(self) -> float:
        """内部收敛阈值，比用户容差严三个数量级"""
        return max(self.tolerance * 1e-3, 1e-15)

    def resolve_cache_dir(self) -> Optional[Path]:
        """cache_dir 优先，其次环境变量 HYPEROP_CACHE_DIR"""
        value = self.cache_dir or os.environ.get(CACHE_DIR_ENV)
        return Path(value) if value else None

    def validate(self) -> bool:
        """验证配置参数"""
        try:
            assert self.tolerance > 0
            assert 0 <= self.jet_order <= self.max_jet_order <= 12
            assert self.max_level >= 1
            assert self.depth_cap >= 1
            assert self.edge_density > 0 and self.bulk_density > 0
            assert self.output_format in OUTPUT_FORMATS
            assert self.contour_nodes > 0 and self.contour_radius > 0
            assert 0 < self.normalize_width < 1
            assert 0 < self.jet_contraction_bound < 1
            assert self.rho_grid >= 4
            return True
        except AssertionError:
            return False

    @classmethod
    def from_args(cls, args, base: Optional['Config'] = None) -> 'Config':
        """用 argparse 命名空间中非空的同名字段覆盖配置"""
        config = cls(**asdict(base)) if base is not None else cls()
        for f in fields(cls):
            value = getattr(args, f.name, None)
            if value is not None:
                setattr(config, f.name, value)
        return config

    def save_to_file(self, filepath: str):
        """以 JSON 保存全部字段"""
        Path(filepath).write_text(json.dumps(asdict(self), indent=2, ensure_ascii=False) + '\n',
                                  encoding='utf-8')

    @classmethod
    def load_from_file(cls, filepath: str) -> 'Config':
        """从 JSON 加载；文件缺失或损坏时返回默认配置，未知键忽略"""
        path = Path(filepath)
        if not path.exists():
            return cls()

        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as e:
            logger.warning(f"配置文件 {path} 无法读取，使用默认配置: {e}")
            return cls()

        if not isinstance(data, dict):
            logger.warning(f"配置文件 {path} 不是 JSON 对象，使用默认配置")
            return cls()

        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known})


# 默认配置实例
default_config = Config()


def test_config():
    """测试配置模块"""
    config = Config()
    print(f"配置验证: {config.validate()}")
    print(f"内部收敛阈值: {config.internal_eps}")
    print(f"缓存目录: {config.resolve_cache_dir()}")

    bad = Config(tolerance=-1.0)
    print(f"负容差验证: {bad.validate()}")


if __name__ == "__main__":
    test_config()
