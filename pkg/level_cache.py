#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
层级缓存模块
把已构建层的 ωₖ、αₖ、窗口等常数以 JSON 存盘，容差或深度上限变化时自动失效
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 2


class LevelCache:
    """磁盘上的层级常数缓存"""

    def __init__(self, cache_dir):
        self.cache_dir = Path(cache_dir)

    def path_for(self, k: int) -> Path:
        return self.cache_dir / f"level_{k}.json"

    def load(self, k: int, tolerance: float, depth_cap: int) -> Optional[Dict[str, Any]]:
        """
        读取第 k 层的缓存记录

        Returns:
            记录字典；文件缺失、损坏或参数不符时返回 None
        """
        path = self.path_for(k)
        if not path.exists():
            return None

        try:
            with open(path, 'r', encoding='utf-8') as f:
                record = json.load(f)
        except (OSError, ValueError) as e:
            logger.warning(f"缓存文件 {path} 无法读取: {e}")
            return None

        if record.get('schema_version') != SCHEMA_VERSION:
            logger.info(f"缓存 {path} 版本不符，忽略")
            return None
        if record.get('k') != k or record.get('tolerance') != tolerance or record.get('depth_cap') != depth_cap:
            logger.info(f"缓存 {path} 的容差或深度上限已变化，忽略")
            return None
        return record

    def store(self, level) -> Path:
        """写入 level_<k>.json"""
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        record = {
            'schema_version': SCHEMA_VERSION,
            'k': level.k,
            'omega': level.omega,
            'alpha': level.alpha,
            'alpha_converged': level.alpha_converged,
            'window_T': level.window_T,
            'tolerance': level.tolerance,
            'depth_cap': level.depth_cap,
        }
        path = self.path_for(level.k)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(record, f, indent=2, ensure_ascii=False)
            f.write('\n')
        logger.debug(f"第 {level.k} 层写入缓存 {path}")
        return path

    def clear(self):
        """删除全部缓存文件"""
        if not self.cache_dir.is_dir():
            return
        for path in self.cache_dir.glob('level_*.json'):
            path.unlink()
