#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
复合求值模块
有限与无限嵌套复合 h_1(s, h_2(s, ... h_m(s, z)))，按尾部界截断
"""

import logging
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from error_handler import DomainError, NoThresholdError, StepDomainError
from jet_arith import jet_distance, jet_magnitude

logger = logging.getLogger(__name__)

DEFAULT_DEPTH_CAP = 256
DEFAULT_INDEX_CAP = 10_000
# ρ 连续低于阈值这么多个索引后停止扫描
_THRESHOLD_RUN = 8


@dataclass
class Region:
    """ρ 成立的紧区域：s 在以 center 为心的闭圆盘，|z| ≤ z_radius"""
    center: complex = 0.0
    radius: float = 1.0
    z_radius: float = 1.0


@dataclass
class StepFamily:
    """带逐项上确界 ρ_j 的复合步骤族"""
    step: Callable[[int, Any, Any], Any]
    rho: Optional[Callable[[int], float]] = None
    domain: Region = field(default_factory=Region)
    name: str = ""


@dataclass
class ConvergenceReport:
    """收敛记录"""
    depth_used: int
    last_delta: float
    tail_bound: float
    converged: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def nest(f: StepFamily, s, n: int, m: int, seed):
    """
    由内向外求 h_n(s, h_{n+1}(s, ... h_m(s, seed)))

    恰好执行 m-n+1 次步骤。

    Raises:
        StepDomainError: 某一步超出定义域，携带失败的步骤序号
    """
    if n > m:
        raise ValueError(f"复合区间非法: n={n} > m={m}")

    value = seed
    for j in range(m, n - 1, -1):
        try:
            value = f.step(j, s, value)
        except StepDomainError:
            raise
        except (DomainError, ValueError) as e:
            raise StepDomainError(str(e), j) from e
    return value


def tail_norm_threshold(f: StepFamily, eps: float, index_cap: int = DEFAULT_INDEX_CAP) -> int:
    """
    最小的 N，使所有 n ≥ N 的 ρ(n) < eps（索引从 1 开始，N=0 表示处处低于阈值）

    Raises:
        NoThresholdError: 索引上限内 ρ 始终不低于 eps
    """
    if not (0 < eps < 1):
        raise ValueError(f"eps 必须在 (0, 1) 内: {eps}")
    if f.rho is None:
        raise NoThresholdError(f"步骤族 {f.name or '?'} 未提供 ρ")

    last_above = 0
    run = 0
    previous = float('inf')
    for n in range(1, index_cap + 1):
        r = f.rho(n)
        if r >= eps:
            last_above = n
            run = 0
        else:
            run = run + 1 if r <= previous else 0
            if run >= _THRESHOLD_RUN:
                return last_above + 1 if last_above else 0
        previous = r

    raise NoThresholdError(f"ρ 在 {index_cap} 个索引内未低于 {eps}")


def _relative_delta(a, b) -> float:
    return jet_distance(a, b) / max(1.0, jet_magnitude(a))


def converge(f: StepFamily, s, eps: float, seed=0.0, start: int = 1,
             depth_cap: int = DEFAULT_DEPTH_CAP, min_depth: int = 1):
    """
    无限复合的极限

    深度 m 自 ρ 给出的阈值（或 min_depth）起逐一加深，当相对增量 δ 加上按 ρ 比值估计的
    几何尾部 δ·q/(1-q) 不超过 eps 时停止。返回深度 m 的值及收敛记录。
    """
    if eps <= 0:
        raise ValueError(f"eps 必须为正: {eps}")

    m = start + max(min_depth, 1) - 1
    if f.rho is not None:
        try:
            m = max(m, start + tail_norm_threshold(f, min(eps, 0.5)) - 1)
        except NoThresholdError:
            logger.debug(f"{f.name}: ρ 无阈值，从深度 {m} 开始")
    m = min(m, depth_cap)

    prev = nest(f, s, start, m, seed)
    prev_delta = None
    delta = float('inf')
    tail = float('inf')

    while m < depth_cap:
        cur = nest(f, s, start, m + 1, seed)
        delta = _relative_delta(cur, prev)

        q = None
        if f.rho is not None:
            r_now, r_next = f.rho(m + 1), f.rho(m + 2)
            if r_now > 0:
                q = r_next / r_now
        elif prev_delta:
            q = delta / prev_delta

        if delta == 0.0:
            tail = 0.0
        elif q is not None and q < 1:
            tail = delta * q / (1.0 - q)
        else:
            tail = float('inf')

        if delta + tail <= eps:
            report = ConvergenceReport(m - start + 1, delta, tail, True)
            logger.debug(f"{f.name}: 深度 {report.depth_used} 收敛，δ={delta:.3e}")
            return prev, report

        prev, prev_delta = cur, delta
        m += 1

    logger.warning(f"{f.name}: 深度上限 {depth_cap} 内未收敛，δ={delta:.3e}")
    return prev, ConvergenceReport(m - start + 1, delta, tail, False)


def delta_profile(f: StepFamily, s, depths: List[int], seed=0.0) -> np.ndarray:
    """逐深度的增量 |φ_{m+1} - φ_m|，用于几何衰减回归"""
    values = [nest(f, s, 1, m, seed) for m in range(min(depths), max(depths) + 2)]
    out = []
    for m in depths:
        i = m - min(depths)
        out.append(jet_distance(values[i + 1], values[i]))
    return np.array(out)


def estimate_rho(step: Callable[[int, Any, Any], Any], region: Region, grid: int = 32) -> Callable[[int], float]:
    """
    在区域边界上网格采样估计 ρ_j

    对整函数步骤，边界上的最大模即闭圆盘上的上确界。
    """
    angles = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    s_pts = region.center + region.radius * np.exp(1j * angles)
    z_pts = region.z_radius * np.exp(1j * angles)
    S, Z = np.meshgrid(s_pts, z_pts, indexing='ij')
    cache: Dict[int, float] = {}

    def rho(j: int) -> float:
        if j not in cache:
            # max 与求值顺序无关
            cache[j] = float(np.max(np.abs(step(j, S, Z))))
        return cache[j]

    return rho


def identity_family() -> StepFamily:
    """恒等步骤族 h_j(s, z) = z"""
    return StepFamily(step=lambda j, s, z: z, rho=None, name="identity")


def test_comp_engine():
    """测试复合求值"""
    fam = StepFamily(step=lambda j, s, z: np.exp(s - j + z),
                     rho=lambda j: float(np.exp(2 - j)), name="phi")
    print(f"nest depth 40 at s=1: {nest(fam, 1.0, 1, 40, 0.0)}")
    print(f"N(0.01) = {tail_norm_threshold(fam, 0.01)}")
    value, report = converge(fam, 1.0, 1e-12)
    print(f"converge: {value}, {report}")


if __name__ == "__main__":
    test_comp_engine()
