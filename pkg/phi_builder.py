#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
辅助函数构建模块
整函数 φ(s)（实数、复数、jet、数组与层级索引形式）以及第 k 层辅助函数 Φ_k(t)
"""

import math
import logging
import threading
from functools import total_ordering
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.special import factorial

from comp_engine import (ConvergenceReport, Region, StepFamily, converge, nest,
                         DEFAULT_DEPTH_CAP)
from error_handler import (ContourError, DomainError, OverflowGuardError,
                           validate_grid_size)
from jet_arith import Jet, exp_of, polynomial, value_of

logger = logging.getLogger(__name__)

OVERFLOW_GUARD = 1e300
R_MAX = math.log(OVERFLOW_GUARD)
R_MIN = math.log(R_MAX)
MAX_GUARD_LEVEL = 10 ** 6

# 直接复合求 φ 的上限，更大的自变量沿函数方程爬升
PLAIN_PHI_LIMIT = 3.0
# Φ_k 深尾中改用前一层在 0 点的Taylor多项式
TAIL_RADIUS = 1e-3
TAIL_ORDER = 12
# jet 只在此量级以下显式携带
JET_GUARD = 1e30


@total_ordering
class GuardedReal:
    """
    层级索引形式的实数 exp∘…(level 次)…∘exp(residual)

    规范形：level 0 为普通浮点（< OVERFLOW_GUARD）；level ≥ 1 时 residual ∈ [R_MIN, R_MAX)。
    level 1 的值总能折叠为普通浮点，所以第一个非普通层是 level 2。
    """

    __slots__ = ('level', 'residual')

    def __init__(self, level: int, residual: float):
        if not math.isfinite(residual):
            raise OverflowGuardError(f"层级索引的残差非有限: {residual}")
        level = int(level)
        r = float(residual)

        if level == 0 and r >= OVERFLOW_GUARD:
            r = math.log(r)
            level = 1
        if level > 0:
            while r >= R_MAX:
                r = math.log(r)
                level += 1
            while level > 0 and r < R_MIN:
                r = math.exp(r)
                level -= 1
            if level == 1:
                r = math.exp(r)
                level = 0
        if level > MAX_GUARD_LEVEL:
            raise OverflowGuardError(f"层级 {level} 超出上限 {MAX_GUARD_LEVEL}")

        self.level = level
        self.residual = r

    @classmethod
    def from_float(cls, x: float) -> 'GuardedReal':
        return cls(0, x)

    @classmethod
    def from_log(cls, y: Union[float, 'GuardedReal']) -> 'GuardedReal':
        """值为 e^y 的数"""
        if isinstance(y, GuardedReal):
            return y.exp()
        if y < R_MAX:
            return cls(0, math.exp(y))
        return cls(1, y)

    @property
    def is_plain(self) -> bool:
        return self.level == 0

    def to_float(self) -> float:
        if self.level:
            raise OverflowGuardError(f"{self!r} 超出普通浮点范围")
        return self.residual

    def __float__(self):
        return self.to_float()

    def exp(self) -> 'GuardedReal':
        if self.level == 0:
            return GuardedReal.from_log(self.residual)
        return GuardedReal(self.level + 1, self.residual)

    def log(self) -> 'GuardedReal':
        if self.level == 0:
            if self.residual <= 0:
                raise DomainError(f"对数的自变量必须为正: {self.residual}")
            return GuardedReal(0, math.log(self.residual))
        if self.level == 2:
            return GuardedReal(0, math.exp(self.residual))
        return GuardedReal(self.level - 1, self.residual)

    def add_float(self, a: float) -> 'GuardedReal':
        """self + a"""
        if self.level == 0:
            return GuardedReal(0, self.residual + a)
        if self.level == 2 and a != 0:
            # log(self + a) = L + log1p(a / self)，L = log(self)
            big_log = math.exp(self.residual)
            if a > 0:
                ratio = math.exp(math.log(a) - big_log)
            else:
                ratio = -math.exp(math.log(-a) - big_log)
            return GuardedReal(1, big_log + math.log1p(ratio))
        return self

    def mul_exp(self, a: float) -> 'GuardedReal':
        """self · e^a（self > 0）"""
        if self.level == 0:
            if self.residual <= 0:
                raise DomainError(f"mul_exp 需要正数: {self.residual}")
            return GuardedReal.from_log(math.log(self.residual) + a)
        if self.level == 2:
            return GuardedReal(1, math.exp(self.residual) + a)
        return self

    def reciprocal(self) -> float:
        """1/self；level ≥ 1 的值小于 1e-300，按 0 计"""
        if self.level:
            return 0.0
        return 1.0 / self.residual

    def _key(self) -> Tuple[int, float]:
        return (self.level, self.residual)

    def __eq__(self, other):
        if not isinstance(other, GuardedReal):
            other = GuardedReal.from_float(float(other))
        return self._key() == other._key()

    def __lt__(self, other):
        if not isinstance(other, GuardedReal):
            other = GuardedReal.from_float(float(other))
        return self._key() < other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"GuardedReal(level={self.level}, residual={self.residual:.17g})"


def guarded_gap(a: GuardedReal, b: GuardedReal) -> float:
    """两个层级索引数的相对差（层级不同时视为 1）"""
    if a.level != b.level:
        return 1.0
    return abs(a.residual - b.residual) / max(1.0, abs(b.residual))


def _phi_step(j: int, s, z):
    return exp_of(s - j + z)


class PhiFunction:
    """φ(s) = Ω_{j≥1} e^{s-j+z} • z |_{z=0}"""

    def __init__(self, eps: float = 1e-13, depth_cap: int = DEFAULT_DEPTH_CAP,
                 contour_nodes: int = 64, contour_agreement: float = 1e-9):
        self.eps = eps
        self.depth_cap = depth_cap
        self.contour_nodes = contour_nodes
        self.contour_agreement = contour_agreement
        self._cache: Dict[Tuple[str, Any], Any] = {}
        self._lock = threading.Lock()
        self.last_report: Optional[ConvergenceReport] = None

    def family(self, center: complex = 0.0, radius: float = 1.0) -> StepFamily:
        """φ 的步骤族，ρ_j = e^{Re(c)+r+1-j}（|s-c| ≤ r，|z| ≤ 1）"""
        bound = float(np.real(center)) + radius + 1.0
        return StepFamily(step=_phi_step,
                          rho=lambda j: math.exp(bound - j),
                          domain=Region(center, radius, 1.0),
                          name="phi")

    def phi(self, s, eps: Optional[float] = None):
        """
        求 φ(s)，s 可为实数、复数或jet

        Raises:
            OverflowGuardError: 结果超出普通浮点，应改用 phi_log
        """
        eps = eps or self.eps
        if isinstance(s, (Jet, np.ndarray)):
            return self._evaluate(s, eps)

        kind = 'complex' if isinstance(s, complex) else 'real'
        key = (kind, s, eps)
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        value = self._evaluate(s, eps)
        with self._lock:
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[key] = value
        return value

    def _evaluate(self, s, eps: float):
        if isinstance(s, np.ndarray):
            center = float(np.max(np.real(s))) if s.size else 0.0
        else:
            center = float(np.real(value_of(s)))
        if center > 4.0:
            raise OverflowGuardError(f"φ({center}) 超出普通浮点范围，请使用 phi_log")

        with np.errstate(over='ignore', invalid='ignore'):
            value, report = converge(self.family(center), s, eps, seed=0.0,
                                     depth_cap=self.depth_cap)
        self.last_report = report

        magnitude = np.max(np.abs(value.coeffs if isinstance(value, Jet) else value))
        if not np.isfinite(magnitude) or magnitude >= OVERFLOW_GUARD:
            raise OverflowGuardError(f"φ 在 Re(s)={center} 处溢出，请使用 phi_log")
        return value

    def phi_array(self, points) -> np.ndarray:
        """numpy 数组上的向量化 φ"""
        pts = np.asarray(points)
        if pts.size == 0:
            return pts.astype(complex if np.iscomplexobj(pts) else float)
        return self._evaluate(pts, self.eps)

    def phi_log(self, t: float) -> GuardedReal:
        """
        φ(t) 的层级索引表示

        t ≤ 3 时直接复合；更大的 t 从 (1, 2] 中的基点出发，
        沿 φ(u+1) = exp(u + φ(u)) 逐步爬升。
        """
        if t <= PLAIN_PHI_LIMIT:
            return GuardedReal.from_float(self.phi(t))

        steps = math.ceil(t - 2.0)
        base = t - steps
        g = GuardedReal.from_float(self.phi(base))
        u = base
        for _ in range(steps):
            g = g.add_float(u).exp()
            u += 1.0
        return g

    def phi_residual(self, t: float) -> float:
        """函数方程残差 |φ(t+1) - e^{t+φ(t)}| / max(1, |φ(t+1)|)，溢出时改在对数空间比较"""
        try:
            a = self.phi(t)
            b = self.phi(t + 1.0)
            rhs = math.exp(t + a)
            return abs(b - rhs) / max(1.0, abs(b))
        except OverflowGuardError:
            lhs = self.phi_log(t + 1.0).log()
            rhs = self.phi_log(t).add_float(t)
            return guarded_gap(lhs, rhs)

    def complex_residual(self, s: complex) -> float:
        """复平面上的函数方程残差"""
        a = self.phi(complex(s))
        b = self.phi(complex(s) + 1.0)
        return abs(b - np.exp(s + a)) / max(1.0, abs(b))

    def cauchy_derivative(self, s0: complex, k: int, radius: float = 1.0,
                          nodes: Optional[int] = None, max_nodes: int = 4096) -> complex:
        """
        围道积分求 φ^(k)(s0)

        周期解析被积函数上的梯形公式，节点数翻倍直到相邻两次结果一致。

        Raises:
            ContourError: 围道上出现非有限采样
        """
        if k < 0 or radius <= 0:
            raise ValueError(f"需要 k ≥ 0 且 radius > 0: k={k}, radius={radius}")

        n = nodes or self.contour_nodes
        previous = self._trapezoid(s0, k, radius, n)
        while n < max_nodes:
            n *= 2
            current = self._trapezoid(s0, k, radius, n)
            if abs(current - previous) <= self.contour_agreement * max(1.0, abs(current)):
                return current
            previous = current
        logger.warning(f"围道节点数达到上限 {max_nodes}，返回最后结果")
        return previous

    def _trapezoid(self, s0: complex, k: int, radius: float, n: int) -> complex:
        theta = 2.0 * np.pi * np.arange(n) / n
        xi = s0 + radius * np.exp(1j * theta)
        try:
            samples = self.phi_array(xi)
        except OverflowGuardError as e:
            raise ContourError(f"围道采样溢出: {e}")
        if not np.all(np.isfinite(samples)):
            raise ContourError("围道采样出现非有限值")
        return complex(factorial(k) / (radius ** k) * np.mean(samples * np.exp(-1j * k * theta)))

    def contour_max(self, s0: complex, radius: float = 1.0, n: int = 256) -> float:
        theta = 2.0 * np.pi * np.arange(n) / n
        return float(np.max(np.abs(self.phi_array(s0 + radius * np.exp(1j * theta)))))


def phi_grid(phi: PhiFunction, re0: float, re1: float, im0: float, im1: float,
             n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """复平面网格上的 φ，返回 (re, im, φ) 展平数组"""
    validate_grid_size(n * n)
    re, im = np.meshgrid(np.linspace(re0, re1, n), np.linspace(im0, im1, n), indexing='ij')
    values = phi.phi_array(re + 1j * im)
    return re.ravel(), im.ravel(), values.ravel()


class BigPhi:
    """
    第 k 层辅助函数 Φ_k(t) = Ω_{j≥1} e^{t-j}·E_{k-1}(x) • x |_{x=0}

    满足 Φ_k(t+1) = e^t · E_{k-1}(Φ_k(t))。
    """

    def __init__(self, predecessor, eps: float = 1e-12, depth_cap: int = DEFAULT_DEPTH_CAP):
        self.predecessor = predecessor
        self.eps = eps
        self.depth_cap = depth_cap
        self.last_report: Optional[ConvergenceReport] = None

    @property
    def k(self) -> int:
        return self.predecessor.k + 1

    def _pred(self, x):
        # 深尾 |x| 很小时 E_{k-1}(x) 由 0 点的Taylor多项式给出
        if self.predecessor.k >= 2 and abs(value_of(x)) < TAIL_RADIUS:
            return polynomial(self.predecessor.taylor_at_zero(TAIL_ORDER), x)
        return self.predecessor.evaluate(x, eps=self.eps / 10)

    def family(self, t0: float) -> StepFamily:
        bound = t0 + 2.0

        def step(j, t, x):
            return exp_of(t - j) * self._pred(x)

        return StepFamily(step=step, rho=lambda j: math.exp(bound - j),
                          domain=Region(t0, 1.0, 1.0), name=f"Phi_{self.k}")

    def evaluate(self, t, eps: Optional[float] = None):
        """
        Φ_k(t)（浮点或jet）

        先对深尾收敛求极限，再一次性套上前 N 个需要精确前一层的步骤。
        """
        eps = eps or self.eps
        t0 = value_of(t)
        fam = self.family(t0)
        head = max(0, math.ceil(t0 + 8.0))

        tail, report = converge(fam, t, eps, seed=0.0, start=head + 1,
                                depth_cap=head + self.depth_cap)
        value = nest(fam, t, 1, head, tail) if head >= 1 else tail
        self.last_report = ConvergenceReport(report.depth_used + head, report.last_delta,
                                             report.tail_bound, report.converged)

        v0 = value_of(value)
        if not math.isfinite(v0) or abs(v0) >= OVERFLOW_GUARD:
            raise OverflowGuardError(f"Φ_{self.k}({t0}) 超出普通浮点范围")
        return value

    def climb(self, u: float, current: GuardedReal) -> GuardedReal:
        """由 Φ(u) 得 Φ(u+1) = e^u · E_{k-1}(Φ(u))"""
        return self.predecessor.evaluate_guarded(current).mul_exp(u)

    def climb_jet(self, u: Jet, current: Jet) -> Jet:
        return exp_of(u) * self.predecessor.evaluate(current, eps=self.eps / 10)

    def guarded(self, t: float) -> GuardedReal:
        """Φ_k(t) 的层级索引形式"""
        if t <= 2.0:
            try:
                return GuardedReal.from_float(self.evaluate(t))
            except OverflowGuardError:
                pass
        return self.climb(t - 1.0, self.guarded(t - 1.0))

    def chain(self, t: float, count: int) -> List[Optional[GuardedReal]]:
        """[Φ(t), Φ(t+1), ..., Φ(t+count)]，超出层级索引范围的项为 None"""
        values: List[Optional[GuardedReal]] = [self.guarded(t)]
        for i in range(count):
            prev = values[-1]
            if prev is None:
                values.append(None)
                continue
            try:
                values.append(self.climb(t + i, prev))
            except OverflowGuardError:
                values.append(None)
        return values


def big_phi(level, t, eps: Optional[float] = None):
    """Φ_k(t)，level 为已构建的第 k 层"""
    return level.big_phi.evaluate(t, eps)


def big_phi_guarded(level, t: float) -> GuardedReal:
    return level.big_phi.guarded(t)


def test_phi_builder():
    """测试辅助函数"""
    phi = PhiFunction()
    print(f"φ(1) = {phi.phi(1.0)}")
    print(f"φ(-10) = {phi.phi(-10.0)}")
    print(f"phi_log(4) = {phi.phi_log(4.0)}")
    print(f"残差 t=1: {phi.phi_residual(1.0):.3e}")
    print(f"φ'(0.5) = {phi.cauchy_derivative(0.5, 1)}")


if __name__ == "__main__":
    test_phi_builder()
