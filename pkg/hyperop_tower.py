#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
超运算塔模块
由 φ 经 τ 递推构造四级运算 𝓕 = e↑↑t，再由 Φ_k 经 Λ 递推逐层构造 E_k = e↑^k t，
包括归一化、求逆、定义域记录以及带jet的导数版本
"""

import math
import logging
import threading
from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from comp_engine import ConvergenceReport
from config import Config, default_config
from error_handler import (ConstructionError, ConvergenceError, DomainError, InvalidJetError,
                           NormalizationError, OverflowGuardError, RangeError,
                           ValidationError, WindowError)
from jet_arith import Jet, exp_of, inverse_jet_at, jet_distance, log1p_of, log_of, value_of
from phi_builder import (JET_GUARD, BigPhi, GuardedReal, PhiFunction)

logger = logging.getLogger(__name__)

# Abel 约化与边界附近迭代的步数上限
_REDUCTION_CAP = 10_000
_CACHE_LIMIT = 100_000
# 窗口选择时jet收缩的采样点数（含窗口两端）
_CONTRACTION_SAMPLES = 5


def _plain(x):
    """可化为普通浮点的层级索引数化为浮点，其余原样返回"""
    if isinstance(x, GuardedReal) and x.is_plain:
        return x.to_float()
    return x


@dataclass
class CorrectionSequence:
    """τ 或 Λ 修正项的一次求值记录"""
    kind: str
    depth: int
    values: List[float]
    report: ConvergenceReport
    contraction: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['report'] = self.report.to_dict()
        return data


@dataclass
class AlphaEstimate:
    """αₖ 的估计"""
    value: float
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0


class ExpLevel:
    """第 1 层：E_1 = exp，𝒜_1 = log"""

    k = 1

    def __init__(self):
        self.omega = 0.0
        self.alpha = 0.0
        self.alpha_converged = True
        self.window_T = None
        self.predecessor = None
        self.tolerance = 0.0

    def evaluate(self, x, eps: Optional[float] = None, extra_shift: int = 0):
        return exp_of(x)

    def evaluate_guarded(self, x) -> GuardedReal:
        if isinstance(x, GuardedReal):
            return x.exp()
        return GuardedReal.from_log(x)

    def inverse(self, x, eps: Optional[float] = None):
        if isinstance(x, GuardedReal):
            return self.inverse_guarded(x)
        if value_of(x) <= 0:
            raise RangeError(f"log 的自变量必须为正: {value_of(x)}", alpha=0.0)
        return log_of(x)

    def inverse_guarded(self, g: GuardedReal):
        result = g.log()
        return result.to_float() if result.is_plain else result

    def taylor_at_zero(self, order: int) -> np.ndarray:
        return 1.0 / np.cumprod(np.r_[1.0, np.arange(1, order + 1)])


class _CorrectedLevel:
    """
    由辅助函数加修正项构造的层（τ 路径与 Λ 路径共用）

    子类提供窗口内的 F̃(s) 与辅助函数的层级索引值；本类负责落点平移、
    沿前一层的逆/正向行走、Abel 约化求逆、窗口选择与归一化。
    """

    kind = ''

    def __init__(self, k: int, predecessor, config: Optional[Config] = None):
        self.k = k
        self.predecessor = predecessor
        self.config = config or default_config
        self.tolerance = self.config.tolerance
        self.eps = self.config.internal_eps
        self.depth_cap = self.config.depth_cap

        self.window_T: Optional[float] = None
        self.omega = 0.0
        self.alpha: Optional[float] = None
        self.alpha_converged = True
        self.window_factors: List[float] = []
        self.window_jet_contraction: Optional[float] = None
        self.normalization_trace: List[Tuple[float, float, float, float]] = []

        self._tilde_cache: Dict[Tuple[float, float], float] = {}
        self._inverse_cache: Dict[float, float] = {}
        self._taylor: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    # ---- 子类接口 ----

    def aux_guarded(self, t: float) -> GuardedReal:
        raise NotImplementedError

    def aux_jet(self, t: Jet) -> Jet:
        raise NotImplementedError

    def tilde(self, s, eps: Optional[float] = None):
        raise NotImplementedError

    def step_map(self, t: Jet, next_correction: Jet) -> Jet:
        raise NotImplementedError

    # ---- 缓存 ----

    def _remember(self, cache: Dict, key, value):
        with self._lock:
            if len(cache) > _CACHE_LIMIT:
                cache.clear()
            cache[key] = value

    def _tilde_cached(self, s, eps: Optional[float] = None):
        eps = eps or self.eps
        if isinstance(s, Jet):
            return self.tilde(s, eps)
        key = (float(s), eps)
        cached = self._tilde_cache.get(key)
        if cached is None:
            cached = self.tilde(s, eps)
            self._remember(self._tilde_cache, key, cached)
        return cached

    def clear_caches(self):
        with self._lock:
            self._tilde_cache.clear()
            self._inverse_cache.clear()
            self._taylor.clear()

    # ---- 定义域 ----

    @property
    def is_even(self) -> bool:
        return self.k % 2 == 0

    def _check_domain(self, t0: float):
        if self.is_even and self.alpha is not None and t0 <= self.alpha + self.config.edge_refusal:
            raise DomainError(f"E_{self.k} 的自变量 {t0:.17g} 不在定义域 (α, ∞) 内", alpha=self.alpha)

    def _check_range(self, x0: float):
        if not self.is_even and self.alpha is not None and x0 <= self.alpha:
            raise RangeError(f"𝒜_{self.k} 的自变量 {x0:.17g} 不在 (α, ∞) 内", alpha=self.alpha)

    # ---- 求值 ----

    def _landing(self, s0: float) -> int:
        """使 s0 + m ∈ [T, T+1) 的整数 m"""
        T = self.window_T
        m = math.ceil(T - s0)
        if s0 + m >= T + 1.0:
            m -= 1
        return m

    def walk(self, s, extra_shift: int = 0, eps: Optional[float] = None):
        """
        未归一化的 F̃ 在任意点的延拓

        平移到窗口求 F̃，再用 𝒜_{k-1} 向下或 E_{k-1} 向上走回。
        落点在窗口之上时 F̃ 可能是层级索引数，向下走完后须回到普通浮点。
        """
        m = self._landing(value_of(s)) + extra_shift
        value = self._tilde_cached(s + m, eps)
        try:
            if m >= 0:
                for _ in range(m):
                    value = self.predecessor.inverse(value)
            else:
                if isinstance(value, GuardedReal):
                    value = value.to_float()
                for _ in range(-m):
                    value = self.predecessor.evaluate(value)
        except RangeError as e:
            raise DomainError(f"E_{self.k} 在 {value_of(s) - self.omega:.17g} 处行走越界: {e}",
                              alpha=self.alpha) from e
        if isinstance(value, GuardedReal):
            value = value.to_float()
        return value

    def evaluate(self, t, eps: Optional[float] = None, extra_shift: int = 0):
        """E_k(t)，t 可为浮点或jet"""
        self._check_domain(value_of(t))
        return self.walk(t + self.omega, extra_shift, eps)

    def evaluate_guarded(self, x) -> GuardedReal:
        """E_k(x) 的层级索引形式，向上行走时不受普通浮点上限约束"""
        if isinstance(x, GuardedReal):
            if not x.is_plain:
                raise OverflowGuardError(f"E_{self.k} 的自变量 {x!r} 超出层级索引可表示范围")
            x = x.to_float()
        self._check_domain(x)

        s0 = x + self.omega
        m = self._landing(s0)
        if m >= 0:
            return GuardedReal.from_float(self.walk(s0))

        value = self._tilde_cached(s0 + m)
        if not isinstance(value, GuardedReal):
            value = GuardedReal.from_float(value)
        remaining = -m
        while remaining:
            if self.predecessor.k == 1 and not value.is_plain:
                return GuardedReal(value.level + remaining, value.residual)
            value = self.predecessor.evaluate_guarded(value)
            remaining -= 1
        return value

    def landing_report(self, t: float) -> CorrectionSequence:
        """E_k(t) 落点处修正项的收敛记录"""
        s0 = t + self.omega
        _, seq = self.correction(s0 + self._landing(s0))
        return seq

    def taylor_at_zero(self, order: int) -> np.ndarray:
        if order not in self._taylor:
            self._taylor[order] = self.evaluate(Jet.variable(0.0, order)).coeffs.copy()
        return self._taylor[order]

    # ---- 求逆 ----

    def inverse(self, x, eps: Optional[float] = None):
        """𝒜_k(x)：Abel 约化到 [0,1) 后在 [-1,0] 上求根"""
        if isinstance(x, GuardedReal):
            return self.inverse_guarded(x)
        if isinstance(x, Jet):
            y0 = self.inverse(x.value)
            f_jet = self.evaluate(Jet.variable(y0, x.order))
            return inverse_jet_at(f_jet, y0, x)

        x0 = float(x)
        self._check_range(x0)
        cached = self._inverse_cache.get(x0)
        if cached is not None:
            return cached

        v = x0
        shift = 0
        steps = 0
        while v >= 1.0:
            v = self.predecessor.inverse(v)
            shift += 1
        while v < 0.0:
            v = self.predecessor.evaluate(v)
            shift -= 1
            steps += 1
            if steps > _REDUCTION_CAP:
                raise ConvergenceError(f"𝒜_{self.k}({x0}) 的约化在 {_REDUCTION_CAP} 步内未结束")

        y = -1.0 if v == 0.0 else self._root(v)
        result = y + shift
        if self.is_even and self.alpha is not None and result <= self.alpha + self.config.edge_refusal:
            # E_k 自身会拒绝这个点
            raise RangeError(f"𝒜_{self.k}({x0:.17g}) = {result:.17g} 与 α 相距不足 "
                             f"{self.config.edge_refusal:g}，双精度无法分辨", alpha=self.alpha)
        self._remember(self._inverse_cache, x0, result)
        return result

    def _root(self, v: float) -> float:
        """E_k(y) = v，v ∈ (0, 1)"""
        def f(y):
            return self.walk(y + self.omega) - v

        lo, hi = -1.0, 0.0
        floor = (self.alpha + self.config.edge_refusal) if (self.is_even and self.alpha is not None) else -math.inf
        width = 1.0
        for _ in range(self.config.bracket_expansions):
            flo, fhi = f(lo), f(hi)
            if flo <= 0.0 <= fhi:
                break
            if flo > 0:
                lo = max(lo - width, floor)
            if fhi < 0:
                hi += width
            width *= 2.0
        else:
            raise ConvergenceError(f"𝒜_{self.k}: 括号扩张 {self.config.bracket_expansions} 次仍未变号")

        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    def inverse_guarded(self, g: GuardedReal):
        """𝒜_k 作用于层级索引数：𝒜_k(X) = 1 + 𝒜_k(𝒜_{k-1}(X))"""
        if g.is_plain:
            return self.inverse(g.to_float())
        if self.predecessor.k == 1:
            return g.level + self.inverse(g.residual)
        inner = self.predecessor.inverse_guarded(g)
        return 1.0 + self.inverse(inner)

    # ---- 构造 ----

    def _contraction_factor(self, t: float) -> float:
        """修正一步的标量收缩因子 𝒜'_{k-1}(Φ(t+1))，用中心差分估计"""
        try:
            z = self.aux_guarded(t + 1.0)
        except OverflowGuardError:
            return 0.0
        if not z.is_plain:
            return 0.0
        z = z.to_float()
        h = 1e-6 * max(1.0, abs(z))
        return abs(self.predecessor.inverse(z + h) - self.predecessor.inverse(z - h)) / (2.0 * h)

    @property
    def contraction_order(self) -> int:
        return min(self.config.jet_order, 4)

    def jet_contraction(self, t0: float, order: Optional[int] = None) -> Optional[List[float]]:
        """
        修正一步映射在 t0 处的逐系数敏感度 λ_j

        对修正项在 t0+1 处jet的第 j 个Taylor系数做差分扰动，λ_j 取输出系数（l ≥ j）
        变化的最大值。修正项的jet不可表示时以标量值为常数jet；映射本身超出jet范围时返回 None。
        """
        order = self.contraction_order if order is None else order
        t = Jet.variable(t0, order)
        try:
            try:
                nxt, _ = self.correction(Jet.variable(t0 + 1.0, order))
            except (OverflowGuardError, InvalidJetError):
                value, _ = self.correction(t0 + 1.0)
                nxt = Jet.constant(value, order)
            base = self.step_map(t, nxt)
            lambdas = []
            for j in range(order + 1):
                h = 1e-6 * max(1.0, abs(nxt.coeffs[j]))
                bumped = Jet(nxt.coeffs + h * (np.arange(order + 1) == j))
                out = self.step_map(t, bumped)
                lambdas.append(float(np.max(np.abs(out.coeffs[j:] - base.coeffs[j:]))) / h)
        except (OverflowGuardError, InvalidJetError):
            return None
        return lambdas

    def _window_jet_contraction(self, T: float) -> float:
        """[T, T+1] 上各采样点 λ_j 的最大值，不可表示的点不计"""
        worst = 0.0
        for t0 in np.linspace(T, T + 1.0, _CONTRACTION_SAMPLES):
            lambdas = self.jet_contraction(float(t0))
            if lambdas is not None:
                worst = max(worst, max(lambdas))
        return worst

    def find_window(self) -> float:
        """
        最小的半整数 T ≥ 0，使 Φ(T+1) ≥ 2、[T, T+2] 上的标量收缩因子 ≤ 1/2，
        且 k ≤ jet_window_max_level 时 [T, T+1] 上jet的逐系数敏感度 ≤ jet_contraction_bound
        """
        for i in range(0, 2 * self.config.window_cap + 1):
            T = 0.5 * i
            try:
                if self.aux_guarded(T + 1.0) < 2.0:
                    continue
            except OverflowGuardError:
                pass
            factors = [self._contraction_factor(T + 0.5 * j) for j in range(5)]
            if max(factors) > 0.5:
                continue
            if self.k <= self.config.jet_window_max_level:
                # correction() 以 window_T 判断自变量是否在窗口内
                self.window_T = T
                worst = self._window_jet_contraction(T)
                if worst > self.config.jet_contraction_bound:
                    logger.debug(f"第 {self.k} 层 T = {T}: jet敏感度 {worst:.3g}，右移窗口")
                    continue
                self.window_jet_contraction = worst
            self.window_factors = factors
            return T
        self.window_T = None
        raise ConstructionError(f"第 {self.k} 层在 T ≤ {self.config.window_cap} 内找不到收缩窗口")

    def _check_window_monotone(self):
        samples = [self.window_T + 0.25 * j for j in range(5)]
        values = [self._tilde_cached(s) for s in samples]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConstructionError(
                f"第 {self.k} 层的 F̃ 在窗口内不单调: "
                + ", ".join(f"F̃({s:g})={v!r}" for s, v in zip(samples, values)))

    def normalize(self) -> float:
        """
        求 ω 使 F̃(ω) = 1

        括号 [a, b] 始终满足 F̃(a) < 1 ≤ F̃(b)；窗口内不成立时用前一层的逆整数下移。
        二分到宽度 normalize_width 后做一次割线修正。

        Raises:
            NormalizationError: 下移次数超过上限
        """
        def F(u):
            return self.walk(u)

        a, b = self.window_T, self.window_T + 1.0
        fa, fb = F(a), F(b)
        if fb < 1.0:
            raise NormalizationError(f"第 {self.k} 层 F̃({b}) = {fb} < 1，窗口选择有误")

        shifts = 0
        while fa >= 1.0:
            b, fb = a, fa
            a -= 1.0
            shifts += 1
            if shifts > self.config.shift_cap:
                raise NormalizationError(f"第 {self.k} 层下移 {self.config.shift_cap} 次仍未括住 1")
            fa = F(a)

        trace = [(a, b, fa, fb)]
        while b - a > self.config.normalize_width:
            mid = 0.5 * (a + b)
            fm = F(mid)
            if fm < 1.0:
                a, fa = mid, fm
            else:
                b, fb = mid, fm
            trace.append((a, b, fa, fb))

        omega = b
        if fb != fa:
            omega = min(max(a + (1.0 - fa) * (b - a) / (fb - fa), a), b)

        self.normalization_trace = trace
        logger.debug(f"第 {self.k} 层归一化: ω = {omega:.17g}，{len(trace)} 步，下移 {shifts} 次")
        return omega


class TetrationFunction(_CorrectedLevel):
    """
    四级运算 𝓕(t) = φ(t+ω) + τ(t+ω)（窗口内），其余由函数方程平移得到

    τ(s) = s + log(1 + τ(s+1)/φ(s+1))，自 τ_0 = 0 展开。
    """

    kind = 'tau'

    def __init__(self, phi: Optional[PhiFunction] = None, config: Optional[Config] = None):
        super().__init__(2, ExpLevel(), config)
        self.phi = phi or PhiFunction(eps=self.eps, depth_cap=self.depth_cap)
        self.alpha = -2.0

    def construct(self) -> 'TetrationFunction':
        self.window_T = self.find_window()
        self._check_window_monotone()
        self.omega = self.normalize()
        logger.info(f"四级运算构建完成: T = {self.window_T}, ω = {self.omega:.17g}")
        return self

    def aux_guarded(self, t: float) -> GuardedReal:
        return self.phi.phi_log(t)

    def aux_jet(self, t: Jet) -> Jet:
        return self.phi.phi(t)

    def _phi_chain(self, t0: float, eps: float, depth: Optional[int]) -> Tuple[List[GuardedReal], int, float, float]:
        """[φ(t), φ(t+1), ..., φ(t+n+1)] 的层级索引值，以及停止深度 n 与最后两个界"""
        chain = [self.phi.phi_log(t0)]

        def grow():
            u = t0 + len(chain) - 1
            chain.append(chain[-1].add_float(u).exp())

        recip = 1.0
        bound = prev_bound = math.inf
        n = 0
        limit = depth if depth is not None else self.depth_cap
        while n < limit:
            n += 1
            grow()
            recip *= chain[n].reciprocal()
            prev_bound, bound = bound, abs(t0 + n) * recip
            if depth is None and bound < eps:
                break
        grow()
        return chain, n, bound, prev_bound

    def _unroll(self, t, chain: List[GuardedReal], n: int, phi_jets: Optional[Dict[int, Jet]] = None):
        """τ_n(t)，自 τ_0(t+n) = 0 向下展开"""
        is_jet = isinstance(t, Jet)
        val = Jet.constant(0.0, t.order) if is_jet else 0.0
        for i in range(n - 1, -1, -1):
            if is_jet:
                denom = phi_jets.get(i + 1)
                val = (t + i) + (log1p_of(val / denom) if denom is not None else 0.0)
            else:
                val = (t + i) + log1p_of(val * chain[i + 1].reciprocal())
        return val

    def tau(self, t, eps: Optional[float] = None, depth: Optional[int] = None):
        """
        修正项 τ(t) 及其记录

        Args:
            t: 浮点或jet；未指定 depth 时必须在窗口内
            eps: 停止阈值，按界 (t+n)/∏φ(t+k) 判断
            depth: 指定时直接返回 τ_depth(t)

        Raises:
            WindowError: t 在窗口之下
        """
        eps = eps or self.eps
        t0 = value_of(t)
        if depth is None and self.window_T is not None and t0 < self.window_T - 1e-12:
            raise WindowError(f"τ 的自变量 {t0} 低于窗口 T = {self.window_T}")
        if depth == 0:
            zero = Jet.constant(0.0, t.order) if isinstance(t, Jet) else 0.0
            return zero, CorrectionSequence('tau', 0, [0.0], ConvergenceReport(0, 0.0, 0.0, True))

        chain, n, bound, prev_bound = self._phi_chain(t0, eps, depth)

        phi_jets = None
        if isinstance(t, Jet):
            phi_jets = {}
            for i in range(1, n + 2):
                if i < len(chain) and chain[i].is_plain and chain[i].to_float() <= JET_GUARD:
                    phi_jets[i] = self.phi.phi(t + i)

        value = self._unroll(t, chain, n, phi_jets)
        if depth is not None:
            delta = bound
        else:
            # 逐系数比较相邻两个深度
            deeper = self._unroll(t, chain, n + 1, phi_jets)
            delta = jet_distance(deeper, value)
            value = deeper

        q = bound / prev_bound if (prev_bound not in (0.0, math.inf) and bound > 0) else 0.0
        tail = delta * q / (1.0 - q) if q < 1 else math.inf
        report = ConvergenceReport(n, delta, tail, delta <= eps)
        if not report.converged:
            logger.warning(f"τ({t0}) 在深度 {n} 未收敛，δ={delta:.3e}")
        seq = CorrectionSequence('tau', n, [float(value_of(value))], report, q)
        return value, seq

    def correction(self, t, eps: Optional[float] = None):
        return self.tau(t, eps)

    def tilde(self, s, eps: Optional[float] = None):
        """F̃(s) = φ(s) + τ(s)，s 在窗口内"""
        value, _ = self.tau(s, eps)
        return self.phi.phi(s) + value

    def step_map(self, t: Jet, next_correction: Jet) -> Jet:
        denom = self.phi.phi(t + 1.0)
        return t + log1p_of(next_correction / denom)

    def tetration(self, t, eps: Optional[float] = None, extra_shift: int = 0):
        """𝓕(t)，t > -2"""
        return self.evaluate(t, eps, extra_shift)

    def tetration_jet(self, t: float, order: int = 6) -> Jet:
        return self.evaluate(Jet.variable(t, order))

    def slog(self, x, eps: Optional[float] = None):
        """超对数 𝓕⁻¹(x)"""
        return self.inverse(x, eps)

    def tetration_iterated_log(self, t: float, n: Optional[int] = None) -> float:
        """
        第三条求值路径：对 φ(t+ω+n) 的层级索引值连续取 n 次对数
        """
        self._check_domain(t)
        s = t + self.omega
        if n is None:
            n = max(4, math.ceil(4.0 - s))
        g = self.phi.phi_log(s + n)
        for _ in range(n):
            g = g.log()
        return g.to_float()


class HyperOpLevel(_CorrectedLevel):
    """
    第 k 层 E_k(t) = Φ_k(t+ωₖ) + Λ(t+ωₖ)（窗口内）

    Λ(t) = 𝒜_{k-1}(Φ(t+1) + Λ(t+1)) - Φ(t)，自 Λ_0 = 0 展开。
    """

    kind = 'lambda'

    def __init__(self, k: int, predecessor, config: Optional[Config] = None):
        if k < 2:
            raise ValidationError(f"HyperOpLevel 需要 k ≥ 2: {k}")
        super().__init__(k, predecessor, config)
        self.big_phi = BigPhi(predecessor, eps=self.eps, depth_cap=self.depth_cap)

    def construct(self) -> 'HyperOpLevel':
        self.window_T = self.find_window()
        self._check_window_monotone()
        self.omega = self.normalize()
        estimate = alpha_estimate(self)
        self.alpha = estimate.value
        self.alpha_converged = estimate.converged
        logger.info(f"第 {self.k} 层构建完成: T = {self.window_T}, ω = {self.omega:.17g}, "
                    f"α = {self.alpha:.17g}")
        return self

    def aux_guarded(self, t: float) -> GuardedReal:
        return self.big_phi.guarded(t)

    def aux_jet(self, t: Jet) -> Jet:
        return self.big_phi.evaluate(t)

    def _lambda_scalar(self, t0: float, eps: float):
        """
        标量 Λ 递推；返回 (F̃(t), 各索引的 Λ, Φ 链, 顶端索引, 记录)

        Φ(t) 超出普通浮点时 Λ(t) 记为 0，F̃(t) 以层级索引数返回。
        """
        phis: List[Optional[GuardedReal]] = [self.big_phi.guarded(t0)]

        recip = 1.0
        bound = prev_bound = math.inf
        m = 0
        while m < self.depth_cap:
            m += 1
            prev = phis[-1]
            nxt = None
            if prev is not None:
                try:
                    nxt = self.big_phi.climb(t0 + m - 1, prev)
                except OverflowGuardError:
                    nxt = None
            phis.append(nxt)
            recip *= nxt.reciprocal() if nxt is not None else 0.0
            prev_bound, bound = bound, abs(t0 + m) * recip
            if bound < eps:
                break

        # Φ(t+m) 不可表示时从 Λ(t+m-1) = 0 开始
        top = m if phis[m] is not None else m - 1
        lams = [0.0] * (top + 1)
        tilde = _plain(phis[0])
        lam = 0.0
        for i in range(top - 1, -1, -1):
            if not phis[i].is_plain and i > 0:
                lam = 0.0
                continue
            a = _plain(self.predecessor.inverse_guarded(phis[i + 1].add_float(lam)))
            if i == 0:
                tilde = a
            if phis[i].is_plain:
                lam = (a.to_float() if isinstance(a, GuardedReal) else a) - phis[i].to_float()
                lams[i] = lam

        q = bound / prev_bound if (prev_bound not in (0.0, math.inf) and bound > 0) else 0.0
        tail = bound * q / (1.0 - q) if q < 1 else math.inf
        report = ConvergenceReport(m, bound, tail, bound < eps)
        if not report.converged:
            logger.warning(f"Λ_{self.k}({t0}) 在深度 {m} 未收敛，界 {bound:.3e}")
        seq = CorrectionSequence('lambda', m, lams, report, q)
        return tilde, lams, phis, top, seq

    def _lambda_jet(self, t: Jet, eps: float):
        """Λ 的jet；Φ 超过 JET_GUARD 的索引处改用常数（k=2 时为恒等）起点"""
        t0 = t.value
        _, lams, phis, top, seq = self._lambda_scalar(t0, eps)

        jets = [self.big_phi.evaluate(t)]
        for i in range(1, top + 1):
            g = phis[i]
            if g is None or not g.is_plain or abs(g.to_float()) > JET_GUARD:
                break
            jets.append(self.big_phi.climb_jet(t + (i - 1), jets[-1]))
        J = len(jets)

        if J == top + 1:
            lam = Jet.constant(0.0, t.order)
            start = top - 1
        else:
            idx = J - 1
            lam = self._top_lambda_jet(t + idx, jets[idx], lams[idx])
            start = idx - 1

        tilde = jets[0] + lam
        for i in range(start, -1, -1):
            tilde = self.predecessor.inverse(jets[i + 1] + lam)
            lam = tilde - jets[i]
        return tilde, lam, seq

    def correction(self, t, eps: Optional[float] = None):
        """Λ(t) 及其记录；t 在窗口内"""
        eps = eps or self.eps
        t0 = value_of(t)
        if self.window_T is not None and t0 < self.window_T - 1e-12:
            raise WindowError(f"Λ 的自变量 {t0} 低于窗口 T = {self.window_T}")
        if isinstance(t, Jet):
            _, lam, seq = self._lambda_jet(t, eps)
            return lam, seq
        _, lams, _, _, seq = self._lambda_scalar(t0, eps)
        return lams[0], seq

    def tilde(self, s, eps: Optional[float] = None):
        """F̃(s) = Φ(s) + Λ(s)，直接取 𝒜(Φ(s+1) + Λ(s+1)) 以免相消"""
        eps = eps or self.eps
        if isinstance(s, Jet):
            tilde, _, _ = self._lambda_jet(s, eps)
            return tilde
        tilde, _, _, _, _ = self._lambda_scalar(float(s), eps)
        return tilde

    def _log_aux_next(self, u: Jet, y: Jet) -> Optional[Jet]:
        """log Φ(u+1) = u + log E_{k-1}(y)，y = Φ(u)；k ≥ 4 时没有闭式，返回 None"""
        if self.k == 2:
            return u + y
        if self.k == 3:
            # log E_2(y) = E_2(y-1)
            z = u + self.predecessor.evaluate(y - 1.0)
            if not abs(z.value) < JET_GUARD:
                raise OverflowGuardError(f"log Φ_3({u.value + 1.0}) 超出jet范围")
            return z
        return None

    def _top_lambda_jet(self, u: Jet, y: Jet, value: float) -> Jet:
        """
        Φ(u+1) 超出jet范围时的 Λ(u)

        忽略 Λ(u+1)：k=2 时为 u，k=3 时为 1 + 𝒜_2(log Φ(u+1)) - y；常数项换成标量递推的值。
        k ≥ 4 或对数形式仍溢出时退化为常数jet。
        """
        if self.k == 2:
            return u + (value - u.value)
        try:
            z = self._log_aux_next(u, y)
            if z is not None:
                approx = 1.0 + self.predecessor.inverse(z) - y
                return approx + (value - approx.value)
        except (OverflowGuardError, InvalidJetError):
            pass
        return Jet.constant(value, u.order)

    def step_map(self, t: Jet, next_correction: Jet) -> Jet:
        """一步修正 Λ(t) = 𝒜_{k-1}(Φ(t+1) + Λ(t+1)) - Φ(t)，按jet求值"""
        aux_now = self.big_phi.evaluate(t)
        z = self._log_aux_next(t, aux_now)
        if z is not None:
            # Φ(t+1) + c = exp(z + log1p(c·e^{-z}))，不必构造 Φ(t+1)
            shift = log1p_of(next_correction * exp_of(-z))
            if self.k == 2:
                return t + shift
            return 1.0 + self.predecessor.inverse(z + shift) - aux_now

        nxt = self.big_phi.guarded(t.value + 1.0)
        if not nxt.is_plain or nxt.to_float() > JET_GUARD:
            raise OverflowGuardError("Φ(t+1) 超出jet范围")
        aux_next = self.big_phi.climb_jet(t, aux_now)
        return self.predecessor.inverse(aux_next + next_correction) - aux_now

    @classmethod
    def from_record(cls, k: int, predecessor, record: Dict[str, Any],
                    config: Optional[Config] = None) -> 'HyperOpLevel':
        """由缓存记录恢复已构建的层"""
        level = cls(k, predecessor, config)
        level.window_T = float(record['window_T'])
        level.omega = float(record['omega'])
        level.alpha = record.get('alpha')
        level.alpha_converged = bool(record.get('alpha_converged', True))
        return level


# ---- 模块级操作 ----

def build_level(k: int, predecessor=None, config: Optional[Config] = None):
    """
    构建第 k 层

    Args:
        k: 层号，k=1 为 exp
        predecessor: 已构建的第 k-1 层
        config: 配置

    Raises:
        ConstructionError: 窗口内单调性检测失败
        NormalizationError: 归一化失败
    """
    if k < 1:
        raise ValidationError(f"层号必须 ≥ 1: {k}")
    if k == 1:
        return ExpLevel()
    if predecessor is None or predecessor.k != k - 1:
        raise ConstructionError(f"构建第 {k} 层需要第 {k - 1} 层")
    logger.info(f"开始构建第 {k} 层")
    return HyperOpLevel(k, predecessor, config).construct()


def normalize_tetration(tetration: TetrationFunction) -> float:
    """重新求 ω 使 φ(ω) + τ(ω) = 1，窗口未选时先选窗口"""
    if tetration.window_T is None:
        tetration.window_T = tetration.find_window()
    tetration.clear_caches()
    tetration.omega = tetration.normalize()
    return tetration.omega


def lambda_correction(level: HyperOpLevel, t, eps: Optional[float] = None):
    return level.correction(t, eps)


def hyperop_eval(level, t, eps: Optional[float] = None, guarded: bool = False):
    """E_k(t)；guarded=True 时返回层级索引形式"""
    if guarded:
        return level.evaluate_guarded(t)
    return level.evaluate(t, eps)


def window_shift_eval(level, t: float, extra_shift: int = 1):
    """以多走 extra_shift 步的落点求 E_k(t)"""
    return level.evaluate(t, extra_shift=extra_shift)


def hyperop_inverse(level, x, eps: Optional[float] = None):
    """𝒜_k(x)"""
    return level.inverse(x, eps)


def alpha_estimate(level, iteration_cap: Optional[int] = None,
                   tolerance: Optional[float] = None) -> AlphaEstimate:
    """
    αₖ：k=1 为 0，k=2 为 -2；奇数 k 为 𝒜_{k-1} 自 0 迭代的极限；
    偶数 k 由 E_k(u) = α_{k-1} 的解 u 减 1 给出
    """
    cfg = getattr(level, 'config', default_config)
    cap = iteration_cap or cfg.alpha_iteration_cap
    tol = tolerance or cfg.alpha_tolerance

    if level.k == 1:
        return AlphaEstimate(0.0)
    if level.k == 2:
        return AlphaEstimate(-2.0)

    pred = level.predecessor
    if level.k % 2 == 1:
        x = 0.0
        for i in range(1, cap + 1):
            nxt = pred.inverse(x)
            if abs(nxt - x) < tol:
                return AlphaEstimate(nxt, True, i, abs(pred.inverse(nxt) - nxt))
            x = nxt
        logger.warning(f"α_{level.k} 迭代 {cap} 次未收敛")
        return AlphaEstimate(x, False, cap, abs(pred.inverse(x) - x))

    target = pred.alpha

    def f(u):
        return level.walk(u + level.omega) - target

    u = brentq(f, 1.0 - level.k, 2.0 - level.k, xtol=1e-14, maxiter=200)
    return AlphaEstimate(u - 1.0, True, 0, abs(f(u)))


def parity_summary(level) -> Dict[str, Any]:
    """奇偶对应：偶数 k 定义域 (α,∞)、值域 ℝ；奇数 k 定义域 ℝ、值域 (α,∞)"""
    alpha = level.alpha
    even = level.k % 2 == 0
    domain = (alpha, math.inf) if even else (-math.inf, math.inf)
    rng = (-math.inf, math.inf) if even else (alpha, math.inf)
    return {
        'k': level.k,
        'parity': 'even' if even else 'odd',
        'alpha': alpha,
        'alpha_converged': getattr(level, 'alpha_converged', True),
        'domain': domain,
        'range': rng,
        'inverse_domain': rng,
        'inverse_range': domain,
        # 另一种约定 -k ≤ α ≤ 1-k 是否成立，仅记录不裁决
        'alpha_in_minus_k_band': alpha is not None and -level.k <= alpha <= 1 - level.k,
        'omega': level.omega,
        'window_T': level.window_T,
    }


class HyperOpTower:
    """逐层串行构建并复用的超运算塔"""

    def __init__(self, config: Optional[Config] = None, cache=None):
        self.config = config or default_config
        self.cache = cache
        self._levels: Dict[int, Any] = {1: ExpLevel()}
        self._phi: Optional[PhiFunction] = None
        self._tetration: Optional[TetrationFunction] = None
        self._lock = threading.RLock()

    @property
    def phi(self) -> PhiFunction:
        if self._phi is None:
            self._phi = PhiFunction(eps=self.config.internal_eps, depth_cap=self.config.depth_cap,
                                    contour_nodes=self.config.contour_nodes,
                                    contour_agreement=self.config.contour_agreement)
        return self._phi

    @property
    def tetration_function(self) -> TetrationFunction:
        with self._lock:
            if self._tetration is None:
                self._tetration = TetrationFunction(self.phi, self.config).construct()
            return self._tetration

    def level(self, k: int):
        """第 k 层（必要时先构建 1..k-1 层）"""
        if k < 1:
            raise ValidationError(f"层号必须 ≥ 1: {k}")
        with self._lock:
            for j in range(2, k + 1):
                if j not in self._levels:
                    self._levels[j] = self._build(j)
            return self._levels[k]

    def _build(self, k: int):
        pred = self._levels[k - 1]
        if self.cache is not None:
            record = self.cache.load(k, self.config.tolerance, self.config.depth_cap)
            if record is not None:
                logger.info(f"第 {k} 层命中缓存")
                return HyperOpLevel.from_record(k, pred, record, self.config)
        level = build_level(k, pred, self.config)
        if self.cache is not None:
            self.cache.store(level)
        return level

    def levels(self, max_k: int) -> List[Any]:
        self.level(max_k)
        return [self._levels[j] for j in range(1, max_k + 1)]


def test_hyperop_tower():
    """测试超运算塔"""
    tower = HyperOpTower()
    tet = tower.tetration_function
    print(f"ω = {tet.omega:.17g}, T = {tet.window_T}")
    for t in [-1.5, -1.0, 0.0, 0.5, 1.0, 2.0]:
        print(f"𝓕({t}) = {tet.tetration(t):.17g}")
    print(f"slog(10) = {tet.slog(10.0):.17g}")

    level3 = tower.level(3)
    print(f"E_3(-2) = {level3.evaluate(-2.0):.17g}, α_3 = {level3.alpha:.17g}")


if __name__ == "__main__":
    test_hyperop_tower()
