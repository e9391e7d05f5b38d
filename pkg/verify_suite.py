#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
校验套件模块
把各模块的不变量逐条变成可执行的检查，输出 JSON 与文本报告
"""

import json
import math
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from comp_engine import (StepFamily, converge, delta_profile, estimate_rho, nest,
                         tail_norm_threshold)
from config import Config, default_config
from error_handler import (DomainError, HyperOpError, OverflowGuardError, RangeError,
                           SuiteError)
from hyperop_tower import TetrationFunction, window_shift_eval
from jet_arith import Jet, jet_exp, jet_log, jet_mul, jet_div
from phi_builder import JET_GUARD, GuardedReal, PhiFunction

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    """单项检查结果，passed 由残差与阈值决定"""
    check_id: str
    grid: str
    max_residual: float
    threshold: float
    artifacts: Optional[List[Dict[str, Any]]] = None
    hard: bool = True
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_residual <= self.threshold)

    def to_dict(self, with_artifacts: bool = False) -> Dict[str, Any]:
        data = {
            'check_id': self.check_id,
            'passed': self.passed,
            'max_residual': _json_number(self.max_residual),
            'threshold': _json_number(self.threshold),
            'grid': self.grid,
            'hard': self.hard,
        }
        if with_artifacts and self.artifacts is not None:
            data['artifacts'] = self.artifacts
        return data


def _json_number(x: float):
    x = float(x)
    return x if math.isfinite(x) else str(x)


# ---- 注册表 ----

_REGISTRY: Dict[str, Dict[str, Any]] = {}


def register(check_id: str, description: str, scope: str):
    """
    注册检查

    Args:
        check_id: 基础编号，结果编号为 check_id 或 check_id/k=K
        description: 对应的不变量
        scope: 'global'（需要第 2 层以上）、'level'（每层一次）或 'tetration'
    """
    def decorator(func):
        if check_id in _REGISTRY:
            raise SuiteError(f"检查编号重复: {check_id}")
        if not description or any(e['description'] == description for e in _REGISTRY.values()):
            raise SuiteError(f"检查 {check_id} 的不变量描述为空或与其他检查重复")
        _REGISTRY[check_id] = {'description': description, 'scope': scope, 'func': func}
        return func
    return decorator


def check_registry() -> Dict[str, str]:
    """检查编号 → 不变量描述"""
    return {cid: entry['description'] for cid, entry in sorted(_REGISTRY.items())}


class SuiteContext:
    """一次运行共享的对象"""

    def __init__(self, levels: Sequence[Any], config: Config,
                 tetration: Optional[TetrationFunction] = None,
                 phi: Optional[PhiFunction] = None):
        self.levels = {lv.k: lv for lv in levels}
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self._tetration = tetration
        self._phi = phi

    @property
    def phi(self) -> PhiFunction:
        if self._phi is None:
            self._phi = self._tetration.phi if self._tetration is not None else \
                PhiFunction(eps=self.config.internal_eps, depth_cap=self.config.depth_cap)
        return self._phi

    @property
    def tetration(self) -> TetrationFunction:
        if self._tetration is None:
            self._tetration = TetrationFunction(self.phi, self.config).construct()
        return self._tetration


# ---- 网格 ----

_UPPER = {1: 3.0, 2: 2.0, 3: 1.0, 4: 0.5}


def domain_grid(level, config: Config) -> np.ndarray:
    """
    定义域采样网格

    偶数 k 在 (α, α+edge_band] 上按 edge_density 加密，其余按 bulk_density。
    上端取到 E_k(t+1) 仍为普通浮点处。
    """
    hi = _UPPER.get(level.k, 0.0)
    if level.k % 2 == 0 and level.alpha is not None:
        edge = level.alpha
        n_edge = max(1, math.ceil(config.edge_band * config.edge_density))
        edge_pts = edge + config.edge_band * np.arange(1, n_edge + 1) / n_edge
        lo = edge + config.edge_band
    else:
        edge_pts = np.array([])
        lo = -4.0 if level.k > 1 else -3.0
    n_bulk = max(2, math.ceil((hi - lo) * config.bulk_density) + 1)
    bulk = np.linspace(lo, hi, n_bulk)
    return np.unique(np.concatenate([edge_pts, bulk]))


def range_grid(level, config: Config) -> np.ndarray:
    lo = (level.alpha + config.edge_band) if level.k % 2 == 1 else -5.0
    n = max(2, math.ceil((20.0 - lo) * config.bulk_density / 4) + 1)
    return np.linspace(lo, 20.0, n)


def _describe(points: np.ndarray) -> str:
    if len(points) == 0:
        return "empty"
    return f"{len(points)} pts in [{points.min():.6g}, {points.max():.6g}]"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _sub(points: np.ndarray, count: int = 12) -> np.ndarray:
    if len(points) <= count:
        return points
    idx = np.unique(np.linspace(0, len(points) - 1, count).round().astype(int))
    return points[idx]


def _fd_coefficients(f: Callable[[float], float], t0: float, order: int,
                     h: float = 0.05, points: int = 9) -> np.ndarray:
    """等距采样多项式拟合得到的Taylor系数（差分估计）"""
    offsets = h * np.arange(-(points // 2), points // 2 + 1)
    values = np.array([f(t0 + u) for u in offsets])
    coeffs = np.polyfit(offsets, values, points - 1)[::-1]
    return coeffs[:order + 1]


# ---- jet 运算 ----

@register('jet.finite_difference', "jet 系数与差分估计一致（阶 ≤ 3，相对 1e-4）", 'tetration')
def _check_jet_fd(ctx: SuiteContext) -> List[CheckResult]:
    tet = ctx.tetration
    rows = []

    def sample(t):
        return math.exp(t) / (1.0 + t * t) * math.log(2.0 + t)

    def sample_jet(t):
        return jet_div(jet_mul(jet_exp(t), jet_log(t + 2.0)), 1.0 + jet_mul(t, t))

    for name, scalar, lifted, points in (
            ('composite', sample, sample_jet, [-0.5, 0.0, 0.7, 1.5]),
            ('tetration', tet.tetration, tet.evaluate, [-1.2, -0.3, 0.4, 1.1])):
        for t0 in points:
            jet = lifted(Jet.variable(t0, 3)).coeffs
            fd = _fd_coefficients(scalar, t0, 3)
            err = float(np.max(np.abs(jet - fd) / np.maximum(1.0, np.abs(fd))))
            rows.append({'function': name, 't': t0, 'residual': err})
    residual = max(r['residual'] for r in rows)
    return [CheckResult('jet.finite_difference', "8 pts, orders ≤ 3", residual, 1e-4, rows)]


@register('jet.order0_projection', "jet 的零阶系数等于标量求值", 'tetration')
def _check_order0(ctx: SuiteContext) -> List[CheckResult]:
    tet = ctx.tetration
    pts = np.linspace(-1.5, 2.0, 8)
    residual = max(_rel(tet.evaluate(Jet.variable(t, ctx.config.jet_order)).value, tet.tetration(t))
                   for t in pts)
    return [CheckResult('jet.order0_projection', _describe(pts), residual, 1e-12)]


@register('jet.exp_log_inverse', "log(exp(a)) = a 逐系数成立", 'global')
def _check_exp_log(ctx: SuiteContext) -> List[CheckResult]:
    residual = 0.0
    for _ in range(20):
        a = Jet(ctx.rng.uniform(-1.0, 1.0, ctx.config.jet_order + 1))
        residual = max(residual, float(np.max(np.abs(jet_log(jet_exp(a)).coeffs - a.coeffs))))
    return [CheckResult('jet.exp_log_inverse', "20 random jets", residual, 1e-12)]


# ---- 复合求值 ----

@register('comp.tail_bound', "收敛值与更深截断之差不超过报告的尾部界加容差", 'global')
def _check_tail(ctx: SuiteContext) -> List[CheckResult]:
    fam = ctx.phi.family(1.0)
    eps = ctx.config.internal_eps
    rows = []
    for s in (0.0, 0.5, 1.0):
        value, report = converge(fam, s, eps)
        deep = nest(fam, s, 1, report.depth_used + 40, 0.0)
        rows.append({'s': s, 'residual': _rel(value, deep), 'tail_bound': report.tail_bound})
    residual = max(r['residual'] for r in rows)
    return [CheckResult('comp.tail_bound', "s ∈ {0, 0.5, 1}", residual, ctx.config.composition_threshold, rows)]


@register('comp.tail_monotonicity', "n ≥ N(ε) 起的尾部复合在紧区域上模长 < ε", 'global')
def _check_tail_monotonicity(ctx: SuiteContext) -> List[CheckResult]:
    fam = ctx.phi.family(0.0, 1.0)
    region = fam.domain
    # N(ε) 取自边界网格估计的 ρ_j
    sampled = StepFamily(step=fam.step, rho=estimate_rho(fam.step, region, grid=ctx.config.rho_grid),
                         domain=region, name=fam.name)

    def disk(radius):
        r = radius * math.sqrt(ctx.rng.uniform())
        return r * complex(np.exp(1j * ctx.rng.uniform(0.0, 2 * np.pi)))

    rows = []
    worst = 0.0
    for eps in (1e-2, 1e-4, 1e-8):
        n_eps = tail_norm_threshold(sampled, eps)
        magnitude = 0.0
        for _ in range(25):
            s = complex(region.center) + disk(region.radius)
            z = disk(region.z_radius)
            n = n_eps + int(ctx.rng.integers(0, 5))
            m = n + int(ctx.rng.integers(0, 10))
            magnitude = max(magnitude, abs(nest(fam, s, n, m, z)))
        rows.append({'eps': eps, 'N': n_eps, 'max_tail': magnitude})
        worst = max(worst, magnitude / eps)
    return [CheckResult('comp.tail_monotonicity', "25 (s, z, n, m) samples per ε ∈ {1e-2, 1e-4, 1e-8}",
                        worst, 1.0, rows)]


@register('comp.truncation_consistency', "converge(ε) 与 converge(ε/10) 相差小于 ε", 'global')
def _check_truncation(ctx: SuiteContext) -> List[CheckResult]:
    fam = ctx.phi.family(1.0)
    eps = 1e-10
    rows = []
    for s in (0.0, 0.5, 1.0):
        coarse, report = converge(fam, s, eps)
        fine, _ = converge(fam, s, eps / 10)
        rows.append({'s': s, 'depth': report.depth_used, 'residual': _rel(coarse, fine)})
    residual = max(r['residual'] for r in rows)
    return [CheckResult('comp.truncation_consistency', "ε = 1e-10 vs 1e-11, s ∈ {0, 0.5, 1}",
                        residual, eps, rows)]


@register('comp.geometric_decay', "相邻深度增量的对数斜率 ≤ -0.95", 'global')
def _check_decay(ctx: SuiteContext) -> List[CheckResult]:
    fam = ctx.phi.family(1.0)
    rows = []
    for s in (0.0, 1.0):
        depths = list(range(1, 8))
        deltas = delta_profile(fam, s, depths)
        mask = deltas > 0
        slope = float(np.polyfit(np.array(depths)[mask], np.log(deltas[mask]), 1)[0])
        rows.append({'s': s, 'slope': slope})
    worst = max(r['slope'] for r in rows)
    return [CheckResult('comp.geometric_decay', "s ∈ {0, 1}, depths 1..7", worst, -0.95, rows)]


@register('comp.split_associativity', "nest(1..m) = nest(1..k, nest(k+1..m))", 'global')
def _check_split(ctx: SuiteContext) -> List[CheckResult]:
    fam = ctx.phi.family(1.0)
    residual = 0.0
    for s in (-1.0, 0.0, 1.0):
        whole = nest(fam, s, 1, 30, 0.0)
        split = nest(fam, s, 1, 10, nest(fam, s, 11, 30, 0.0))
        residual = max(residual, abs(whole - split))
    return [CheckResult('comp.split_associativity', "m=30, k=10", residual, 0.0)]


# ---- φ 与 Φ ----

@register('phi.functional_equation', "φ(t+1) = e^{t+φ(t)}（实轴，溢出处用对数空间）", 'global')
def _check_phi_fe(ctx: SuiteContext) -> List[CheckResult]:
    plain = np.round(np.arange(-10.0, 2.0 + 1e-9, 0.05), 10)
    guarded = np.linspace(2.0, 6.0, 9)
    residual = max(ctx.phi.phi_residual(float(t)) for t in plain)
    residual_log = max(ctx.phi.phi_residual(float(t)) for t in guarded)
    return [CheckResult('phi.functional_equation', f"{_describe(plain)}; log-space [2, 6]",
                        max(residual, residual_log), ctx.config.composition_threshold,
                        [{'plain': residual, 'log_space': residual_log}])]


@register('phi.complex_functional_equation', "复平面 |s| ≤ 2 上的函数方程", 'global')
def _check_phi_complex(ctx: SuiteContext) -> List[CheckResult]:
    radius = np.sqrt(ctx.rng.uniform(0.0, 4.0, 100))
    angle = ctx.rng.uniform(0.0, 2 * np.pi, 100)
    samples = radius * np.exp(1j * angle)
    residual = max(ctx.phi.complex_residual(complex(s)) for s in samples)
    return [CheckResult('phi.complex_functional_equation', "100 random samples |s| ≤ 2", residual, 1e-9)]


@register('phi.monotone_positive', "实轴上 φ > 0 且严格递增", 'global')
def _check_phi_monotone(ctx: SuiteContext) -> List[CheckResult]:
    pts = np.linspace(-10.0, 3.0, 131)
    values = np.array([ctx.phi.phi(float(t)) for t in pts])
    violations = int(np.sum(values <= 0) + np.sum(np.diff(values) <= 0))
    return [CheckResult('phi.monotone_positive', _describe(pts), violations, 0)]


@register('phi.jet_consistency', "φ 的jet系数与围道积分导数一致", 'global')
def _check_phi_jets(ctx: SuiteContext) -> List[CheckResult]:
    rows = []
    for s0 in (-1.0, 0.0, 0.5, 1.0):
        derivs = ctx.phi.phi(Jet.variable(s0, 3)).derivatives()
        for k in range(4):
            ref = ctx.phi.cauchy_derivative(s0, k).real
            rows.append({'s': s0, 'k': k, 'residual': _rel(derivs[k], ref)})
    residual = max(r['residual'] for r in rows)
    return [CheckResult('phi.jet_consistency', "s ∈ {-1, 0, 0.5, 1}, k ≤ 3", residual, 1e-8, rows)]


@register('phi.big_phi_monotone', "Φ_k 在窗口附近为正且严格递增", 'level')
def _check_big_phi(ctx: SuiteContext, level) -> List[CheckResult]:
    pts = np.linspace(-3.0, level.window_T + 1.0, 17)
    values = [level.big_phi.guarded(float(t)) for t in pts]
    violations = sum(1 for v in values if v <= 0.0)
    violations += sum(1 for a, b in zip(values, values[1:]) if not a < b)
    return [CheckResult(f'phi.big_phi_monotone/k={level.k}', _describe(pts), violations, 0)]


@register('phi.guarded_ordering', "层级索引数的序与 exp 单调性一致", 'global')
def _check_guarded(ctx: SuiteContext) -> List[CheckResult]:
    xs = np.sort(ctx.rng.uniform(-50.0, 700.0, 200))
    guarded = [GuardedReal.from_log(float(x)) for x in xs]
    violations = sum(1 for a, b in zip(guarded, guarded[1:]) if not a <= b)
    logs = [ctx.phi.phi_log(float(t)) for t in np.linspace(2.0, 8.0, 13)]
    violations += sum(1 for a, b in zip(logs, logs[1:]) if not a < b)
    return [CheckResult('phi.guarded_ordering', "200 random + phi_log on [2, 8]", violations, 0)]


# ---- 超运算塔 ----

@register('tower.normalization', "E_k(0) = 1 ± tolerance", 'level')
def _check_normalization(ctx: SuiteContext, level) -> List[CheckResult]:
    residual = abs(level.evaluate(0.0) - 1.0)
    return [CheckResult(f'tower.normalization/k={level.k}', "t = 0", residual, ctx.config.tolerance)]


@register('tower.ladder', "E_k(-j) = 1 - j，0 ≤ j < k", 'level')
def _check_ladder(ctx: SuiteContext, level) -> List[CheckResult]:
    rows = [{'t': -j, 'value': level.evaluate(float(-j))} for j in range(level.k)]
    residual = max(abs(r['value'] - (1 + r['t'])) for r in rows)
    return [CheckResult(f'tower.ladder/k={level.k}', f"j = 0..{level.k - 1}", residual,
                        ctx.config.inversion_threshold, rows)]


@register('tower.functional_equation', "E_{k-1}(E_k(t)) = E_k(t+1)", 'level')
def _check_fe(ctx: SuiteContext, level) -> List[CheckResult]:
    if level.k == 1:
        return []
    pts = domain_grid(level, ctx.config)
    rows = []
    for t in pts:
        lhs = level.predecessor.evaluate(level.evaluate(float(t)))
        rhs = level.evaluate(float(t) + 1.0)
        rows.append({'t': float(t), 'residual': _rel(lhs, rhs)})
    residual = max(r['residual'] for r in rows)
    return [CheckResult(f'tower.functional_equation/k={level.k}', _describe(pts), residual,
                        ctx.config.inversion_threshold, rows)]


@register('tower.bijectivity', "𝒜_k(E_k(t)) = t 且 E_k(𝒜_k(x)) = x", 'level')
def _check_bijectivity(ctx: SuiteContext, level) -> List[CheckResult]:
    ts = _sub(domain_grid(level, ctx.config))
    xs = _sub(range_grid(level, ctx.config))
    residual = max(_rel(level.inverse(level.evaluate(float(t))), float(t)) for t in ts)
    residual = max(residual, max(_rel(level.evaluate(level.inverse(float(x))), float(x)) for x in xs))
    return [CheckResult(f'tower.bijectivity/k={level.k}', f"{_describe(ts)}; {_describe(xs)}",
                        residual, ctx.config.inversion_threshold)]


@register('tower.monotonicity', "E_k 的一阶jet系数为正，𝒜_k 严格递增", 'level')
def _check_monotone(ctx: SuiteContext, level) -> List[CheckResult]:
    ts = _sub(domain_grid(level, ctx.config))
    xs = _sub(range_grid(level, ctx.config))
    slopes = [level.evaluate(Jet.variable(float(t), 1)).coeffs[1] for t in ts]
    inverses = [level.inverse(float(x)) for x in xs]
    violations = sum(1 for d in slopes if d <= 0)
    violations += sum(1 for a, b in zip(inverses, inverses[1:]) if b <= a)
    return [CheckResult(f'tower.monotonicity/k={level.k}', _describe(ts), violations, 0)]


@register('tower.chain_derivative', "𝓕'(t-1) = 𝓕'(t)/𝓕(t)", 'tetration')
def _check_chain(ctx: SuiteContext) -> List[CheckResult]:
    tet = ctx.tetration
    pts = np.round(np.arange(-0.95, 2.0 + 1e-9, 0.05), 10)
    residual = 0.0
    for t in pts:
        now = tet.evaluate(Jet.variable(float(t), 1)).coeffs
        before = tet.evaluate(Jet.variable(float(t) - 1.0, 1)).coeffs
        expected = now[1] / now[0]
        residual = max(residual, abs(before[1] - expected) / abs(expected))
    return [CheckResult('tower.chain_derivative', _describe(pts), residual, 1e-6)]


def _tau_decay_fit(tet: TetrationFunction, floor: float = 1e-12) -> Dict[str, Any]:
    """
    对 [T, T+3] 上 log|τ'(t) - 1| 关于 e^t 做最小二乘直线拟合

    |τ'-1| 低于 floor 的点已到双精度噪声，不参与拟合。
    """
    T = tet.window_T
    pts = np.round(np.arange(T, T + 3.0 + 1e-9, 0.05), 10)
    xs, ys, rows = [], [], []
    for t in pts:
        jet, _ = tet.tau(Jet.variable(float(t), 1))
        deviation = abs(jet.coeffs[1] - 1.0)
        rows.append({'t': float(t), 'deviation': deviation})
        if deviation > floor:
            xs.append(math.exp(t))
            ys.append(math.log(deviation))
    if len(xs) < 3:
        return {'points': len(xs), 'slope': math.inf, 'r2': -math.inf, 'A_fit': math.inf, 'rows': rows}

    x, y = np.array(xs), np.array(ys)
    slope, intercept = np.polyfit(x, y, 1)
    spread = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - (slope * x + intercept)) ** 2)) / spread if spread > 0 else 0.0
    # |τ'-1| ≤ A·e^{-e^t} 的最小常数
    a_fit = float(np.exp(np.max(y + x)))
    return {'points': len(xs), 'slope': float(slope), 'r2': r2, 'A_fit': a_fit, 'rows': rows}


def _last_carried_point(tet: TetrationFunction, step: float = 0.01) -> Optional[float]:
    """[T, T+3] 上 φ(t+1) 仍在jet范围内的最大网格点，此处τ的jet带着非零高阶项"""
    T = tet.window_T
    last = None
    for t in np.round(np.arange(T, T + 3.0 + 1e-9, step), 10):
        g = tet.phi.phi_log(float(t) + 1.0)
        if not g.is_plain or g.to_float() > JET_GUARD:
            break
        last = float(t)
    return last


@register('tower.tau_decay', "τ'(t) - 1 = O(e^{-e^t})：对 e^t 回归斜率 ≤ -0.95 且 R² > 0.5；"
          "jet仍携带处的高阶系数 < 1e-10", 'tetration')
def _check_tau_decay(ctx: SuiteContext) -> List[CheckResult]:
    tet = ctx.tetration
    fit = _tau_decay_fit(tet)
    summary = {key: fit[key] for key in ('points', 'slope', 'r2', 'A_fit')}

    t_star = _last_carried_point(tet)
    if t_star is None:
        high, coeffs = math.inf, []
    else:
        deep, _ = tet.tau(Jet.variable(t_star, min(ctx.config.jet_order, 6)))
        coeffs = [float(c) for c in deep.coeffs[2:]]
        high = max((abs(c) for c in coeffs), default=0.0)
    grid = f"{fit['points']} fitted pts in [T, T+3]"
    return [
        CheckResult('tower.tau_decay/slope', grid, fit['slope'], -0.95, [summary]),
        CheckResult('tower.tau_decay/fit', grid, 1.0 - fit['r2'], 0.5, fit['rows']),
        CheckResult('tower.tau_decay/jets', f"t* = {t_star}", high, 1e-10,
                    [{'t': t_star, 'coefficients': coeffs}]),
    ]


@register('tower.lambda_comparison', "Λ(t) ≤ t + 𝒜_{k-1}(1 + Λ(t+1)/Φ(t+1))", 'level')
def _check_lambda(ctx: SuiteContext, level) -> List[CheckResult]:
    if level.k == 1:
        return []
    pts = np.linspace(level.window_T, level.window_T + 1.0, 5)
    residual = 0.0
    for t in pts:
        lam, _ = level.correction(float(t))
        try:
            nxt, _ = level.correction(float(t) + 1.0)
            term = nxt * level.aux_guarded(float(t) + 1.0).reciprocal()
        except OverflowGuardError:
            # Φ(t+1) 超出层级索引范围，倒数按 0 计
            term = 0.0
        rhs = float(t) + level.predecessor.inverse(1.0 + term)
        residual = max(residual, lam - rhs)
    # k ≥ 3 时只在 t 足够大处成立，记录但不作为硬检查
    return [CheckResult(f'tower.lambda_comparison/k={level.k}', _describe(pts), max(residual, 0.0),
                        1e-12, hard=level.k == 2)]


@register('tower.sublogarithmic', "𝒜_{k-1}(ab) ≤ 𝒜_{k-1}(a) + 𝒜_{k-1}(b)，a, b ≥ E_{k-1}(1)", 'level')
def _check_sublog(ctx: SuiteContext, level) -> List[CheckResult]:
    if level.k not in (2, 3):
        return []
    inv = level.predecessor.inverse
    pairs = ctx.rng.uniform(math.e, 50.0, size=(20, 2))
    residual = max(max(0.0, inv(a * b) - inv(a) - inv(b)) for a, b in pairs)
    return [CheckResult(f'tower.sublogarithmic/k={level.k}', "20 random pairs in [e, 50]",
                        residual, ctx.config.inversion_threshold)]


@register('tower.window_shift', "相邻落点 m 与 m±1 的求值一致", 'level')
def _check_window_shift(ctx: SuiteContext, level) -> List[CheckResult]:
    if level.k == 1:
        return []
    ts = _sub(domain_grid(level, ctx.config), 8)
    rows = []
    for t in ts:
        # m+1 处 Φ 不可表示时改用窗口下方的 m-1
        try:
            shifted, shift = window_shift_eval(level, float(t), 1), 1
        except OverflowGuardError:
            shifted, shift = window_shift_eval(level, float(t), -1), -1
        rows.append({'t': float(t), 'shift': shift, 'residual': _rel(shifted, level.evaluate(float(t)))})
    residual = max(r['residual'] for r in rows)
    return [CheckResult(f'tower.window_shift/k={level.k}', _describe(ts), residual, 1e-9, rows)]


@register('tower.parity', "偶数 k 定义域 (α,∞)；奇数 k 值域 (α,∞)，α 为 𝒜_{k-1} 的不动点", 'level')
def _check_parity(ctx: SuiteContext, level) -> List[CheckResult]:
    violations = 0.0
    rows = []
    if level.k % 2 == 0:
        try:
            level.evaluate(level.alpha)
            violations += 1
        except DomainError:
            pass
    else:
        try:
            level.inverse(level.alpha - 0.1)
            violations += 1
        except RangeError:
            pass
        if level.k >= 3:
            fixed = abs(level.predecessor.inverse(level.alpha) - level.alpha)
            rows.append({'fixed_point_residual': fixed})
            violations = max(violations, fixed)
            for t in (-8.0, -3.0):
                if level.evaluate(t) <= level.alpha:
                    violations += 1
    return [CheckResult(f'tower.parity/k={level.k}', f"α = {level.alpha!r}", violations,
                        ctx.config.inversion_threshold, rows)]


@register('tower.cross_construction', "Λ 路径的第 2 层与 τ 路径一致", 'global')
def _check_cross(ctx: SuiteContext) -> List[CheckResult]:
    if 2 not in ctx.levels:
        return []
    level2 = ctx.levels[2]
    tet = ctx.tetration
    pts = np.round(np.arange(-1.5, 2.0 + 1e-9, 0.05), 10)
    residual = max(_rel(level2.evaluate(float(t)), tet.tetration(float(t))) for t in pts)
    return [CheckResult('tower.cross_construction', _describe(pts), residual, 1e-9)]


@register('tower.contraction', "窗口内修正一步的各系数敏感度 λ_j < 1", 'level')
def _check_contraction(ctx: SuiteContext, level) -> List[CheckResult]:
    if level.k == 1:
        return []
    report = contraction_report(level, samples=3)
    worst = max(report['max_lambda']) if report['max_lambda'] else 0.0
    artifacts = report['rows'] + ([{'note': report['note']}] if report['note'] else [])
    # 窗口选择只对 k ≤ jet_window_max_level 保证jet收缩
    return [CheckResult(f'tower.contraction/k={level.k}', f"3 pts in window, order {report['order']}",
                        worst, 1.0 - 1e-12, artifacts,
                        hard=level.k <= level.config.jet_window_max_level)]


# ---- 探针（不参与通过判定） ----

def contraction_report(level, order: Optional[int] = None, samples: int = 5,
                       t_values: Optional[Sequence[float]] = None) -> Dict[str, Any]:
    """
    修正一步映射的逐系数敏感度表，每行由 level.jet_contraction 给出

    映射超出jet范围的点从表中略去，记入 skipped 与 note。
    """
    T = level.window_T
    order = level.contraction_order if order is None else order
    ts = list(t_values) if t_values is not None else list(np.linspace(T, T + 1.0, samples))
    rows = []
    skipped = []
    for t0 in ts:
        lambdas = level.jet_contraction(float(t0), order)
        if lambdas is None:
            skipped.append(float(t0))
            continue
        rows.append({'t': float(t0), 'lambda': lambdas})
    max_lambda = [max(r['lambda'][j] for r in rows) for j in range(order + 1)] if rows else []
    note = None
    if skipped:
        note = f"{len(skipped)} 个点超出jet范围，表格截断: " + ", ".join(f"{t:.6g}" for t in skipped)
    return {'k': level.k, 'order': order, 'rows': rows, 'max_lambda': max_lambda,
            'skipped': skipped, 'note': note}


def derivative_positivity_probe(level, max_order: int, t_range: Sequence[float],
                                n_points: int = 41) -> Dict[str, Any]:
    """
    各阶导数在采样区间上“此后恒正”的起点，只报告不判定
    """
    ts = np.linspace(t_range[0], t_range[1], n_points)
    rows = []
    note = None
    for t in ts:
        try:
            derivs = level.evaluate(Jet.variable(float(t), max_order)).derivatives()
        except HyperOpError as e:
            note = f"t = {t:.6g} 处jet求值失败，表格截断: {e}"
            break
        rows.append({'t': float(t), 'derivatives': [float(d) for d in derivs]})

    onset: Dict[int, Optional[float]] = {}
    for n in range(max_order + 1):
        start = None
        for row in reversed(rows):
            if row['derivatives'][n] > 0:
                start = row['t']
            else:
                break
        onset[n] = start
    return {'k': level.k, 'rows': rows, 'onset': onset, 'note': note}


# ---- 运行与报告 ----

def run_suite(levels: Sequence[Any], config: Optional[Config] = None,
              tetration: Optional[TetrationFunction] = None) -> List[CheckResult]:
    """
    对给定的层运行全部检查

    个别检查中的数值异常记为失败结果；结果按 check_id 排序。
    """
    config = config or default_config
    if not levels:
        return []

    ctx = SuiteContext(levels, config, tetration)
    top = max(ctx.levels)
    results: List[CheckResult] = []

    for check_id, entry in sorted(_REGISTRY.items()):
        scope = entry['scope']
        if scope == 'level':
            targets = [lv for k, lv in sorted(ctx.levels.items())
                       if k >= 2 or check_id in _EXP_LEVEL_CHECKS]
            if check_id == 'phi.big_phi_monotone':
                targets = [lv for lv in targets if lv.k >= 2]
            for lv in targets:
                results.extend(_run_one(entry['func'], f"{check_id}/k={lv.k}", ctx, lv))
        elif top >= 2:
            results.extend(_run_one(entry['func'], check_id, ctx))

    results.sort(key=lambda r: r.check_id)
    failed = [r.check_id for r in results if r.hard and not r.passed]
    logger.info(f"校验完成: {len(results)} 项，硬检查失败 {len(failed)} 项")
    return results


_EXP_LEVEL_CHECKS = {'tower.normalization', 'tower.ladder', 'tower.bijectivity',
                     'tower.monotonicity', 'tower.parity'}


def run_check(check_id: str, levels: Sequence[Any], config: Optional[Config] = None,
              tetration: Optional[TetrationFunction] = None) -> List[CheckResult]:
    """只运行一项已注册的检查；level 作用域的检查对每个给定层各跑一次"""
    entry = _REGISTRY.get(check_id)
    if entry is None:
        raise SuiteError(f"未知的检查编号: {check_id}")
    ctx = SuiteContext(levels, config or default_config, tetration)
    if entry['scope'] == 'level':
        results = []
        for lv in levels:
            results.extend(_run_one(entry['func'], f"{check_id}/k={lv.k}", ctx, lv))
        return results
    return _run_one(entry['func'], check_id, ctx)


def _run_one(func, check_id: str, ctx: SuiteContext, *args) -> List[CheckResult]:
    try:
        return func(ctx, *args)
    except HyperOpError as e:
        logger.warning(f"检查 {check_id} 出现数值异常: {e}")
        return [CheckResult(check_id, "aborted", math.inf, 0.0, [{'error': str(e)}])]


def all_hard_passed(results: Sequence[CheckResult]) -> bool:
    return all(r.passed for r in results if r.hard)


def write_json_report(results: Sequence[CheckResult], path: str,
                      probes: Optional[Dict[str, Any]] = None):
    """JSON 报告：每项含 check_id、passed、max_residual、threshold、grid"""
    report = {
        'passed': all_hard_passed(results),
        'checks': [r.to_dict() for r in results],
    }
    if probes:
        report['probes'] = probes
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(report, f, indent=2, ensure_ascii=False, default=_json_number)
        f.write('\n')


def format_text_table(results: Sequence[CheckResult]) -> str:
    """人读的文本表格"""
    width = max([len(r.check_id) for r in results] + [8])
    lines = [f"{'check_id':<{width}}  {'status':<6}  {'max_residual':>12}  {'threshold':>12}  grid"]
    for r in results:
        status = 'PASS' if r.passed else ('FAIL' if r.hard else 'soft')
        lines.append(f"{r.check_id:<{width}}  {status:<6}  {r.max_residual:>12.4e}  "
                     f"{r.threshold:>12.4e}  {r.grid}")
    return '\n'.join(lines)


def test_verify_suite():
    """测试校验套件"""
    from hyperop_tower import HyperOpTower

    config = Config(edge_density=20, bulk_density=4)
    tower = HyperOpTower(config)
    results = run_suite(tower.levels(2), config, tower.tetration_function)
    print(format_text_table(results))


if __name__ == "__main__":
    test_verify_suite()
