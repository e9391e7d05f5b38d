#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
截断Taylor级数（jet）运算模块
系数按 c_l = f^(l)(t0) / l! 存储，所有求值例程都可以带着导数一起运行
"""

import math
import cmath
import logging
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import factorial

from error_handler import DomainError, InvalidJetError, OverflowGuardError, SingularJetError

logger = logging.getLogger(__name__)

DEFAULT_JET_ORDER = 6
MAX_JET_ORDER = 12


class Jet:
    """单变量截断Taylor展开"""

    __slots__ = ('coeffs',)

    def __init__(self, coeffs: Sequence[float]):
        arr = np.array(coeffs, dtype=float).reshape(-1)
        if arr.size == 0:
            raise InvalidJetError("jet至少需要一个系数")
        if arr.size - 1 > MAX_JET_ORDER:
            raise InvalidJetError(f"jet阶数 {arr.size - 1} 超过上限 {MAX_JET_ORDER}")
        if not np.all(np.isfinite(arr)):
            raise InvalidJetError(f"jet系数出现非有限值: {arr}")
        self.coeffs = arr

    @classmethod
    def variable(cls, t0: float, order: int = DEFAULT_JET_ORDER) -> 'Jet':
        """自变量 t 在 t0 处的jet：(t0, 1, 0, ...)"""
        coeffs = np.zeros(order + 1)
        coeffs[0] = t0
        if order >= 1:
            coeffs[1] = 1.0
        return cls(coeffs)

    @classmethod
    def constant(cls, c: float, order: int = DEFAULT_JET_ORDER) -> 'Jet':
        """常数jet"""
        coeffs = np.zeros(order + 1)
        coeffs[0] = c
        return cls(coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivatives(self) -> np.ndarray:
        """还原为导数 f^(l)(t0)"""
        return self.coeffs * factorial(np.arange(self.order + 1))

    def truncate(self, order: int) -> 'Jet':
        return Jet(self.coeffs[:order + 1])

    def _coerce(self, other) -> 'Jet':
        if isinstance(other, Jet):
            if other.order != self.order:
                raise InvalidJetError(f"jet阶数不一致: {self.order} 与 {other.order}")
            return other
        return Jet.constant(float(other), self.order)

    def __add__(self, other):
        return jet_add(self, self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return jet_add(self, -self._coerce(other))

    def __rsub__(self, other):
        return jet_add(self._coerce(other), -self)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.coeffs * float(other))
        return jet_mul(self, self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if other == 0:
                raise SingularJetError("jet除以零")
            return Jet(self.coeffs / float(other))
        return jet_div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return jet_div(self._coerce(other), self)

    def exp(self) -> 'Jet':
        return jet_exp(self)

    def log(self) -> 'Jet':
        return jet_log(self)

    def log1p(self) -> 'Jet':
        return jet_log1p(self)

    def allclose(self, other: 'Jet', rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        return other.order == self.order and bool(np.allclose(self.coeffs, other.coeffs, rtol=rtol, atol=atol))

    def __repr__(self):
        return f"Jet({', '.join(f'{c:.17g}' for c in self.coeffs)})"


def _checked(coeffs: np.ndarray, op: str) -> Jet:
    if not np.all(np.isfinite(coeffs)):
        raise InvalidJetError(f"{op} 产生了非有限系数")
    return Jet(coeffs)


def jet_add(a: Jet, b: Jet) -> Jet:
    """jet加法"""
    if a.order != b.order:
        raise InvalidJetError(f"jet阶数不一致: {a.order} 与 {b.order}")
    return _checked(a.coeffs + b.coeffs, "jet_add")


def jet_mul(a: Jet, b: Jet) -> Jet:
    """Cauchy乘积"""
    if a.order != b.order:
        raise InvalidJetError(f"jet阶数不一致: {a.order} 与 {b.order}")
    return _checked(np.convolve(a.coeffs, b.coeffs)[:a.order + 1], "jet_mul")


def jet_div(a: Jet, b: Jet) -> Jet:
    """
    jet除法 q = a / b

    Raises:
        SingularJetError: b 的常数项为零
    """
    if a.order != b.order:
        raise InvalidJetError(f"jet阶数不一致: {a.order} 与 {b.order}")
    b0 = b.coeffs[0]
    if b0 == 0:
        raise SingularJetError("除数jet的常数项为零")

    q = np.zeros(a.order + 1)
    q[0] = a.coeffs[0] / b0
    for n in range(1, a.order + 1):
        # Σ_{k=1..n} b_k q_{n-k}
        acc = np.dot(b.coeffs[1:n + 1], q[n - 1::-1])
        q[n] = (a.coeffs[n] - acc) / b0
    return _checked(q, "jet_div")


def jet_exp(a: Jet) -> Jet:
    """e^a 的递推: n e_n = Σ k a_k e_{n-k}"""
    try:
        e0 = math.exp(a.coeffs[0])
    except OverflowError:
        raise OverflowGuardError(f"jet_exp 溢出: 常数项 {a.coeffs[0]}")

    e = np.zeros(a.order + 1)
    e[0] = e0
    k = np.arange(1, a.order + 1)
    for n in range(1, a.order + 1):
        e[n] = np.dot(k[:n] * a.coeffs[1:n + 1], e[n - 1::-1]) / n
    return _checked(e, "jet_exp")


def _log_tail(a: Jet, l0: float) -> Jet:
    a0 = a.coeffs[0]
    out = np.zeros(a.order + 1)
    out[0] = l0
    for n in range(1, a.order + 1):
        acc = sum(k * out[k] * a.coeffs[n - k] for k in range(1, n))
        out[n] = (a.coeffs[n] - acc / n) / a0
    return _checked(out, "jet_log")


def jet_log(a: Jet) -> Jet:
    """
    log(a)

    Raises:
        DomainError: 常数项非正
    """
    a0 = a.coeffs[0]
    if a0 <= 0:
        raise DomainError(f"jet_log 的常数项必须为正: {a0}")
    return _log_tail(a, math.log(a0))


def jet_log1p(a: Jet) -> Jet:
    """log(1 + a)，常数项很小时保持精度"""
    a0 = a.coeffs[0]
    if a0 <= -1:
        raise DomainError(f"jet_log1p 的常数项必须大于 -1: {a0}")
    shifted = Jet(a.coeffs.copy())
    shifted.coeffs[0] = 1.0 + a0
    return _log_tail(shifted, math.log1p(a0))


def jet_compose_scalar(f_jet: Union[Jet, Callable[[float], Jet]], a: Jet) -> Jet:
    """
    复合 f∘a

    Args:
        f_jet: f 在 a.c0 处的jet（或给定点返回该jet的函数）
        a: 内层jet

    Returns:
        f(a) 的jet，按 Horner 在 (a - a.c0) 处求值
    """
    if callable(f_jet) and not isinstance(f_jet, Jet):
        f_jet = f_jet(a.value)
    if f_jet.order < a.order:
        raise InvalidJetError(f"外层jet阶数 {f_jet.order} 低于内层 {a.order}")

    delta = Jet(a.coeffs.copy())
    delta.coeffs[0] = 0.0
    result = Jet.constant(f_jet.coeffs[a.order], a.order)
    for l in range(a.order - 1, -1, -1):
        result = result * delta + f_jet.coeffs[l]
    return result


def jet_inverse_series(f_jet: Jet, y0: float) -> Jet:
    """
    级数反演：已知 f 在 y0 处的jet（f_jet.c0 = f(y0) = x0），
    返回 f⁻¹ 在 x0 处的jet，即 g(x0 + u) = y0 + Σ g_l u^l

    Raises:
        SingularJetError: f'(y0) = 0
    """
    order = f_jet.order
    if order == 0:
        return Jet([y0])
    f1 = f_jet.coeffs[1]
    if f1 == 0:
        raise SingularJetError("反函数在导数为零处不可展开")

    h = np.zeros(order + 1)
    h[1] = 1.0 / f1
    # 逐阶求解 Σ f_m (h^m)_n = 0，n ≥ 2
    for n in range(2, order + 1):
        composed = jet_compose_scalar(f_jet, Jet(h))
        h[n] = -composed.coeffs[n] / f1
    h[0] = y0
    return Jet(h)


def inverse_jet_at(f_jet: Jet, y0: float, x: Jet) -> Jet:
    """
    用 f 在 y0 处的jet 求 f⁻¹(x) 的jet

    Args:
        f_jet: f(y0 + u) 的系数，阶数不低于 x
        y0: 反函数在 x.c0 处的值
        x: 自变量jet
    """
    g = jet_inverse_series(f_jet.truncate(x.order), y0)
    return jet_compose_scalar(g, x)


def polynomial(coeffs: Sequence[float], x):
    """Horner求多项式，x 可为浮点、复数、numpy数组或jet"""
    acc = coeffs[-1] + 0 * x if isinstance(x, Jet) else coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


# ---- 对标量、复数、数组与jet统一的初等函数 ----

def value_of(x) -> float:
    """任意算术类型的零阶值"""
    if isinstance(x, Jet):
        return x.value
    return x


def exp_of(x):
    """统一的 exp"""
    if isinstance(x, Jet):
        return x.exp()
    if isinstance(x, np.ndarray):
        return np.exp(x)
    if isinstance(x, complex):
        return cmath.exp(x)
    try:
        return math.exp(x)
    except OverflowError:
        raise OverflowGuardError(f"exp({x}) 溢出")


def log_of(x):
    """统一的 log（实数分支）"""
    if isinstance(x, Jet):
        return x.log()
    if isinstance(x, complex):
        return cmath.log(x)
    if x <= 0:
        raise DomainError(f"对数的自变量必须为正: {x}")
    return math.log(x)


def log1p_of(x):
    """统一的 log(1 + x)"""
    if isinstance(x, Jet):
        return x.log1p()
    if x <= -1:
        raise DomainError(f"log1p 的自变量必须大于 -1: {x}")
    return math.log1p(x)


def jet_distance(a, b) -> float:
    """两个同类值之间的最大系数差"""
    if isinstance(a, Jet):
        return float(np.max(np.abs(a.coeffs - b.coeffs)))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def jet_magnitude(a) -> float:
    if isinstance(a, Jet):
        return float(np.max(np.abs(a.coeffs)))
    return float(np.max(np.abs(np.asarray(a))))


def test_jet_arith():
    """测试jet运算"""
    t = Jet.variable(0.0, 2)
    print(f"exp(t) = {jet_exp(t)}")
    print(f"(1+t)(1-t) = {(1 + t) * (1 - t)}")
    a = Jet([0.3, 2.0, -1.0])
    print(f"log(exp(a)) = {jet_log(jet_exp(a))}")


if __name__ == "__main__":
    test_jet_arith()
