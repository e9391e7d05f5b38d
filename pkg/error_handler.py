#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
错误处理模块
提供统一的日志设置、异常层级、退出码映射和用户友好的错误信息
"""

import importlib
import sys
import os
import traceback
import logging
from typing import Optional


# 退出码约定：0 成功，1 基础设施错误，2 用法/定义域错误
EXIT_OK = 0
EXIT_INFRASTRUCTURE = 1
EXIT_USAGE = 2


class HyperOpError(Exception):
    """超运算引擎错误基类"""
    pass


class ValidationError(HyperOpError):
    """参数验证错误（用法错误）"""
    pass


class DomainError(HyperOpError):
    """自变量超出定义域"""

    def __init__(self, message: str, alpha: Optional[float] = None):
        super().__init__(message)
        self.alpha = alpha


class RangeError(DomainError):
    """自变量超出逆函数的定义范围（即原函数的值域）"""
    pass


class SingularJetError(HyperOpError):
    """除以常数项为零的jet"""
    pass


class InvalidJetError(HyperOpError):
    """jet系数出现NaN或Inf"""
    pass


class OverflowGuardError(HyperOpError):
    """普通浮点溢出，需要改用层级索引表示"""
    pass


class WindowError(HyperOpError):
    """自变量在收敛窗口之下"""
    pass


class NormalizationError(HyperOpError):
    """归一化常数求解失败"""
    pass


class ConstructionError(HyperOpError):
    """层级构建失败"""
    pass


class ConvergenceError(HyperOpError):
    """迭代在上限内未收敛"""
    pass


class ContourError(HyperOpError):
    """围道采样出现非有限值"""
    pass


class NoThresholdError(HyperOpError):
    """ρ 在索引上限内始终不低于阈值"""
    pass


class StepDomainError(DomainError):
    """复合步骤在某一层求值失败"""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message}（步骤序号 {index}）")
        self.index = index


class SuiteError(HyperOpError):
    """校验套件基础设施错误"""
    pass


class ErrorHandler:
    """错误处理器"""

    def __init__(self, log_file: Optional[str] = None, verbose: bool = False):
        self.log_file = log_file
        self.verbose = verbose
        self.setup_logging()

    def setup_logging(self):
        """设置日志"""
        log_format = '%(asctime)s - %(levelname)s - %(message)s'
        level = logging.DEBUG if self.verbose else logging.INFO

        # 数据走stdout，日志走stderr
        handlers = [logging.StreamHandler(sys.stderr)]
        if self.log_file:
            handlers.append(logging.FileHandler(self.log_file, encoding='utf-8'))

        logging.basicConfig(level=level, format=log_format, handlers=handlers, force=True)
        self.logger = logging.getLogger(__name__)

    def handle_exception(self, exc_type, exc_value, exc_traceback):
        """全局异常处理器"""
        if issubclass(exc_type, KeyboardInterrupt):
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return

        error_msg = ''.join(traceback.format_exception(exc_type, exc_value, exc_traceback))
        self.logger.error(f"未捕获的异常: {error_msg}")
        print(f"错误: {self.get_user_friendly_message(exc_value)}", file=sys.stderr)

    def get_user_friendly_message(self, exc: BaseException) -> str:
        """获取用户友好的错误消息"""
        error_messages = {
            ValidationError: "参数不合法，请检查命令行选项。",
            RangeError: "自变量不在逆函数的定义范围内。",
            DomainError: "自变量不在定义域内。",
            OverflowGuardError: "结果超出普通浮点范围，请使用 --guarded 输出层级索引形式。",
            NormalizationError: "归一化常数求解失败，请尝试放宽容差。",
            ConstructionError: "层级构建失败。",
            SuiteError: "校验套件无法运行。",
            FileNotFoundError: "文件未找到，请检查文件路径是否正确。",
            PermissionError: "权限不足，请检查文件或目录的访问权限。",
            MemoryError: "内存不足，请缩小网格规模。",
            ImportError: "缺少必要的库，请运行 'pip install -r requirements.txt' 安装依赖。",
        }

        for error_type, message in error_messages.items():
            if isinstance(exc, error_type):
                detail = f"{message}\n详细错误: {exc}"
                alpha = getattr(exc, 'alpha', None)
                if alpha is not None:
                    detail += f"\nα = {alpha:.17g}"
                return detail

        return f"程序发生未知错误。\n错误类型: {type(exc).__name__}\n错误信息: {exc}"


def exit_code_for(exc: BaseException) -> int:
    """异常到退出码的映射"""
    if isinstance(exc, (ValidationError, DomainError)):
        return EXIT_USAGE
    return EXIT_INFRASTRUCTURE


def validate_tolerance(tolerance: float) -> bool:
    """验证容差"""
    if not (0 < tolerance < 1):
        raise ValidationError(f"容差必须在 (0, 1) 内: {tolerance}")
    return True


def validate_output_path(file_path: str) -> bool:
    """验证输出文件路径"""
    if not file_path:
        raise ValidationError("请指定输出文件")

    dir_path = os.path.dirname(os.path.abspath(file_path))
    if not os.path.isdir(dir_path):
        raise FileNotFoundError(f"输出目录不存在: {dir_path}")

    if not os.access(dir_path, os.W_OK):
        raise PermissionError(f"输出目录没有写入权限: {dir_path}")

    return True


def validate_grid_size(n_points: int, limit: int = 10 ** 6) -> bool:
    """验证网格规模"""
    if n_points <= 0:
        raise ValidationError("网格点数必须为正")
    if n_points > limit:
        raise ValidationError(f"网格过大（{n_points} 点，上限 {limit}）")
    return True




# 数值核心用到的第三方符号
REQUIRED_SYMBOLS = [
    ('numpy', None),
    ('scipy.optimize', 'brentq'),
    ('scipy.special', 'factorial'),
]


def check_dependencies() -> bool:
    """
    检查数值核心依赖的库与符号

    Raises:
        ImportError: 列出缺失项及安装命令
    """
    missing = []
    for module_name, symbol in REQUIRED_SYMBOLS:
        try:
            module = importlib.import_module(module_name)
        except ImportError:
            missing.append(module_name)
            continue
        if symbol is not None and not hasattr(module, symbol):
            missing.append(f"{module_name}.{symbol}")

    if missing:
        packages = sorted({name.split('.')[0] for name in missing})
        raise ImportError(f"缺少以下依赖: {', '.join(missing)}\n"
                          f"请运行: pip install -U {' '.join(packages)}")
    return True


# 全局错误处理器实例
global_error_handler: Optional[ErrorHandler] = None


def setup_global_error_handler(log_file: Optional[str] = None, verbose: bool = False) -> ErrorHandler:
    """设置全局错误处理器，未捕获的异常走 handle_exception"""
    global global_error_handler
    global_error_handler = ErrorHandler(log_file, verbose)
    sys.excepthook = global_error_handler.handle_exception
    return global_error_handler


def test_error_handler():
    """测试错误处理器"""
    handler = ErrorHandler(verbose=True)
    for exc in (DomainError("t = -2.5 不在 (α, ∞) 内", alpha=-2.0),
                StepDomainError("log 的自变量非正", index=4),
                OverflowGuardError("E_2(5) 超出 1e300")):
        print(f"[退出码 {exit_code_for(exc)}] {handler.get_user_friendly_message(exc)}")

    try:
        validate_tolerance(-1.0)
    except ValidationError as e:
        print(f"验证错误: {e}")

    try:
        check_dependencies()
        print("依赖检查通过")
    except ImportError as e:
        print(f"依赖检查失败: {e}")


if __name__ == "__main__":
    test_error_handler()
