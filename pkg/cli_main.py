#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
超运算塔数值引擎 - 命令行版本
求值、制表、求逆、校验与 φ 网格输出
"""

import argparse
import csv
import io
import json
import math
import sys
from typing import List, Optional

from config import Config, OUTPUT_FORMATS
from error_handler import (
    EXIT_INFRASTRUCTURE, EXIT_OK, HyperOpError, OverflowGuardError, DomainError,
    SuiteError, ValidationError, exit_code_for,
    setup_global_error_handler, validate_grid_size, validate_output_path, validate_tolerance,
)
from hyperop_tower import ExpLevel, HyperOpTower
from jet_arith import Jet
from level_cache import LevelCache
from phi_builder import phi_grid
from verify_suite import (all_hard_passed, check_registry, contraction_report,
                          derivative_positivity_probe, format_text_table, run_check, run_suite,
                          write_json_report)

VERSION = '超运算塔数值引擎 v1.0'


def fmt(x) -> str:
    """17 位有效数字"""
    return '%.17g' % x


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器"""
    common = argparse.ArgumentParser(add_help=False)
    numeric_group = common.add_argument_group('数值选项')
    numeric_group.add_argument('--tolerance', type=float, help='容差（默认 1e-10）')
    numeric_group.add_argument('--depth-cap', dest='depth_cap', type=int, help='复合深度上限（默认 256）')
    numeric_group.add_argument('--seed', type=int, help='校验采样种子（默认 0）')
    numeric_group.add_argument('--format', dest='output_format', choices=OUTPUT_FORMATS,
                               help='输出格式（默认 csv）')
    other_group = common.add_argument_group('其他选项')
    other_group.add_argument('--cache-dir', dest='cache_dir',
                             help='层级缓存目录（默认取环境变量 HYPEROP_CACHE_DIR）')
    other_group.add_argument('--log-file', dest='log_file', help='日志文件')
    other_group.add_argument('--verbose', action='store_true', help='显示详细信息')

    parser = argparse.ArgumentParser(
        description='超运算塔数值引擎：四级运算 e↑↑t 及更高层 e↑^k t 的求值与校验',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例用法:
  %(prog)s eval --k 2 --t 0                  # 𝓕(0) = 1
  %(prog)s eval --k 3 --t -2                 # E_3(-2) = -1
  %(prog)s eval --k 2 --t 10 --inverse       # slog(10)
  %(prog)s eval --k 2 --t 0.5 --jet 4        # 带前 4 阶Taylor系数
  %(prog)s table --k 2 --from -1 --to 1 --step 0.5 --out t2.csv
  %(prog)s verify --max-level 3 --report report.json
  %(prog)s phi --re 1 --im 0 --check
  %(prog)s phi --grid=-2,2,-2,2,101 --out phi.csv

退出码:
  0 成功；1 基础设施错误（构建失败、文件不可写、校验未通过）；2 用法或定义域错误
        """
    )
    parser.add_argument('--version', action='version', version=VERSION)
    sub = parser.add_subparsers(dest='command', required=True)

    p_eval = sub.add_parser('eval', parents=[common], help='求 E_k(t) 或 𝒜_k(x)')
    p_eval.add_argument('--k', type=int, required=True, help='层号')
    p_eval.add_argument('--t', type=float, required=True, help='自变量')
    p_eval.add_argument('--jet', type=int, help='同时输出的jet阶数')
    p_eval.add_argument('--guarded', action='store_true', help='输出层级索引形式')
    p_eval.add_argument('--eps', type=float, help='本次求值的收敛阈值')
    p_eval.add_argument('--inverse', action='store_true', help='求逆函数 𝒜_k')

    p_table = sub.add_parser('table', parents=[common], help='等距制表')
    p_table.add_argument('--k', type=int, required=True, help='层号')
    p_table.add_argument('--from', dest='start', type=float, required=True, help='起点')
    p_table.add_argument('--to', dest='stop', type=float, required=True, help='终点')
    p_table.add_argument('--step', type=float, required=True, help='步长')
    p_table.add_argument('--out', required=True, help='输出文件')

    p_verify = sub.add_parser('verify', parents=[common], help='运行校验套件')
    p_verify.add_argument('--max-level', dest='max_level', type=int, help='校验到第几层（默认 4）')
    p_verify.add_argument('--report', help='JSON 报告路径')
    p_verify.add_argument('--probes', action='store_true', help='附带导数正性与收缩因子探针')
    p_verify.add_argument('--only', action='append', metavar='CHECK_ID',
                          help='只运行指定检查（可重复）')

    p_phi = sub.add_parser('phi', parents=[common], help='辅助函数 φ')
    p_phi.add_argument('--re', type=float, default=0.0, help='实部')
    p_phi.add_argument('--im', type=float, default=0.0, help='虚部')
    p_phi.add_argument('--deriv', type=int, help='围道积分求 k 阶导数')
    p_phi.add_argument('--check', action='store_true', help='打印函数方程残差')
    p_phi.add_argument('--grid', help='复平面网格 re0,re1,im0,im1,n')
    p_phi.add_argument('--out', help='网格输出文件（缺省为标准输出）')

    return parser


def print_progress(message, verbose=True):
    """打印进度信息（标准错误，标准输出只留给数据）"""
    if verbose:
        print(f"[INFO] {message}", file=sys.stderr)


def make_tower(config: Config) -> HyperOpTower:
    cache_dir = config.resolve_cache_dir()
    cache = LevelCache(cache_dir) if cache_dir else None
    return HyperOpTower(config, cache)


def resolve_level(tower: HyperOpTower, k: int):
    """k=2 用 τ 路径的四级运算，其余用塔中的层"""
    if k < 1:
        raise ValidationError(f"层号必须 ≥ 1: {k}")
    if k == 1:
        return ExpLevel()
    if k == 2:
        return tower.tetration_function
    return tower.level(k)


def cmd_eval(args, config: Config) -> int:
    tower = make_tower(config)
    level = resolve_level(tower, args.k)
    print_progress(f"第 {args.k} 层就绪", args.verbose)

    jet_coeffs = None
    if args.guarded and not args.inverse:
        value = level.evaluate_guarded(args.t)
        if value.is_plain:
            text = fmt(value.to_float())
        else:
            text = f"exp^{value.level}({fmt(value.residual)})"
        record = {'k': args.k, 't': args.t, 'level': value.level, 'residual': value.residual}
    else:
        if args.inverse:
            value = level.inverse(args.t)
        else:
            value = level.evaluate(args.t, args.eps)
        text = fmt(value)
        record = {'k': args.k, 't': args.t, 'value': value}

        if args.jet is not None:
            if not 0 <= args.jet <= config.max_jet_order:
                raise ValidationError(f"jet 阶数必须在 0..{config.max_jet_order}: {args.jet}")
            x = Jet.variable(args.t, args.jet)
            jet = level.inverse(x) if args.inverse else level.evaluate(x, args.eps)
            jet_coeffs = [float(c) for c in jet.coeffs]
            record['jet'] = jet_coeffs

    if config.output_format == 'json':
        if not args.inverse and args.k >= 2 and hasattr(level, 'landing_report'):
            record['report'] = level.landing_report(args.t).report.to_dict()
        print(json.dumps(record, ensure_ascii=False, default=str))
    else:
        print(text)
        if jet_coeffs is not None:
            print(' '.join(fmt(c) for c in jet_coeffs))
    return EXIT_OK


def table_points(start: float, stop: float, step: float) -> List[float]:
    """floor((to-from)/step)+1 个等距点"""
    if step <= 0:
        raise ValidationError(f"步长必须为正: {step}")
    if start > stop:
        raise ValidationError(f"区间为空: from={start} > to={stop}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def table_rows(level, points: List[float]) -> List[dict]:
    """每行：t、值、一阶导数、函数方程残差、标记"""
    rows = []
    for t in points:
        row = {'t': t, 'value': '', 'first_derivative': '', 'residual_of_functional_equation': '', 'flag': ''}
        try:
            value = level.evaluate(t)
            row['value'] = value
            row['first_derivative'] = level.evaluate(Jet.variable(t, 1)).coeffs[1]
            if level.predecessor is not None:
                nxt = level.evaluate(t + 1.0)
                row['residual_of_functional_equation'] = \
                    abs(level.predecessor.evaluate(value) - nxt) / max(1.0, abs(nxt))
        except DomainError:
            row['flag'] = 'domain'
        except (OverflowGuardError, OverflowError):
            row['flag'] = 'overflow'
        rows.append(row)
    return rows


def _cell(x) -> str:
    return fmt(x) if isinstance(x, float) else str(x)


def render_rows(rows: List[dict], output_format: str) -> str:
    columns = ['t', 'value', 'first_derivative', 'residual_of_functional_equation', 'flag']
    if output_format == 'json':
        return json.dumps([{c: r[c] for c in columns} for r in rows], ensure_ascii=False, indent=2) + '\n'
    if output_format == 'text':
        lines = ['  '.join(f"{c:>24}" for c in columns)]
        lines += ['  '.join(f"{_cell(r[c]):>24}" for c in columns) for r in rows]
        return '\n'.join(lines) + '\n'

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r[c]) for c in columns])
    return buffer.getvalue()


def cmd_table(args, config: Config) -> int:
    points = table_points(args.start, args.stop, args.step)
    validate_grid_size(len(points))
    validate_output_path(args.out)

    tower = make_tower(config)
    level = resolve_level(tower, args.k)
    print_progress(f"计算 {len(points)} 行...", args.verbose)
    content = render_rows(table_rows(level, points), config.output_format)

    with open(args.out, 'w', encoding='utf-8', newline='') as f:
        f.write(content)
    print_progress(f"已写入 {args.out}", args.verbose)
    return EXIT_OK


def cmd_verify(args, config: Config) -> int:
    if config.max_level < 1:
        raise ValidationError(f"max-level 必须 ≥ 1: {config.max_level}")
    unknown = [c for c in (args.only or []) if c not in check_registry()]
    if unknown:
        raise ValidationError(f"未知的检查编号: {', '.join(unknown)}")
    if args.report:
        validate_output_path(args.report)

    tower = make_tower(config)
    levels = []
    for k in range(1, config.max_level + 1):
        print_progress(f"构建第 {k} 层...", args.verbose)
        try:
            levels.append(tower.level(k))
        except HyperOpError as e:
            raise SuiteError(f"第 {k} 层构建失败: {e}") from e

    tetration = None if args.only or config.max_level < 2 else tower.tetration_function
    if args.only:
        results = []
        for check_id in args.only:
            results.extend(run_check(check_id, levels, config, tetration))
        results.sort(key=lambda r: r.check_id)
    else:
        results = run_suite(levels, config, tetration)

    probes = None
    if args.probes and config.max_level >= 2:
        probes = {
            'derivative_positivity': derivative_positivity_probe(levels[1], 3, (-1.9, 2.0)),
            'contraction': [contraction_report(lv, order=min(config.jet_order, 4)) for lv in levels[1:]],
        }

    if args.report:
        write_json_report(results, args.report, probes)
    if config.output_format == 'json':
        print(json.dumps([r.to_dict() for r in results], ensure_ascii=False, indent=2, default=str))
    else:
        print(format_text_table(results))

    return EXIT_OK if all_hard_passed(results) else EXIT_INFRASTRUCTURE


def parse_grid(text: str):
    parts = text.split(',')
    if len(parts) != 5:
        raise ValidationError(f"网格格式应为 re0,re1,im0,im1,n: {text}")
    try:
        re0, re1, im0, im1 = (float(p) for p in parts[:4])
        n = int(parts[4])
    except ValueError as e:
        raise ValidationError(f"网格参数无法解析: {text}") from e
    if n < 1:
        raise ValidationError(f"网格点数必须为正: {n}")
    return re0, re1, im0, im1, n


def cmd_phi(args, config: Config) -> int:
    tower = make_tower(config)
    phi = tower.phi

    if args.grid:
        re0, re1, im0, im1, n = parse_grid(args.grid)
        validate_grid_size(n * n)
        if args.out:
            validate_output_path(args.out)
        re, im, values = phi_grid(phi, re0, re1, im0, im1, n)

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['re', 'im', 'abs', 'arg'])
        for x, y, v in zip(re, im, values):
            writer.writerow([fmt(x), fmt(y), fmt(abs(v)), fmt(math.atan2(v.imag, v.real))])
        if args.out:
            with open(args.out, 'w', encoding='utf-8', newline='') as f:
                f.write(buffer.getvalue())
        else:
            sys.stdout.write(buffer.getvalue())
        return EXIT_OK

    s = complex(args.re, args.im) if args.im else args.re
    if args.deriv is not None:
        if args.deriv < 0:
            raise ValidationError(f"导数阶数必须非负: {args.deriv}")
        value = phi.cauchy_derivative(s, args.deriv, radius=config.contour_radius)
        if args.im == 0:
            value = value.real
    else:
        value = phi.phi(s)

    if isinstance(value, complex):
        print(f"{fmt(value.real)} {fmt(value.imag)}")
    else:
        print(fmt(value))

    if args.check:
        residual = phi.complex_residual(s) if args.im else phi.phi_residual(args.re)
        print(f"residual {fmt(residual)}")
    return EXIT_OK


COMMANDS = {
    'eval': cmd_eval,
    'table': cmd_table,
    'verify': cmd_verify,
    'phi': cmd_phi,
}


def main(argv: Optional[List[str]] = None) -> int:
    """主函数，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    error_handler = setup_global_error_handler(args.log_file, args.verbose)
    try:
        config = Config.from_args(args)
        validate_tolerance(config.tolerance)
        if not config.validate():
            raise ValidationError("配置不合法（容差须为正，jet 阶数 ≤ 12，层号 ≥ 1）")
        print_progress(VERSION, args.verbose)
        return COMMANDS[args.command](args, config)

    except (HyperOpError, OSError) as e:
        print(f"错误: {error_handler.get_user_friendly_message(e)}", file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        print(f"程序错误: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_INFRASTRUCTURE


if __name__ == "__main__":
    sys.exit(main())
