"""
差分网络估计 - 命令行入口

子命令:
    estimate  单个 λ 的差分网络估计，输出 delta.csv / edges.csv / meta.json
    path      λ 网格上的解路径，输出 path.csv / meta.json
    simulate  生成仿真数据，输出 x.csv / y.csv / truth.csv / meta.json
    bench     路径求解计时，输出 bench.csv / meta.json

退出码:
    0 成功；1 参数错误；2 数据或数值错误；3 达到最大迭代次数仍未收敛（结果照常写出）
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

# 添加项目根目录到 Python 路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from modules.bench_module import BenchSettings, run_bench
from modules.loss_module import GradientEngine, LossKind, engine_options
from modules.path_module import PathSettings, lambda_grid, solve_path
from modules.simulation_module import build_design, design_to_frames, simulate_two_sample
from modules.solvers import SolverFactory, symmetrize
from utils.data_processing import TwoSampleData, load_csv, load_labeled_csv, preprocess
from utils.data_read_write import RunMetadata, checksums, create_result_writer
from utils.errors import DegenerateDataError, DiffNetError, InvalidArgumentError
from utils.initialization import init_multi_level_loggers, load_configs

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NOT_CONVERGED = 3


class UsageError(Exception):
    """命令行用法错误"""


class DiffNetArgumentParser(argparse.ArgumentParser):
    """参数解析失败时抛出 UsageError（退出码 1），而不是 argparse 默认的退出码 2"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: 参数错误: {message}")


@dataclass
class RunContext:
    """
    单次命令运行的上下文

    属性:
        args: 解析后的命令行参数
        main_config: main_config.yaml 内容
        loggers: 所有日志器
        n_threads: 并行线程数（命令行优先，其次 cli.threads）
    """
    args: argparse.Namespace
    main_config: Dict
    loggers: Dict[str, logging.Logger]
    n_threads: int = 1

    @property
    def logger(self) -> logging.Logger:
        return self.loggers["main"]


# ==================== 参数解析 ====================

def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config-dir", default=None, help="配置目录（默认为项目 configs/）")
    parser.add_argument("--log-dir", default=None, help="日志目录（默认取 utils_config.yaml）")
    parser.add_argument("--out-dir", default=".", help="输出目录（默认当前目录）")
    parser.add_argument("--threads", type=int, default=None, help="矩阵乘法与无热启动路径的并行线程数")


def _add_estimation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x", default=None, help="第一组数据 CSV")
    parser.add_argument("--y", default=None, help="第二组数据 CSV")
    parser.add_argument("--data", default=None, help="单个数据 CSV（与 --label 搭配）")
    parser.add_argument("--label", default=None, help="--data 中的二值标签列名，首次出现的标签为第一组")
    parser.add_argument("--no-header", action="store_true", help="CSV 没有表头行")
    parser.add_argument("--delimiter", default=",", help="CSV 分隔符（默认逗号）")
    parser.add_argument("--loss", choices=["sym", "asym"], default="sym", help="损失类型（默认 sym）")
    parser.add_argument("--solver", choices=["fista", "admm"], default="fista", help="求解器（默认 fista）")
    parser.add_argument("--mode", choices=["auto", "dense", "lowrank"], default=None, help="梯度计算模式")
    parser.add_argument("--tol", type=float, default=None, help="相对停止阈值（默认 1e-5）")
    parser.add_argument("--max-iter", type=int, default=None, help="最大迭代次数")
    parser.add_argument("--standardize", action="store_true", help="逐组标准化")
    parser.add_argument("--npn", action="store_true", help="逐组 nonparanormal 变换（在标准化之后）")
    parser.add_argument("--symmetrize", action="store_true", help="输出 (Δ + Δᵀ)/2")


def build_parser() -> argparse.ArgumentParser:
    parser = DiffNetArgumentParser(prog="diffnet", description="基于 D-trace 损失的稀疏差分网络估计")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=DiffNetArgumentParser)

    estimate = subparsers.add_parser("estimate", help="单个 λ 的估计")
    _add_common_flags(estimate)
    _add_estimation_flags(estimate)
    estimate.add_argument("--lambda", dest="lambda_", type=float, default=None,
                          help="惩罚参数 λ（默认 0.5·λmax）")

    path = subparsers.add_parser("path", help="λ 网格上的解路径")
    _add_common_flags(path)
    _add_estimation_flags(path)
    path.add_argument("--nlambda", type=int, default=None, help="λ 个数（默认 50）")
    path.add_argument("--lambda-min-ratio", type=float, default=None, help="最小 λ 与 λmax 之比（默认 0.5）")
    path.add_argument("--warm-start", action=argparse.BooleanOptionalAction, default=None,
                      help="以上一个 λ 的解为初值（默认开启）")

    simulate = subparsers.add_parser("simulate", help="生成仿真数据")
    _add_common_flags(simulate)
    simulate.add_argument("--case", choices=["sparse", "asymsparse"], default="sparse")
    simulate.add_argument("--p", type=int, required=True, help="维数（≥ 2）")
    simulate.add_argument("--n1", type=int, default=None, help="第一组样本量（默认 200）")
    simulate.add_argument("--n2", type=int, default=None, help="第二组样本量（默认 200）")
    simulate.add_argument("--seed", type=int, default=None, help="随机种子")

    bench = subparsers.add_parser("bench", help="路径求解计时")
    _add_common_flags(bench)
    bench.add_argument("--p", type=int, nargs="+", default=None, help="维数列表")
    bench.add_argument("--reps", type=int, default=None, help="重复次数（默认 10）")
    bench.add_argument("--case", choices=["sparse", "asymsparse"], default="sparse")
    bench.add_argument("--solver", nargs="+", choices=["fista", "admm"], default=None, help="求解器列表")
    bench.add_argument("--mode", nargs="+", choices=["dense", "lowrank"], default=None, help="计算模式列表")
    bench.add_argument("--loss", choices=["sym", "asym"], default="asym", help="损失类型（默认 asym，ADMM 只支持 asym）")
    bench.add_argument("--seed", type=int, default=None, help="基础随机种子，第 r 次重复使用 seed + r")
    bench.add_argument("--n1", type=int, default=None)
    bench.add_argument("--n2", type=int, default=None)
    bench.add_argument("--nlambda", type=int, default=None)
    bench.add_argument("--lambda-min-ratio", type=float, default=None)
    bench.add_argument("--tol", type=float, default=None)
    bench.add_argument("--max-iter", type=int, default=None)

    return parser


# ==================== 公共步骤 ====================

def load_two_sample(args: argparse.Namespace) -> TwoSampleData:
    """按 --x/--y 或 --data/--label 读取两组数据"""
    has_header = not args.no_header
    if args.data is not None:
        if args.x is not None or args.y is not None:
            raise UsageError("--data 不能与 --x/--y 同时使用")
        if args.label is None:
            raise UsageError("使用 --data 时必须给出 --label")
        if not has_header:
            raise UsageError("--data/--label 模式要求 CSV 带表头")
        return load_labeled_csv(args.data, args.label, delimiter=args.delimiter)

    if args.x is None or args.y is None:
        raise UsageError("需要同时给出 --x 与 --y，或使用 --data 与 --label")
    x, names_x = load_csv(args.x, has_header=has_header, delimiter=args.delimiter)
    y, names_y = load_csv(args.y, has_header=has_header, delimiter=args.delimiter)
    return TwoSampleData(x=x, y=y, variable_names=names_x or names_y)


def input_files(args: argparse.Namespace) -> List[str]:
    return [f for f in (args.x, args.y, args.data) if f is not None]


def build_engine(ctx: RunContext, data: TwoSampleData) -> GradientEngine:
    args = ctx.args
    mode = args.mode or (ctx.main_config.get("engine", {}) or {}).get("mode", "auto")
    return GradientEngine.from_data(
        data.x,
        data.y,
        kind=args.loss,
        mode=mode,
        n_threads=ctx.n_threads,
        **engine_options(ctx.main_config),
    )


def solver_overrides(args: argparse.Namespace) -> Dict:
    overrides = {"rel_tol": args.tol, "max_iter": args.max_iter}
    if getattr(args, "symmetrize", False):
        overrides["symmetrize_output"] = True
    return overrides


def prepared_data(ctx: RunContext) -> TwoSampleData:
    data = load_two_sample(ctx.args)
    data = preprocess(data, standardize_data=ctx.args.standardize, npn=ctx.args.npn)
    ctx.logger.info(f"数据就绪: n1={data.n1}, n2={data.n2}, p={data.p}")
    print(f"✓ 数据读取成功: n1={data.n1}, n2={data.n2}, p={data.p}")
    return data


# ==================== 子命令 ====================

def cmd_estimate(ctx: RunContext) -> int:
    args = ctx.args
    data = prepared_data(ctx)
    engine = build_engine(ctx, data)

    lam = args.lambda_ if args.lambda_ is not None else 0.5 * engine.lambda_max
    if lam < 0:
        raise InvalidArgumentError(f"惩罚参数 λ 必须非负，实际为 {lam}")

    solver = SolverFactory.create_solver(
        args.solver, engine, main_config=ctx.main_config, logger=ctx.logger,
        lambda_=lam, **solver_overrides(args),
    )
    result = solver.solve()

    delta, objective = result.delta_hat, result.objective
    # ADMM 的配置不含对称化选项，这里统一处理
    if args.symmetrize and args.solver == "admm":
        delta = symmetrize(delta)
        objective = engine.objective(delta, lam)

    meta = RunMetadata(
        command="estimate",
        loss_kind=engine.kind.value,
        solver=result.solver,
        lambda_=lam,
        lambda_max=engine.lambda_max,
        iterations=result.iterations,
        objective=objective,
        wall_time_seconds=result.elapsed_seconds,
        lipschitz_used=result.lipschitz_used,
        converged=result.converged,
        input_checksums=checksums(input_files(args)),
        extra={
            "mode": engine.mode.value,
            "p": engine.p,
            "nonzeros": int((delta != 0).sum()),
            "prox_residual": result.prox_residual,
            "standardize": args.standardize,
            "npn": args.npn,
            "symmetrize": args.symmetrize,
        },
    )
    create_result_writer(args.out_dir, ctx.logger).write_estimate(delta, meta)
    print(f"✓ 估计完成: λ={lam:.6g}, 迭代 {result.iterations} 次, 非零元 {meta.extra['nonzeros']}")

    if not result.converged:
        print(f"✗ 达到最大迭代次数仍未收敛，结果已写入 {args.out_dir}")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_path(ctx: RunContext) -> int:
    args = ctx.args
    data = prepared_data(ctx)
    engine = build_engine(ctx, data)
    settings = PathSettings.from_config(
        ctx.main_config,
        n_lambda=args.nlambda,
        min_ratio=args.lambda_min_ratio,
        warm_start=args.warm_start,
    )
    if engine.lambda_max == 0:
        raise DegenerateDataError("两组样本协方差完全相同（λmax = 0），无法构造 λ 网格")
    grid = lambda_grid(engine.lambda_max, settings.n_lambda, settings.min_ratio)

    config = SolverFactory.build_config(args.solver, ctx.main_config, **solver_overrides(args))
    solver = SolverFactory.create_solver(args.solver, engine, config=config, logger=ctx.logger)
    result = solve_path(
        engine, grid, config, warm_start=settings.warm_start, n_threads=ctx.n_threads, solver=solver
    )

    estimates = [s.delta_hat for s in result.solutions]
    if args.symmetrize and args.solver == "admm":
        estimates = [symmetrize(d) for d in estimates]

    meta = RunMetadata(
        command="path",
        loss_kind=engine.kind.value,
        solver=result.solver,
        grid={
            "n_lambda": settings.n_lambda,
            "min_ratio": settings.min_ratio,
            "warm_start": settings.warm_start,
            "values": grid,
        },
        lambda_max=engine.lambda_max,
        iterations=result.total_iterations,
        objective=result.solutions[-1].objective,
        wall_time_seconds=result.elapsed_seconds,
        lipschitz_used=result.solutions[-1].lipschitz_used,
        converged=result.all_converged,
        input_checksums=checksums(input_files(args)),
        per_lambda=[
            {
                "lambda": lam,
                "iterations": s.iterations,
                "objective": s.objective,
                "converged": s.converged,
                "nonzeros": int((d != 0).sum()),
            }
            for lam, s, d in zip(grid, result.solutions, estimates)
        ],
        extra={"mode": engine.mode.value, "p": engine.p, "standardize": args.standardize, "npn": args.npn},
    )
    create_result_writer(args.out_dir, ctx.logger).write_path(grid, estimates, meta)
    print(f"✓ 路径求解完成: {len(grid)} 个 λ, 总迭代 {result.total_iterations} 次")

    if not result.all_converged:
        print(f"✗ 部分 λ 未收敛，结果已写入 {args.out_dir}")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_simulate(ctx: RunContext) -> int:
    args = ctx.args
    simulation = ctx.main_config.get("simulation", {}) or {}
    n1 = args.n1 if args.n1 is not None else int(simulation.get("n1", 200))
    n2 = args.n2 if args.n2 is not None else int(simulation.get("n2", 200))
    seed = args.seed if args.seed is not None else int(simulation.get("seed", 2019))
    if n1 < 1 or n2 < 1:
        raise InvalidArgumentError(f"样本量必须为正整数，实际为 n1={n1}, n2={n2}")

    design = build_design(args.case, args.p)
    X, Y = simulate_two_sample(design, n1, n2, seed)
    meta = RunMetadata(
        command="simulate",
        seed=seed,
        extra={"case": design.variant.value, "p": design.p, "n1": n1, "n2": n2},
    )
    create_result_writer(args.out_dir, ctx.logger).write_simulation(design_to_frames(design, X, Y), meta)
    print(f"✓ 仿真数据已生成: case={design.variant.value}, p={design.p}, n1={n1}, n2={n2}, seed={seed}")
    return EXIT_OK


def cmd_bench(ctx: RunContext) -> int:
    args = ctx.args
    settings = BenchSettings.from_config(
        ctx.main_config,
        p_list=args.p,
        reps=args.reps,
        solvers=args.solver,
        modes=args.mode,
        case=args.case,
        loss=args.loss,
        n1=args.n1,
        n2=args.n2,
        seed=args.seed,
    )
    path_settings = PathSettings.from_config(
        ctx.main_config, n_lambda=args.nlambda, min_ratio=args.lambda_min_ratio
    )
    start = time.perf_counter()
    rows = run_bench(
        settings,
        ctx.main_config,
        path_settings=path_settings,
        n_threads=ctx.n_threads,
        rel_tol=args.tol,
        max_iter=args.max_iter,
    )
    meta = RunMetadata(
        command="bench",
        loss_kind=LossKind.parse(settings.loss).value,
        seed=settings.seed,
        iterations=sum(r["iterations_total"] for r in rows),
        wall_time_seconds=time.perf_counter() - start,
        grid={"n_lambda": path_settings.n_lambda, "min_ratio": path_settings.min_ratio,
              "warm_start": path_settings.warm_start},
        extra={
            "case": settings.case,
            "p": settings.p_list,
            "reps": settings.reps,
            "solvers": settings.solvers,
            "modes": settings.modes,
            "n1": settings.n1,
            "n2": settings.n2,
        },
    )
    create_result_writer(args.out_dir, ctx.loggers["bench"]).write_bench(rows, meta)
    print(f"✓ 基准测试完成: {len(rows)} 条记录")
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "path": cmd_path,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


# ==================== 入口 ====================

def initialize(args: argparse.Namespace) -> RunContext:
    """加载配置并初始化日志系统"""
    try:
        main_config, utils_config = load_configs(args.config_dir)
    except (OSError, ValueError) as e:
        raise UsageError(f"配置文件加载失败: {e}") from e

    loggers = init_multi_level_loggers(utils_config.get("logging", {}), log_dir=args.log_dir)
    n_threads = args.threads if args.threads is not None else int(
        (main_config.get("cli", {}) or {}).get("threads", 1)
    )
    if n_threads < 1:
        raise InvalidArgumentError(f"线程数至少为 1，实际为 {n_threads}")
    return RunContext(args=args, main_config=main_config, loggers=loggers, n_threads=n_threads)


def main(argv: Optional[List[str]] = None) -> int:
    """
    主函数

    参数:
        argv: 命令行参数（默认 sys.argv[1:]）

    返回:
        退出码 0 / 1 / 2 / 3
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    ctx = None
    try:
        ctx = initialize(args)
        ctx.logger.info(f"执行子命令: {args.command}")
        code = COMMANDS[args.command](ctx)
        ctx.logger.info(f"子命令 {args.command} 结束，退出码 {code}")
        return code
    except (UsageError, InvalidArgumentError) as e:
        _report(ctx, f"参数错误: {e}")
        return EXIT_USAGE
    except (DiffNetError, FileNotFoundError) as e:
        _report(ctx, f"数据或数值错误: {e}")
        return EXIT_DATA
    except Exception as e:
        if ctx is not None:
            ctx.logger.error(f"程序运行出错: {e}", exc_info=True)
        print(f"\n✗ 程序运行出错: {e}", file=sys.stderr)
        return EXIT_DATA
    finally:
        if ctx is not None:
            for logger in ctx.loggers.values():
                for handler in logger.handlers:
                    handler.flush()


def _report(ctx: Optional[RunContext], message: str) -> None:
    if ctx is not None:
        ctx.logger.error(message)
    print(f"✗ {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
