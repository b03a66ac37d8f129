#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ES 基准测试 CLI
功能：
1. run: 按实验配置运行重复实验并输出差值表
2. presets: 列出内置模型
3. table: 从已有结果目录重新生成差值表
"""

import sys
import os
# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import argparse
import time
from typing import List, Optional

import humanize
import numpy as np
import pandas as pd
from dotenv import load_dotenv
from loguru import logger

from bench import ConfigLoader, builtin_presets, emit_tables, load_results, run_experiment, save_results
from bench.tables import format_table, summary_json
from esclust.utils import Utils
from esclust.utils.errors import EsClustError

LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}"
DEFAULT_LOG_DIR = "logs"


def setup_logging(verbose: bool = False, log_dir: str = DEFAULT_LOG_DIR) -> int:
    """配置日志：标准输出 + 按天滚动的文件，返回文件 sink 的 id"""
    logger.remove()
    logger.add(sys.stdout, format=LOG_FORMAT, level="DEBUG" if verbose else "INFO")
    return add_log_file(log_dir)


def add_log_file(log_dir: str) -> int:
    """在 log_dir 下添加按天滚动的日志文件"""
    log_path = Utils.get_log_dir(log_dir) / "es_bench_{time:YYYY-MM-DD}.log"
    return logger.add(str(log_path), rotation="1 day", retention="7 days", format=LOG_FORMAT)


class EsBenchCLI:
    def __init__(self, strict: bool = False, log_sink: Optional[int] = None, log_dir: str = DEFAULT_LOG_DIR):
        """
        :param strict: 有任何带标记的重复实验时以非零状态退出
        :param log_sink: 当前日志文件 sink 的 id
        :param log_dir: 当前日志目录
        """
        self.strict = strict
        self.log_sink = log_sink
        self.log_dir = log_dir

    def use_log_dir(self, log_dir: str):
        """把日志文件切换到实验配置的 log_dir"""
        if log_dir == self.log_dir and self.log_sink is not None:
            return
        if self.log_sink is not None:
            logger.remove(self.log_sink)
        self.log_sink = add_log_file(log_dir)
        self.log_dir = log_dir
        logger.debug(f"日志目录: {Utils.resolve_path(log_dir)}")

    def run(self, config_path: str, overrides: dict) -> int:
        """运行实验，保存原始结果并输出差值表"""
        experiment = ConfigLoader(config_path).get_experiment(overrides)
        self.use_log_dir(experiment.log_dir)
        output_dir = experiment.results_dir()
        started = time.monotonic()

        results = run_experiment(experiment)
        save_results(results, experiment, output_dir)
        emit_tables(results, experiment, output_dir)

        elapsed = humanize.naturaldelta(time.monotonic() - started)
        logger.debug(f"平均 ARI: {summary_json(results)}")
        logger.success(f"实验 '{experiment.name}' 完成，用时 {elapsed}，结果目录: {output_dir}")
        return self._exit_code(results)

    def table(self, results_dir: str) -> int:
        """从 raw/ 重新生成差值表并打印"""
        results_dir = Utils.resolve_path(results_dir)
        results, experiment = load_results(results_dir)
        written = emit_tables(results, experiment, results_dir)
        for path in written:
            if path.suffix == ".csv":
                logger.info(f"{path.relative_to(results_dir)}\n{format_table(pd.read_csv(path))}")
        return self._exit_code(results)

    @staticmethod
    def presets():
        """列出内置模型"""
        np.set_printoptions(precision=4, suppress=True)
        for name, preset in builtin_presets().items():
            label = "x" if preset.family == "mixture_only" else "B"
            matrix = np.array2string(preset.matrix(), separator=", ").replace("\n", "")
            print(f"{name:<12} {preset.family:<13} K={len(preset.pi)} pi={list(preset.pi)} "
                  f"d={preset.latent_config().d} {label}={matrix}")
            if preset.description:
                print(f"{'':<12} {preset.description}")

    def _exit_code(self, results) -> int:
        flagged = [r for r in results if r.flags]
        if flagged:
            logger.warning(f"{len(flagged)} 个重复实验带有标记，例如 n={flagged[0].n} "
                           f"rep={flagged[0].replication}: {flagged[0].flags}")
        return 1 if (self.strict and flagged) else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="esclust 谱聚类 ES/EM 基准测试 CLI")
    parser.add_argument("--verbose", action="store_true", help="输出 DEBUG 日志")
    parser.add_argument("--strict", action="store_true", help="有带标记的重复实验时返回非零状态")
    subparsers = parser.add_subparsers(dest="command", help="可用命令")

    # Command: run
    parser_run = subparsers.add_parser("run", help="运行实验")
    parser_run.add_argument("config", help="实验配置文件 (YAML)")
    parser_run.add_argument("--seed", type=int, help="主种子")
    parser_run.add_argument("--reps", type=int, dest="replications", help="每个 n 的重复次数")
    parser_run.add_argument("--jobs", type=int, help="并行进程数")
    parser_run.add_argument("--tol-ase", type=float, dest="tol_ase", help="ASE 与 EM 的收敛阈值")
    parser_run.add_argument("--tol-lse", type=float, dest="tol_lse", help="LSE 的收敛阈值")
    parser_run.add_argument("--max-iter", type=int, dest="max_iter", help="最大迭代次数")
    parser_run.add_argument("--moments", choices=["model", "empirical"], help="ES 协方差使用模型矩或经验矩")
    parser_run.add_argument("--output", dest="output_dir", help="结果根目录")

    # Command: presets
    subparsers.add_parser("presets", help="列出内置模型")

    # Command: table
    parser_table = subparsers.add_parser("table", help="从结果目录重新生成差值表")
    parser_table.add_argument("results_dir", help="run 输出的结果目录")
    return parser


def main(argv: Optional[List[str]] = None):
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    log_sink = setup_logging(args.verbose)

    if not args.command:
        parser.print_help()
        sys.exit(0)

    cli = EsBenchCLI(strict=args.strict, log_sink=log_sink)

    try:
        if args.command == "run":
            overrides = {key: getattr(args, key) for key in
                         ("seed", "replications", "jobs", "tol_ase", "tol_lse", "max_iter", "moments", "output_dir")}
            code = cli.run(args.config, overrides)
        elif args.command == "presets":
            cli.presets()
            code = 0
        else:
            code = cli.table(args.results_dir)
    except KeyboardInterrupt:
        logger.info("用户中断操作")
        sys.exit(0)
    except EsClustError as e:
        logger.error(f"执行出错 ({e.reason}): {e}")
        sys.exit(1)
    except Exception as e:
        logger.error(f"执行出错: {e}")
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
