import argparse
import io
import logging
import sys
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from common.exceptions import InvalidArgumentError, IrsWorkbenchError, TrainingDivergenceError
from module_baselines.main import BASELINE_KINDS, baseline_no_irs, baseline_random_phase, run_baseline_kind
from module_config_init.main import (
    DEFAULT_CONFIG_PATH, LOG_LEVEL, SWEEP_JOBS, SWEEP_VARIABLES, ExperimentConfig, coerce_value,
    parse_config, render_default_table,
)
from module_logging_notification.main import format_run_summary, format_sweep_summary, log_event, setup_logging
from module_pds_per_agent.main import evaluate, prepare_normalizer, train_from_config
from module_q_network.main import load_checkpoint, save_checkpoint
from module_secure_env.main import make_env

logger = logging.getLogger(__name__)

APPROACHES = ("pds_per", "dqn", "random_phase", "no_irs")
SWEEP_COLUMNS = ["approach", "sweep_var", "value", "seed", "avg_secrecy_rate", "qos_sat_prob"]
FLOAT_FORMAT = "%.12g"

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_BAD_INPUT = 2
EXIT_DIVERGED = 3


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    seeds: tuple

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise InvalidArgumentError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if len(self.values) < 2:
            raise InvalidArgumentError(f"sweep needs at least two values, got {len(self.values)}")
        if len(self.seeds) < 1:
            raise InvalidArgumentError("sweep needs at least one seed")


def parse_sweep_spec(variable, values_text, seeds_text):
    """'15,25,35' 依變數型別逐一轉換；種子為整數列表。"""
    if variable not in SWEEP_VARIABLES:
        raise InvalidArgumentError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {variable!r}")
    values = tuple(coerce_value(variable, v) for v in values_text.split(",") if v.strip())
    try:
        seeds = tuple(int(s) for s in seeds_text.split(",") if s.strip())
    except ValueError as e:
        raise InvalidArgumentError(f"seeds must be integers: {seeds_text!r}") from e
    return SweepSpec(variable=variable, values=values, seeds=seeds)


def load_config(path=None, seed=None):
    """未指定路徑時使用 IRS_CONFIG，兩者皆空則使用預設值；--seed 覆寫設定中的 seed。"""
    path = path or DEFAULT_CONFIG_PATH
    cfg = parse_config(path) if path else ExperimentConfig()
    if seed is not None:
        cfg = cfg.with_overrides(seed=seed)
    return cfg


def config_header(cfg, extra=None):
    """'# key = value' 註解標頭：完整設定 + 推導出的瓦特值 + 額外的執行資訊。"""
    lines = [f"# {key} = {value}" for key, value in cfg.to_items()]
    lines.append(f"# p_max_watt = {cfg.p_max_watt:.6g}")
    lines.append(f"# noise_watt = {cfg.noise_watt:.6g}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    return "\n".join(lines) + "\n"


def write_csv(df, path, cfg, extra=None):
    """寫出帶設定標頭的 CSV。path 為 None 時輸出到 stdout。回傳完整文字。"""
    buffer = io.StringIO()
    buffer.write(config_header(cfg, extra))
    df.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    text = buffer.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        logger.info(f"Wrote {len(df)} rows to {path}.")
    return text


def run_train(cfg, out=None, checkpoint=None):
    """訓練並輸出學習曲線 CSV；指定 checkpoint 時另存網路參數。"""
    result, _ = train_from_config(cfg)
    write_csv(result.stats, out, cfg)
    logger.info(format_run_summary(result.stats))
    if checkpoint:
        save_checkpoint(result.net, checkpoint)
        log_event("CHECKPOINT_SAVED", {"path": str(checkpoint), "layer_sizes": result.net.layer_sizes})
    return result


def run_eval(cfg, checkpoint, out=None):
    """
    載入 checkpoint，以相同 seed 與暖身步數重建正規化器後做 ε = 0 評估。
    """
    net = load_checkpoint(checkpoint)
    env = make_env(cfg)
    if net.n_inputs != env.state_dim or net.n_outputs != env.n_actions:
        raise InvalidArgumentError(
            f"checkpoint network {net.layer_sizes} does not fit state_dim={env.state_dim}, "
            f"n_actions={env.n_actions}")
    prepare_normalizer(env, cfg.seed, cfg.warmup_steps)
    result = evaluate(net, env, cfg.eval_episodes, cfg.seed, cfg.use_pds, cfg.reward_scale)
    df = pd.DataFrame([{
        "approach": "pds_per" if cfg.use_pds else "dqn",
        "seed": cfg.seed,
        "avg_secrecy_rate": result.avg_secrecy_rate,
        "qos_secrecy": result.qos_secrecy,
        "qos_rate": result.qos_rate,
        "qos_sat_prob": result.qos_sat_prob,
    }])
    write_csv(df, out, cfg, {"checkpoint": checkpoint})
    return result


def _learned_cell(cfg, use_pds, use_per):
    result, env = train_from_config(cfg, use_pds=use_pds, use_per=use_per)
    return evaluate(result.net, env, cfg.eval_episodes, cfg.seed, use_pds, cfg.reward_scale)


def run_sweep_cell(cfg, variable, value, seed, approach):
    """單一 (取值, 種子, 方案) 格：擁有自己的環境、網路、緩衝區與 RNG。"""
    cell_cfg = cfg.with_overrides(**{variable: value, "seed": seed})
    if approach == "pds_per":
        result = _learned_cell(cell_cfg, use_pds=True, use_per=True)
    elif approach == "dqn":
        result = _learned_cell(cell_cfg, use_pds=False, use_per=False)
    elif approach == "random_phase":
        result = baseline_random_phase(cell_cfg, seed)
    elif approach == "no_irs":
        result = baseline_no_irs(cell_cfg, seed)
    else:
        raise InvalidArgumentError(f"unknown approach {approach!r}")
    row = {
        "approach": approach, "sweep_var": variable, "value": value, "seed": seed,
        "avg_secrecy_rate": result.avg_secrecy_rate, "qos_sat_prob": result.qos_sat_prob,
    }
    log_event("SWEEP_CELL", row)
    return row


def aggregate_sweep(rows):
    """每個 (方案, 取值) 的 mean/std 列 (母體標準差，ddof = 0)；seed 欄填 'mean' / 'std'。"""
    df = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    aggregates = []
    for (approach, value), group in df.groupby(["approach", "value"], sort=False):
        for stat in ("mean", "std"):
            aggregates.append({
                "approach": approach, "sweep_var": group["sweep_var"].iloc[0], "value": value, "seed": stat,
                "avg_secrecy_rate": float(np.mean(group["avg_secrecy_rate"])) if stat == "mean"
                else float(np.std(group["avg_secrecy_rate"], ddof=0)),
                "qos_sat_prob": float(np.mean(group["qos_sat_prob"])) if stat == "mean"
                else float(np.std(group["qos_sat_prob"], ddof=0)),
            })
    return pd.DataFrame(aggregates, columns=SWEEP_COLUMNS)


def run_sweep(cfg, spec, out=None, n_jobs=None, approaches=APPROACHES):
    """
    對每個 (取值, 種子, 方案) 訓練/評估，輸出逐格列與聚合列。
    各格彼此獨立，以 joblib 平行執行；列的順序固定，與 n_jobs 無關。
    """
    cells = [(value, seed, approach) for value in spec.values for seed in spec.seeds for approach in approaches]
    n_jobs = SWEEP_JOBS if n_jobs is None else n_jobs
    logger.info(f"Running sweep over {spec.variable}: {len(cells)} cells with n_jobs={n_jobs}.")
    rows = Parallel(n_jobs=n_jobs)(
        delayed(run_sweep_cell)(cfg, spec.variable, value, seed, approach) for value, seed, approach in cells
    )
    per_seed = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    aggregates = aggregate_sweep(rows)
    df = pd.concat([per_seed, aggregates], ignore_index=True)
    write_csv(df, out, cfg, {
        "sweep_var": spec.variable,
        "sweep_values": ",".join(str(v) for v in spec.values),
        "sweep_seeds": ",".join(str(s) for s in spec.seeds),
    })
    log_event("SWEEP_DONE", {"sweep_var": spec.variable, "cells": len(cells)})
    logger.info(format_sweep_summary(aggregates[aggregates["seed"] == "mean"]))
    return df


def _lr_curve(cfg, learning_rate):
    cell_cfg = cfg.with_overrides(learning_rate=learning_rate)
    result, _ = train_from_config(cell_cfg)
    stats = result.stats.copy()
    stats.insert(0, "learning_rate", learning_rate)
    return stats


def run_lr_curves(cfg, rates, out=None, n_jobs=None):
    """不同學習率下的學習曲線，合併成一個帶 learning_rate 欄的 CSV。"""
    if len(rates) < 1:
        raise InvalidArgumentError("need at least one learning rate")
    n_jobs = SWEEP_JOBS if n_jobs is None else n_jobs
    curves = Parallel(n_jobs=n_jobs)(delayed(_lr_curve)(cfg, float(lr)) for lr in rates)
    df = pd.concat(curves, ignore_index=True)
    write_csv(df, out, cfg, {"learning_rates": ",".join(repr(float(r)) for r in rates)})
    return df


def run_baseline(cfg, kind, out=None):
    result = run_baseline_kind(cfg, kind)
    df = pd.DataFrame([{
        "approach": kind,
        "seed": cfg.seed,
        "avg_secrecy_rate": result.avg_secrecy_rate,
        "qos_secrecy": result.qos_secrecy,
        "qos_rate": result.qos_rate,
        "qos_sat_prob": result.qos_sat_prob,
    }])
    write_csv(df, out, cfg)
    return result


def build_parser():
    parser = argparse.ArgumentParser(
        prog="irs-workbench",
        description="IRS-aided secure beamforming with deep PDS-PER learning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("config", nargs="?", default=None,
                           help="key = value config file (defaults to $IRS_CONFIG, else built-in defaults)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output CSV path (default: stdout)")

    p = sub.add_parser("train", help="train an agent and write its learning curve")
    common(p)
    p.add_argument("--checkpoint", default=None, help="also save the trained network here")

    p = sub.add_parser("eval", help="greedy evaluation of a saved network")
    p.add_argument("config")
    p.add_argument("checkpoint")
    common(p, with_config=False)

    p = sub.add_parser("sweep", help="train/evaluate every approach over a parameter sweep")
    common(p)
    p.add_argument("--var", required=True, choices=SWEEP_VARIABLES)
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 15,25,35")
    p.add_argument("--seeds", default="0", help="comma-separated seeds (default: 0)")
    p.add_argument("--jobs", type=int, default=None, help="parallel cells (default: $IRS_SWEEP_JOBS)")

    p = sub.add_parser("baseline", help="evaluate a non-learning baseline")
    common(p)
    p.add_argument("--kind", required=True, choices=BASELINE_KINDS)

    p = sub.add_parser("lr-curves", help="learning curves for several learning rates")
    common(p)
    p.add_argument("--rates", default="0.1,0.01,0.001,0.0001", help="comma-separated learning rates")
    p.add_argument("--jobs", type=int, default=None)

    sub.add_parser("defaults", help="print the default configuration table")
    return parser


def dispatch(args):
    if args.command == "defaults":
        print(render_default_table())
        return
    cfg = load_config(args.config, args.seed)
    if args.command == "train":
        run_train(cfg, args.out, args.checkpoint)
    elif args.command == "eval":
        run_eval(cfg, args.checkpoint, args.out)
    elif args.command == "sweep":
        run_sweep(cfg, parse_sweep_spec(args.var, args.values, args.seeds), args.out, args.jobs)
    elif args.command == "baseline":
        run_baseline(cfg, args.kind, args.out)
    elif args.command == "lr-curves":
        rates = [coerce_value("learning_rate", r) for r in args.rates.split(",") if r.strip()]
        run_lr_curves(cfg, rates, args.out, args.jobs)


def main(argv=None):
    """CLI 入口。回傳結束碼：0 成功、2 設定/參數錯誤、3 訓練發散、1 其他錯誤。"""
    setup_logging(LOG_LEVEL)
    args = build_parser().parse_args(argv)
    try:
        dispatch(args)
    except TrainingDivergenceError as e:
        logging.error(f"Training diverged: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except IrsWorkbenchError as e:
        logging.error(f"{e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception as e:
        logging.error(f"Unexpected error: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
