import json
import logging

import numpy as np

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

# 事件日誌使用獨立的 logger 名稱，方便單獨過濾
event_logger = logging.getLogger("irs_workbench.events")


def setup_logging(level="INFO"):
    """配置日誌。只由入口點 (CLI) 呼叫，函式庫模組不呼叫 basicConfig。"""
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def log_event(event_type, payload, level="INFO"):
    """
    以單行 JSON 記錄結構化事件 (event_type、severity、payload)。
    事件類型：TRAIN_EPISODE、TRAIN_DONE、SWEEP_CELL、SWEEP_DONE、BASELINE_DONE、
    CHECKPOINT_SAVED、DIVERGENCE。
    """
    entry = {
        "event_type": event_type,
        "severity": level.upper(),
        "payload": _jsonable(payload),
    }
    event_logger.log(getattr(logging, level.upper(), logging.INFO), json.dumps(entry, sort_keys=True))
    return entry


def format_run_summary(stats, title="Training run"):
    """把訓練統計 (pandas DataFrame) 整理成一段可讀的摘要文字。"""
    if stats is None or len(stats) == 0:
        return f"{title}: no episodes were run."
    last = stats.iloc[-1]
    tail = stats.tail(min(10, len(stats)))
    return (
        f"{title}: {len(stats)} episodes\n"
        f"  final epsilon: {last['epsilon']:.3f}\n"
        f"  last-10 mean reward: {tail['mean_reward'].mean():.4f}\n"
        f"  last-10 mean secrecy rate: {tail['mean_secrecy_rate'].mean():.4f} bits/s/Hz\n"
        f"  last-10 QoS satisfaction: {tail['qos_sat_prob'].mean():.4f}\n"
        f"  last-10 mean loss: {tail['mean_loss'].mean():.6g}"
        + (f"\n  last-10 validation loss: {tail['val_loss'].mean():.6g}" if "val_loss" in stats else "")
    )


def format_sweep_summary(aggregates):
    """sweep 結果的摘要：每個方案在每個取值下的平均保密速率。"""
    lines = ["Sweep summary (mean avg_secrecy_rate):"]
    for row in aggregates.itertuples(index=False):
        lines.append(f"  {row.approach:>12s}  {row.sweep_var}={row.value}: "
                     f"{row.avg_secrecy_rate:.4f} (qos {row.qos_sat_prob:.3f})")
    return "\n".join(lines)
