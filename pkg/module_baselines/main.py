import logging

from common.exceptions import InvalidArgumentError
from module_beam_codebook.main import mrt_codebook, zero_phase_codebook
from module_logging_notification.main import log_event
from module_pds_per_agent.main import evaluate_fixed_policy, uniform_random_policy
from module_secure_env.main import make_env

logger = logging.getLogger(__name__)

BASELINE_KINDS = ("random_phase", "no_irs")


def baseline_random_phase(cfg, seed=None, env=None):
    """
    隨機基準：每個時槽從聯合碼本中均勻隨機選一個動作，不做任何學習。
    回傳 EvalResult。
    """
    env = env if env is not None else make_env(cfg)
    seed = cfg.seed if seed is None else seed
    result = evaluate_fixed_policy(env, uniform_random_policy, cfg.eval_episodes, seed)
    logger.info(f"Random-phase baseline (seed {seed}): avg secrecy rate {result.avg_secrecy_rate:.4f}, "
                f"QoS {result.qos_sat_prob:.4f}")
    return result


def _mrt_step_codebooks(env):
    """依目前的估計通道 h_bu 建立單一條目的 MRT 碼本，IRS 相位固定為 0。"""
    s = env.settings
    return mrt_codebook(env.context.h_bu, s.p_max), zero_phase_codebook(s.n_elements)


def _always_first(env, state, rng):
    return 0


def baseline_no_irs(cfg, seed=None):
    """
    無 IRS 基準：所有經過 IRS 的通道增益為 0，BS 使用最大比傳輸
    v_k = sqrt(P_max/K)·h_bu,k/‖h_bu,k‖ (依估計通道每步重算)。
    結果與 IRS 碼本無關。
    """
    env = make_env(cfg, irs_enabled=False)
    seed = cfg.seed if seed is None else seed
    result = evaluate_fixed_policy(env, _always_first, cfg.eval_episodes, seed, codebooks=_mrt_step_codebooks)
    logger.info(f"No-IRS MRT baseline (seed {seed}): avg secrecy rate {result.avg_secrecy_rate:.4f}, "
                f"QoS {result.qos_sat_prob:.4f}")
    return result


def run_baseline_kind(cfg, kind, seed=None):
    """依名稱執行基準方案並記錄 BASELINE_DONE 事件。"""
    if kind == "random_phase":
        result = baseline_random_phase(cfg, seed)
    elif kind == "no_irs":
        result = baseline_no_irs(cfg, seed)
    else:
        raise InvalidArgumentError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    log_event("BASELINE_DONE", {
        "kind": kind, "seed": cfg.seed if seed is None else seed,
        "avg_secrecy_rate": result.avg_secrecy_rate, "qos_sat_prob": result.qos_sat_prob,
    })
    return result
