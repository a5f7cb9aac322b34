import logging
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from common.exceptions import InvalidArgumentError, TrainingDivergenceError
from common.utils import make_rng, spawn_seed
from module_logging_notification.main import log_event
from module_prioritized_replay.main import PrioritizedReplayBuffer, Transition
from module_q_network.main import (
    Batch, GradientDescent, forward, forward_batch, forward_candidates, forward_selected, init,
)
from module_secure_env.main import make_env

logger = logging.getLogger(__name__)

STATS_COLUMNS = ["episode", "epsilon", "mean_reward", "mean_secrecy_rate", "qos_sat_prob", "mean_loss",
                 "val_loss"]

# 每次執行的獨立隨機數串流 (由 spawn_seed(seed, tag) 衍生)
NORMALIZER_STREAM = 0
ENV_STREAM = 1
AGENT_STREAM = 2
REPLAY_STREAM = 3
NET_STREAM = 4
EVAL_ENV_STREAM = 101
EVAL_POLICY_STREAM = 102
VALIDATION_STREAM = 103


@dataclass(frozen=True)
class AgentConfig:
    """
    代理的超參數。欄位名稱與 ExperimentConfig 中的同名鍵一致。
    target_sync = 0 表示不使用目標網路 (bootstrap 直接使用線上網路)。
    """
    gamma: float = 0.95
    learning_rate: float = 0.001
    eps_start: float = 0.8
    eps_end: float = 0.1
    eps_anneal_episodes: int = 150
    batch_size: int = 32
    target_sync: int = 200
    use_pds: bool = True
    use_per: bool = True
    buffer_capacity: int = 32000
    per_eta1: float = 0.6
    per_eta2: float = 0.4
    per_eps: float = 1e-6
    hidden_sizes: tuple = (128, 128)
    optimizer: str = "sgd"
    momentum: float = 0.9
    reward_scale: float = 1.0
    warmup_steps: int = 0
    validation_steps: int = 0
    log_every: int = 10

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidArgumentError(f"gamma must be within (0, 1], got {self.gamma}")
        for name in ("eps_start", "eps_end"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidArgumentError(f"{name} must be within [0, 1], got {value}")
        if self.learning_rate <= 0:
            raise InvalidArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.buffer_capacity < 1:
            raise InvalidArgumentError("batch_size and buffer_capacity must be >= 1")
        if self.validation_steps < 0:
            raise InvalidArgumentError("validation_steps must be >= 0")
        if self.target_sync < 0:
            raise InvalidArgumentError("target_sync must be >= 0")


def agent_config_from(cfg, **overrides):
    """從 ExperimentConfig 取出同名欄位組成 AgentConfig。"""
    values = {f.name: getattr(cfg, f.name) for f in fields(AgentConfig)}
    values.update(overrides)
    return AgentConfig(**values)


@dataclass(eq=False)
class TrainResult:
    stats: pd.DataFrame
    net: object
    normalizer: object = None
    updates: int = 0


@dataclass(frozen=True)
class EvalResult:
    avg_secrecy_rate: float
    qos_secrecy: float
    qos_rate: float
    qos_joint: float

    @property
    def qos_sat_prob(self):
        """使用者同時滿足保密速率與資料速率門檻的比例。"""
        return self.qos_joint


def epsilon_at(episode, cfg):
    """ε 由 eps_start 線性退火到 eps_end (共 eps_anneal_episodes 回合)，之後維持不變。"""
    if cfg.eps_anneal_episodes <= 0:
        return float(cfg.eps_end)
    frac = min(1.0, episode / cfg.eps_anneal_episodes)
    return float(cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac)


def q_hat(net, state, candidates=None, use_pds=False, reward_scale=1.0):
    """
    每個動作的 Q̂(s, a)。
    一般 DQN 模式：網路輸出即 Q̂。
    PDS 模式：Q̂(s, a) = r_known(s, a) + Q̃(s̃(s, a), a)，網路只估計 Q̃，
    已知獎勵由 candidates 解析計算後加回。
    """
    if not use_pds:
        return forward(net, state)
    if candidates is None:
        raise InvalidArgumentError("PDS mode needs the per-action known candidates")
    q_tilde = forward_candidates(net, candidates.shared, candidates.varying)
    return reward_scale * np.asarray(candidates.r_known, dtype=float) + q_tilde


def select_action(net, state, eps, rng, candidates=None, use_pds=False, reward_scale=1.0):
    """ε-greedy：機率 ε 均勻隨機選動作，否則取 Q̂ 的 argmax (平手取最小索引)。"""
    if not 0.0 <= eps <= 1.0:
        raise InvalidArgumentError(f"epsilon must be within [0, 1], got {eps}")
    if rng.random() < eps:
        return int(rng.integers(net.n_outputs))
    return int(np.argmax(q_hat(net, state, candidates, use_pds, reward_scale)))


def td_target_and_error(net, target_net, transition, gamma, use_pds=False, next_candidates=None,
                        reward_scale=1.0):
    """
    回傳 (target, δ)。
    PDS 模式訓練 Q̃(s̃, a)：target = r_unknown + γ·max Q̂(s', a')。
    一般模式訓練 Q̂(s, a)：target = r_total + γ·max Q̂(s', a')。
    target_net 為 None 時以線上網路做 bootstrap。
    """
    if not 0.0 < gamma <= 1.0:
        raise InvalidArgumentError(f"gamma must be within (0, 1], got {gamma}")
    boot = target_net if target_net is not None else net
    max_next = float(np.max(q_hat(boot, transition.next_state, next_candidates, use_pds, reward_scale)))
    if use_pds:
        target = reward_scale * transition.r_unknown + gamma * max_next
        current = forward(net, transition.pds_state)[transition.action]
    else:
        target = reward_scale * transition.r_total + gamma * max_next
        current = forward(net, transition.state)[transition.action]
    return float(target), float(target - current)


def batch_targets(net, target_net, transitions, env, acfg):
    """
    一個批次的 (輸入, 動作, target, δ)。PDS 模式下下一狀態的候選由 env.known_candidates
    依經驗中保存的 next_context 重新計算。
    """
    boot = target_net if target_net is not None else net
    actions = np.array([t.action for t in transitions], dtype=int)
    if acfg.use_pds:
        candidates = [env.known_candidates(t.next_context) for t in transitions]
        shared = np.vstack([c.shared for c in candidates])
        varying = np.stack([c.varying for c in candidates])
        r_known = np.vstack([c.r_known for c in candidates])
        q_next = acfg.reward_scale * r_known + forward_candidates(boot, shared, varying)
        inputs = np.vstack([t.pds_state for t in transitions])
        rewards = np.array([t.r_unknown for t in transitions])
    else:
        q_next = forward_batch(boot, np.vstack([t.next_state for t in transitions]))
        inputs = np.vstack([t.state for t in transitions])
        rewards = np.array([t.r_total for t in transitions])
    targets = acfg.reward_scale * rewards + acfg.gamma * np.max(q_next, axis=1)
    td = targets - forward_selected(net, inputs, actions)
    return inputs, actions, targets, td


def make_buffer(acfg):
    """use_per = False 時 η1 = η2 = 0，退化為均勻取樣且 IS 權重皆為 1。"""
    if acfg.use_per:
        return PrioritizedReplayBuffer(acfg.buffer_capacity, acfg.per_eta1, acfg.per_eta2, acfg.per_eps)
    return PrioritizedReplayBuffer(acfg.buffer_capacity, 0.0, 0.0, acfg.per_eps)


def make_optimizer(acfg):
    momentum = acfg.momentum if acfg.optimizer == "momentum" else 0.0
    return GradientDescent(acfg.learning_rate, momentum=momentum)


def prepare_normalizer(env, seed, warmup_steps):
    """以獨立串流擬合狀態正規化器；相同 seed 總是得到相同的正規化器。"""
    if warmup_steps <= 0 or not hasattr(env, "fit_normalizer"):
        return getattr(env, "normalizer", None)
    return env.fit_normalizer(make_rng(spawn_seed(seed, NORMALIZER_STREAM)), warmup_steps)


def build_network(env, acfg, seed):
    sizes = [env.state_dim] + list(acfg.hidden_sizes) + [env.n_actions]
    return init(sizes, spawn_seed(seed, NET_STREAM))


def collect_validation(env, acfg, seed):
    """
    以均勻隨機策略在獨立串流上收集 validation_steps 筆經驗，作為固定的保留集；
    這些經驗從不進入回放緩衝區，也不用於更新。
    """
    rng = make_rng(spawn_seed(seed, VALIDATION_STREAM))
    held_out = []
    while len(held_out) < acfg.validation_steps:
        state = env.reset(rng)
        for _ in range(min(env.horizon, acfg.validation_steps - len(held_out))):
            action = uniform_random_policy(env, state, rng)
            outcome = env.step(action, rng)
            held_out.append(Transition(
                state=state, action=action,
                r_known=outcome.r_known, r_unknown=outcome.r_unknown,
                pds_state=outcome.pds_state, next_state=outcome.next_state,
                r_total=outcome.r_total, next_context=outcome.next_context,
            ))
            state = outcome.next_state
    return held_out


def validation_loss(net, target_net, held_out, env, acfg):
    """保留集上未加權的均方 TD 誤差；保留集為空時回傳 0。"""
    if not held_out:
        return 0.0
    _, _, _, td = batch_targets(net, target_net, held_out, env, acfg)
    return float(np.mean(td ** 2))


def train(env, acfg, seed, episodes):
    """
    深度 PDS-PER 學習主迴圈：
    ε-greedy 選動作 → env.step → 存入 PDS 經驗 → 取樣 H 筆 → 計算 |δ| 與 IS 權重 →
    更新優先權 → 加權損失梯度下降 → 每 target_sync 次更新同步目標網路。
    每回合結束時於固定保留集上計算 val_loss。
    回傳 TrainResult (每回合統計 DataFrame、訓練後網路、凍結的正規化器)。
    """
    normalizer = prepare_normalizer(env, seed, acfg.warmup_steps)
    held_out = collect_validation(env, acfg, seed)
    rng_env = make_rng(spawn_seed(seed, ENV_STREAM))
    rng_agent = make_rng(spawn_seed(seed, AGENT_STREAM))
    rng_replay = make_rng(spawn_seed(seed, REPLAY_STREAM))

    net = build_network(env, acfg, seed)
    target_net = net.copy() if acfg.target_sync > 0 else None
    buffer = make_buffer(acfg)
    optimizer = make_optimizer(acfg)
    mode = f"{'pds' if acfg.use_pds else 'plain'}/{'per' if acfg.use_per else 'uniform'}"
    logger.info(f"Training {mode} agent for {episodes} episodes (seed {seed}, {env.n_actions} actions).")

    rows = []
    updates = 0
    for episode in range(episodes):
        eps = epsilon_at(episode, acfg)
        state = env.reset(rng_env)
        rewards, secrecy, qos, losses = [], [], [], []
        for t in range(env.horizon):
            candidates = env.known_candidates(env.context) if acfg.use_pds else None
            action = select_action(net, state, eps, rng_agent, candidates, acfg.use_pds, acfg.reward_scale)
            outcome = env.step(action, rng_env)
            buffer.push(Transition(
                state=state, action=action,
                r_known=outcome.r_known, r_unknown=outcome.r_unknown,
                pds_state=outcome.pds_state, next_state=outcome.next_state,
                r_total=outcome.r_total, next_context=outcome.next_context,
            ))

            if len(buffer) >= acfg.batch_size:
                sample = buffer.sample(acfg.batch_size, rng_replay)
                inputs, actions, targets, td = batch_targets(net, target_net, sample.transitions, env, acfg)
                buffer.update_priorities(sample.indices, np.abs(td))
                try:
                    net, loss_value = optimizer.update(net, Batch(inputs, actions, targets, sample.is_weights))
                except TrainingDivergenceError as e:
                    log_event("DIVERGENCE", {"episode": episode, "step": t, "seed": seed, "error": str(e)},
                              level="ERROR")
                    raise
                updates += 1
                losses.append(loss_value)
                if acfg.target_sync > 0 and updates % acfg.target_sync == 0:
                    target_net = net.copy()
                    logger.debug(f"Synced target network after {updates} updates.")

            rewards.append(outcome.r_total)
            secrecy.append(float(np.mean(outcome.per_user_secrecy)))
            qos.append(outcome.qos[2])
            state = outcome.next_state

        row = {
            "episode": episode,
            "epsilon": eps,
            "mean_reward": float(np.mean(rewards)),
            "mean_secrecy_rate": float(np.mean(secrecy)),
            "qos_sat_prob": float(np.mean(qos)),
            "mean_loss": float(np.mean(losses)) if losses else 0.0,
            "val_loss": validation_loss(net, target_net, held_out, env, acfg),
        }
        rows.append(row)
        if (episode + 1) % acfg.log_every == 0:
            log_event("TRAIN_EPISODE", dict(row, seed=seed, buffer=len(buffer)))

    stats = pd.DataFrame(rows, columns=STATS_COLUMNS)
    log_event("TRAIN_DONE", {"mode": mode, "episodes": episodes, "seed": seed, "updates": updates})
    return TrainResult(stats=stats, net=net, normalizer=normalizer, updates=updates)


def evaluate_fixed_policy(env, policy, episodes, seed, codebooks=None):
    """
    以固定策略 policy(env, state, rng) -> action 執行 episodes 回合，不做任何學習。
    codebooks(env) 可每步回傳 (bs_cb, irs_cb) 覆寫環境碼本 (no-IRS 基準使用)。
    平均值涵蓋回合 × 時槽 × 用戶。
    """
    rng_env = make_rng(spawn_seed(seed, EVAL_ENV_STREAM))
    rng_policy = make_rng(spawn_seed(seed, EVAL_POLICY_STREAM))
    secrecy, q_sec, q_rate, q_joint = [], [], [], []
    for _ in range(episodes):
        state = env.reset(rng_env)
        for _ in range(env.horizon):
            action = policy(env, state, rng_policy)
            if codebooks is None:
                outcome = env.step(action, rng_env)
            else:
                bs_cb, irs_cb = codebooks(env)
                outcome = env.step(action, rng_env, bs_cb=bs_cb, irs_cb=irs_cb)
            secrecy.append(np.asarray(outcome.per_user_secrecy, dtype=float))
            q_sec.append(outcome.qos[0])
            q_rate.append(outcome.qos[1])
            q_joint.append(outcome.qos[2])
            state = outcome.next_state
    if not secrecy:
        return EvalResult(0.0, 0.0, 0.0, 0.0)
    return EvalResult(
        avg_secrecy_rate=float(np.mean(np.concatenate(secrecy))),
        qos_secrecy=float(np.mean(q_sec)),
        qos_rate=float(np.mean(q_rate)),
        qos_joint=float(np.mean(q_joint)),
    )


def greedy_policy(net, use_pds=False, reward_scale=1.0):
    """ε = 0 的策略閉包。"""
    def policy(env, state, rng):
        candidates = env.known_candidates(env.context) if use_pds else None
        return int(np.argmax(q_hat(net, state, candidates, use_pds, reward_scale)))
    return policy


def uniform_random_policy(env, state, rng):
    return int(rng.integers(env.n_actions))


def evaluate(net, env, episodes, seed, use_pds=False, reward_scale=1.0):
    """ε = 0 的貪婪評估，回傳 EvalResult (平均保密速率與 QoS 滿足比例)。"""
    return evaluate_fixed_policy(env, greedy_policy(net, use_pds, reward_scale), episodes, seed)


def train_from_config(cfg, seed=None, use_pds=None, use_per=None, episodes=None, env=None):
    """
    依 ExperimentConfig 建立環境並訓練。use_pds / use_per 可覆寫設定 (sweep 的 dqn 方案)。
    回傳 (TrainResult, env)；env 已套用訓練時擬合的正規化器。
    """
    overrides = {}
    if use_pds is not None:
        overrides["use_pds"] = use_pds
    if use_per is not None:
        overrides["use_per"] = use_per
    acfg = agent_config_from(cfg, **overrides)
    env = env if env is not None else make_env(cfg)
    seed = cfg.seed if seed is None else seed
    result = train(env, acfg, seed, cfg.episodes if episodes is None else episodes)
    return result, env
