import logging
from dataclasses import dataclass

import numpy as np
from sklearn.preprocessing import StandardScaler

from common.exceptions import InvalidArgumentError
from common.utils import make_rng
from module_beam_codebook.main import (
    build_bs_codebook, build_irs_codebook, decode_action, n_actions, split_action,
)
from module_channel_model.main import (
    DopplerParams, ErrorRadii, Geometry, PathLossParams, absolute_error_radii, apply_error,
    autocorrelation, evolve, link_gains, place_nodes, sample_initial,
)
from module_secrecy_rates.main import NoiseParams, rates_all_actions, secrecy_rates, user_rates

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RewardParams:
    mu1: float
    mu2: float
    r_sec_min: np.ndarray   # (K,)
    r_min: np.ndarray       # (K,)

    def __post_init__(self):
        object.__setattr__(self, "r_sec_min", np.asarray(self.r_sec_min, dtype=float))
        object.__setattr__(self, "r_min", np.asarray(self.r_min, dtype=float))
        if self.mu1 < 0 or self.mu2 < 0:
            raise InvalidArgumentError("mu1 and mu2 must be >= 0")
        if np.any(self.r_sec_min < 0) or np.any(self.r_min < 0):
            raise InvalidArgumentError("QoS targets must be >= 0")


@dataclass(frozen=True, eq=False)
class StepOutcome:
    pds_state: np.ndarray
    next_state: np.ndarray
    r_known: float
    r_unknown: float
    r_total: float
    per_user_secrecy: np.ndarray
    per_user_rate: np.ndarray
    qos: tuple
    next_context: object = None


@dataclass(frozen=True, eq=False)
class PdsCandidates:
    """
    某個狀態下所有動作的已知部分：r_known[a] 與 PDS 狀態。
    所有動作的 PDS 狀態共用通道特徵 (shared)，只有結果區塊 (varying[a]) 不同。
    """
    r_known: np.ndarray     # (A,)
    shared: np.ndarray      # (S - 3K,)
    varying: np.ndarray     # (A, 3K)

    def pds_states(self):
        tiled = np.broadcast_to(self.shared, (self.varying.shape[0], self.shared.shape[0]))
        return np.hstack([tiled, self.varying])


def state_length(n_antennas, n_users, n_eves, n_elements):
    N, K, M, L = n_antennas, n_users, n_eves, n_elements
    return 2 * (L * N + K * N + K * L + M * N + M * L) + 3 * K


def reward(secrecy, rates, rp):
    """
    QoS 感知獎勵：Σ R_sec − μ1·Σ p_sec − μ2·Σ p_u。
    p_sec[k] = 1 當 secrecy[k] < r_sec_min[k]；p_u[k] = 1 當 rates[k] < r_min[k] (嚴格小於)。
    """
    secrecy = np.asarray(secrecy, dtype=float)
    rates = np.asarray(rates, dtype=float)
    p_sec = np.sum(secrecy < rp.r_sec_min)
    p_u = np.sum(rates < rp.r_min)
    return float(np.sum(secrecy) - rp.mu1 * p_sec - rp.mu2 * p_u)


def qos_flags(secrecy, rates, rp):
    """每個用戶的 QoS 滿足程度：0 (皆未滿足)、0.5 (滿足其一)、1 (皆滿足)。"""
    met_sec = np.asarray(secrecy) >= rp.r_sec_min
    met_rate = np.asarray(rates) >= rp.r_min
    return 0.5 * met_sec + 0.5 * met_rate


def qos_satisfaction(secrecy, rates, rp):
    """回傳 (保密速率滿足比例, 資料速率滿足比例, 兩者同時滿足比例)。"""
    met_sec = np.asarray(secrecy) >= rp.r_sec_min
    met_rate = np.asarray(rates) >= rp.r_min
    return float(np.mean(met_sec)), float(np.mean(met_rate)), float(np.mean(met_sec & met_rate))


def _outcome_block(prev_secrecy, prev_rate, flags):
    return np.concatenate([np.asarray(prev_secrecy, dtype=float),
                           np.asarray(prev_rate, dtype=float),
                           np.asarray(flags, dtype=float)])


def assemble_state(ch_est, prev_secrecy, prev_rate, flags, normalizer=None):
    """
    狀態向量 = [通道特徵 | 上一時槽保密速率 | 上一時槽速率 | QoS 旗標]。
    normalizer (已凍結的 StandardScaler) 存在時逐特徵正規化。
    """
    raw = np.concatenate([ch_est.features(), _outcome_block(prev_secrecy, prev_rate, flags)])
    if not np.all(np.isfinite(raw)):
        raise InvalidArgumentError("state contains non-finite features")
    if normalizer is None:
        return raw
    return normalizer.transform(raw[None, :])[0]


def split_reward(r_total, r_known):
    """
    回傳 (r_unknown, r_stored)。r_unknown = r_total − r_known，r_stored = r_known + r_unknown
    作為記錄的實際獎勵；與 r_total 相差至多 1 ulp，且 r_known + r_unknown == r_stored 恆成立。
    """
    r_unknown = float(r_total) - float(r_known)
    return r_unknown, float(r_known) + r_unknown


def step(ch_est, action, rho, radii, rp, rng, *, noise, bs_cb, irs_cb, normalizer=None):
    """
    單步轉移，分為已知與未知兩部分：
    (1) 解碼動作；
    (2) 已知部分：在估計通道上計算速率與獎勵 → r_known 與 PDS 狀態；
    (3) 未知部分：ch_next = apply_error(evolve(ch_est, ρ))，在 ch_next 上以相同動作
        計算實際獎勵 r_total，r_unknown = r_total − r_known。
    回傳 (StepOutcome, ch_next)。
    """
    bf = decode_action(action, bs_cb, irs_cb)

    known_sec = secrecy_rates(ch_est, bf, noise)
    known_rate = user_rates(ch_est, bf, noise)
    r_known = reward(known_sec, known_rate, rp)
    pds_state = assemble_state(ch_est, known_sec, known_rate, qos_flags(known_sec, known_rate, rp), normalizer)

    ch_next = apply_error(evolve(ch_est, rho, rng), radii, rng)
    real_sec = secrecy_rates(ch_next, bf, noise)
    real_rate = user_rates(ch_next, bf, noise)
    r_total = reward(real_sec, real_rate, rp)
    r_unknown, r_total = split_reward(r_total, r_known)
    next_state = assemble_state(ch_next, real_sec, real_rate, qos_flags(real_sec, real_rate, rp), normalizer)

    outcome = StepOutcome(
        pds_state=pds_state, next_state=next_state,
        r_known=r_known, r_unknown=r_unknown, r_total=r_total,
        per_user_secrecy=real_sec, per_user_rate=real_rate,
        qos=qos_satisfaction(real_sec, real_rate, rp),
        next_context=ch_next,
    )
    return outcome, ch_next


@dataclass(frozen=True, eq=False)
class EnvSettings:
    geometry: Geometry
    path_loss: PathLossParams
    n_antennas: int
    n_elements: int
    noise: NoiseParams
    rho: float
    radii: ErrorRadii
    reward_params: RewardParams
    bs_codebook: object
    irs_codebook: object
    horizon: int
    p_max: float
    irs_enabled: bool = True


def make_env_settings(cfg, irs_enabled=True):
    """由 ExperimentConfig 建立環境設定 (幾何、碼本、ρ、誤差半徑等)。"""
    if cfg.mu_positions and cfg.eve_positions:
        geom = Geometry(bs_pos=(cfg.bs_x, cfg.bs_y), irs_pos=(cfg.irs_x, cfg.irs_y),
                        mu_pos=cfg.mu_positions, eve_pos=cfg.eve_positions)
    else:
        # 只隨機放置未明確指定的那一類節點
        placed = place_nodes(0 if cfg.mu_positions else cfg.n_users, 0 if cfg.eve_positions else cfg.n_eves,
                             make_rng(cfg.placement_seed),
                             bs_pos=(cfg.bs_x, cfg.bs_y), irs_pos=(cfg.irs_x, cfg.irs_y),
                             area=(cfg.area_x_min, cfg.area_x_max, cfg.area_y_min, cfg.area_y_max),
                             grid_step=cfg.grid_step,
                             exclude=tuple(cfg.mu_positions) + tuple(cfg.eve_positions))
        geom = Geometry(placed.bs_pos, placed.irs_pos, cfg.mu_positions or placed.mu_pos,
                        cfg.eve_positions or placed.eve_pos)
    plp = PathLossParams(pl0_db=cfg.pl0_db, d0=cfg.d0, exp_bs_mu=cfg.exp_bs_mu,
                         exp_bs_irs=cfg.exp_bs_irs, exp_irs_mu=cfg.exp_irs_mu)
    if cfg.rho is None:
        rho = autocorrelation(DopplerParams(velocity=cfg.velocity, carrier_freq=cfg.carrier_freq,
                                            t_delay=cfg.t_delay, light_speed=cfg.light_speed))
        # 演進模型只接受 [0, 1]；J0 的負值區段視為完全不相關
        rho = min(1.0, max(0.0, rho))
    else:
        rho = cfg.rho
    gains = link_gains(geom, plp, irs_enabled=irs_enabled)
    radii = absolute_error_radii(
        ErrorRadii(bu=cfg.err_bu_rel, ru=cfg.err_ru_rel, be=cfg.err_be_rel, re=cfg.err_re_rel),
        gains, cfg.n_antennas, cfg.irs_elements)
    return EnvSettings(
        geometry=geom, path_loss=plp,
        n_antennas=cfg.n_antennas, n_elements=cfg.irs_elements,
        noise=NoiseParams.uniform(cfg.noise_watt, cfg.n_users, cfg.n_eves),
        rho=rho, radii=radii,
        reward_params=RewardParams(mu1=cfg.mu1, mu2=cfg.mu2,
                                   r_sec_min=np.full(cfg.n_users, cfg.r_sec_min),
                                   r_min=np.full(cfg.n_users, cfg.r_min)),
        bs_codebook=build_bs_codebook(cfg.n_antennas, cfg.n_users, cfg.p_max_watt,
                                      cfg.bs_directions, cfg.bs_power_levels),
        irs_codebook=build_irs_codebook(cfg.irs_elements, cfg.phase_bits, cfg.irs_codebook_size,
                                        cfg.codebook_seed),
        horizon=cfg.horizon, p_max=cfg.p_max_watt, irs_enabled=irs_enabled,
    )


class SecureBeamformingEnv:
    """
    IRS 輔助安全通訊的 MDP。代理只觀察估計通道；每個 episode 開始時重新取樣通道。
    單執行緒使用；平行實驗請各自建立實例並使用獨立的 RNG。
    """

    def __init__(self, settings):
        self.settings = settings
        self.normalizer = None
        self.context = None
        self.state = None
        N, K, M, L = self.dims
        self.n_outcome_features = 3 * K

    @property
    def dims(self):
        s = self.settings
        return s.n_antennas, s.geometry.n_users, s.geometry.n_eves, s.n_elements

    @property
    def n_actions(self):
        return n_actions(self.settings.bs_codebook, self.settings.irs_codebook)

    @property
    def state_dim(self):
        return state_length(*self.dims)

    @property
    def horizon(self):
        return self.settings.horizon

    def _sample_channels(self, rng):
        s = self.settings
        return sample_initial(s.geometry, s.path_loss, s.n_antennas, s.n_elements, rng,
                              irs_enabled=s.irs_enabled)

    def reset(self, rng):
        """重新取樣通道；上一時槽的速率與 QoS 旗標歸零。"""
        _, K, _, _ = self.dims
        self.context = self._sample_channels(rng)
        zeros = np.zeros(K)
        self.state = assemble_state(self.context, zeros, zeros, zeros, self.normalizer)
        return self.state

    def step(self, action, rng, bs_cb=None, irs_cb=None):
        """執行動作。bs_cb / irs_cb 可覆寫碼本 (基準方案使用)。"""
        if self.context is None:
            raise InvalidArgumentError("reset() must be called before step()")
        s = self.settings
        outcome, ch_next = step(
            self.context, action, s.rho, s.radii, s.reward_params, rng,
            noise=s.noise,
            bs_cb=bs_cb if bs_cb is not None else s.bs_codebook,
            irs_cb=irs_cb if irs_cb is not None else s.irs_codebook,
            normalizer=self.normalizer,
        )
        self.context = ch_next
        self.state = outcome.next_state
        return outcome

    def _normalize_split(self, raw_shared, raw_varying):
        if self.normalizer is None:
            return raw_shared, raw_varying
        mean, scale = self.normalizer.mean_, self.normalizer.scale_
        n_shared = raw_shared.shape[0]
        shared = (raw_shared - mean[:n_shared]) / scale[:n_shared]
        varying = (raw_varying - mean[n_shared:]) / scale[n_shared:]
        return shared, varying

    def known_candidates(self, context):
        """對所有動作計算已知獎勵與 PDS 狀態 (向量化)。"""
        s = self.settings
        rates, secrecy = rates_all_actions(context, s.bs_codebook.entries, s.irs_codebook.entries, s.noise)
        rp = s.reward_params
        p_sec = np.sum(secrecy < rp.r_sec_min, axis=1)
        p_u = np.sum(rates < rp.r_min, axis=1)
        r_known = np.sum(secrecy, axis=1) - rp.mu1 * p_sec - rp.mu2 * p_u
        flags = 0.5 * (secrecy >= rp.r_sec_min) + 0.5 * (rates >= rp.r_min)
        shared, varying = self._normalize_split(context.features(), np.hstack([secrecy, rates, flags]))
        return PdsCandidates(r_known=r_known, shared=shared, varying=varying)

    def fit_normalizer(self, rng, n_steps):
        """
        以隨機動作暖身 n_steps 步，收集原始狀態後擬合 StandardScaler 並凍結。
        """
        self.normalizer = None
        if n_steps <= 0:
            return None
        samples = []
        self.reset(rng)
        samples.append(self.state)
        for t in range(n_steps):
            if t > 0 and t % self.horizon == 0:
                samples.append(self.reset(rng))
            outcome = self.step(int(rng.integers(self.n_actions)), rng)
            samples.append(outcome.pds_state)
            samples.append(outcome.next_state)
        scaler = StandardScaler()
        scaler.fit(np.vstack(samples))
        self.normalizer = scaler
        self.context = None
        self.state = None
        logger.info(f"Fitted state normalizer on {len(samples)} warm-up samples.")
        return scaler

    def describe_action(self, action):
        return split_action(action, self.settings.bs_codebook, self.settings.irs_codebook)


def make_env(cfg, irs_enabled=True):
    return SecureBeamformingEnv(make_env_settings(cfg, irs_enabled=irs_enabled))
