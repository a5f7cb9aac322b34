import logging
from dataclasses import dataclass

import numpy as np

from common.exceptions import InvalidArgumentError
from module_numerics.main import frobenius_norm_sq

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BeamformingPair:
    """BS 預編碼矩陣 V (N×K，第 k 行為 v_k) 與 IRS 反射相位 θ (長度 L)。"""
    V: np.ndarray
    theta: np.ndarray

    def check(self, p_max, tol=1e-9):
        """檢查功率限制 Tr(VV^H) ≤ P_max 與相位取值。振幅 χ_l 固定為 1，單位模數自動成立。"""
        if transmit_power(self.V) > p_max + tol:
            raise InvalidArgumentError(f"transmit power {transmit_power(self.V):.6g} exceeds P_max {p_max:.6g}")
        if np.any(self.theta < 0) or np.any(self.theta >= 2 * np.pi):
            raise InvalidArgumentError("IRS phases must lie in [0, 2π)")


@dataclass(frozen=True, eq=False)
class NoiseParams:
    """用戶與竊聽者的雜訊功率 δ² (W)。"""
    mu: np.ndarray
    eve: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "eve", np.asarray(self.eve, dtype=float))
        if np.any(self.mu <= 0) or np.any(self.eve <= 0):
            raise InvalidArgumentError("noise variances must be strictly positive")

    @classmethod
    def uniform(cls, noise_watt, n_users, n_eves):
        return cls(mu=np.full(n_users, noise_watt), eve=np.full(n_eves, noise_watt))


def effective_channel(h_r, theta, H_br, h_b):
    """
    合成通道 h_r^H Ψ H_br + h_b^H，Ψ = diag(e^{jθ})。
    h_r 與 h_b 可以是單一列向量，也可以是多列堆疊 (每列一個接收端)。
    """
    h_r = np.asarray(h_r)
    h_b = np.asarray(h_b)
    theta = np.asarray(theta, dtype=float)
    L, N = H_br.shape
    if h_r.shape[-1] != L or theta.shape[-1] != L or h_b.shape[-1] != N:
        raise InvalidArgumentError(
            f"dimension mismatch: h_r {h_r.shape}, theta {theta.shape}, H_br {H_br.shape}, h_b {h_b.shape}")
    return (h_r.conj() * np.exp(1j * theta)) @ H_br + h_b.conj()


def _sinr_rate(gains, stream, noise):
    """gains[i] = |g^H v_i|²；回傳 log2(1 + SINR) 以目標資料流 stream 為訊號。"""
    interference = np.sum(np.delete(gains, stream))
    return float(np.log2(1.0 + gains[stream] / (interference + noise)))


def _check_index(idx, size, name):
    if not 0 <= idx < size:
        raise InvalidArgumentError(f"{name} index {idx} out of range [0, {size})")


def user_rate(ch, bf, k, noise):
    """第 k 個合法用戶的可達速率。"""
    N, K, M, L = ch.dims
    _check_index(k, K, "user")
    g = effective_channel(ch.h_ru[k], bf.theta, ch.H_br, ch.h_bu[k])
    gains = np.abs(g @ bf.V) ** 2
    return _sinr_rate(gains, k, noise.mu[k])


def eve_rate(ch, bf, m, k, noise):
    """竊聽者 m 竊聽第 k 個資料流時的速率 (其他資料流視為干擾)。"""
    N, K, M, L = ch.dims
    _check_index(m, M, "eavesdropper")
    _check_index(k, K, "user")
    g = effective_channel(ch.h_re[m], bf.theta, ch.H_br, ch.h_be[m])
    gains = np.abs(g @ bf.V) ** 2
    return _sinr_rate(gains, k, noise.eve[m])


def secrecy_rate(ch, bf, k, noise):
    """個別保密速率 [R_k - max_m R_{m,k}]⁺。竊聽者之間不合作。"""
    N, K, M, L = ch.dims
    r_u = user_rate(ch, bf, k, noise)
    r_e = max((eve_rate(ch, bf, m, k, noise) for m in range(M)), default=0.0)
    return max(0.0, r_u - r_e)


def user_rates(ch, bf, noise):
    _, K, _, _ = ch.dims
    return np.array([user_rate(ch, bf, k, noise) for k in range(K)])


def secrecy_rates(ch, bf, noise):
    _, K, _, _ = ch.dims
    return np.array([secrecy_rate(ch, bf, k, noise) for k in range(K)])


def transmit_power(V):
    """Tr(VV^H) = ‖V‖_F²"""
    return frobenius_norm_sq(V)


def _stream_rates(power, noise):
    """
    power[..., r, j] = |g_r^H v_j|²，r 為接收端、j 為資料流。
    回傳 rates[..., r, j]：接收端 r 解碼資料流 j 的速率。
    """
    total = np.sum(power, axis=-1, keepdims=True)
    sinr = power / (total - power + noise[:, None])
    return np.log2(1.0 + sinr)


def rates_all_actions(ch, bs_entries, irs_phases, noise):
    """
    一次計算整個聯合動作空間的速率。動作索引 = bs_index·|IRS| + irs_index。
    bs_entries: (B, N, K)；irs_phases: (I, L)。
    回傳 (user_rates (A, K), secrecy_rates (A, K))。
    """
    bs_entries = np.asarray(bs_entries)
    irs_phases = np.asarray(irs_phases, dtype=float)
    phase = np.exp(1j * irs_phases)                                    # (I, L)
    g_user = (ch.h_ru.conj()[None] * phase[:, None, :]) @ ch.H_br + ch.h_bu.conj()[None]   # (I, K, N)
    g_eve = (ch.h_re.conj()[None] * phase[:, None, :]) @ ch.H_br + ch.h_be.conj()[None]    # (I, M, N)
    p_user = np.abs(np.einsum("ikn,bnj->bikj", g_user, bs_entries)) ** 2   # (B, I, K, K)
    p_eve = np.abs(np.einsum("imn,bnj->bimj", g_eve, bs_entries)) ** 2     # (B, I, M, K)
    r_user = np.diagonal(_stream_rates(p_user, noise.mu), axis1=-2, axis2=-1)   # (B, I, K)
    if p_eve.shape[2]:
        r_eve = np.max(_stream_rates(p_eve, noise.eve), axis=2)              # (B, I, K)
    else:
        r_eve = np.zeros_like(r_user)
    secrecy = np.maximum(0.0, r_user - r_eve)
    n_actions = bs_entries.shape[0] * irs_phases.shape[0]
    K = r_user.shape[-1]
    return r_user.reshape(n_actions, K), secrecy.reshape(n_actions, K)
