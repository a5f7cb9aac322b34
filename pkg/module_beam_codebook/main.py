import itertools
import logging
from dataclasses import dataclass

import numpy as np

from common.exceptions import InvalidArgumentError
from common.utils import make_rng
from module_secrecy_rates.main import BeamformingPair, transmit_power

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BsCodebook:
    entries: np.ndarray       # (B, N, K)
    power_levels: tuple

    def __len__(self):
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class IrsCodebook:
    entries: np.ndarray       # (I, L) 相位 (弧度)
    phase_bits: int

    def __len__(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class JointAction:
    bs_index: int
    irs_index: int


def dft_directions(n_antennas, n_directions):
    """DFT 方向集合 d_q[n] = e^{j2πqn/n_directions}/√N，回傳 (n_directions, N)。"""
    q = np.arange(n_directions)[:, None]
    n = np.arange(n_antennas)[None, :]
    return np.exp(2j * np.pi * q * n / n_directions) / np.sqrt(n_antennas)


def build_bs_codebook(n_antennas, n_users, p_max, n_directions, n_power_levels):
    """
    BS 預編碼碼本：從 DFT 方向中為 K 個用戶選出互不相同的方向 (有序排列)，
    每一個功率等級 p = P_max·l/n_power_levels 下每行功率為 p/K。
    條目順序：先排列、後功率等級。
    """
    if n_antennas < 1 or n_users < 1 or n_power_levels < 1:
        raise InvalidArgumentError("n_antennas, n_users and n_power_levels must be >= 1")
    if n_directions < n_users:
        raise InvalidArgumentError(f"n_directions ({n_directions}) must be >= n_users ({n_users})")
    if p_max <= 0:
        raise InvalidArgumentError(f"p_max must be > 0, got {p_max}")

    directions = dft_directions(n_antennas, n_directions)
    levels = tuple(p_max * l / n_power_levels for l in range(1, n_power_levels + 1))
    entries = []
    for perm in itertools.permutations(range(n_directions), n_users):
        columns = directions[list(perm)].T                 # (N, K)
        for p in levels:
            entries.append(np.sqrt(p / n_users) * columns)
    entries = np.stack(entries)
    for V in entries:
        if transmit_power(V) > p_max * (1 + 1e-12):
            raise InvalidArgumentError("codebook entry violates the power constraint")
    logger.debug(f"Built BS codebook with {len(entries)} entries (N={n_antennas}, K={n_users}).")
    return BsCodebook(entries=entries, power_levels=levels)


def build_irs_codebook(n_elements, phase_bits, size, seed):
    """
    IRS 相位碼本：第 0 個條目為全零相位，其餘條目由 seed 決定，
    每個相位在 2^B 個量化點上獨立均勻取值。
    """
    if size < 1:
        raise InvalidArgumentError(f"IRS codebook size must be >= 1, got {size}")
    if n_elements < 1 or phase_bits < 1:
        raise InvalidArgumentError("n_elements and phase_bits must be >= 1")
    rng = make_rng(seed)
    levels = 2 ** phase_bits
    steps = np.zeros((size, n_elements), dtype=int)
    if size > 1:
        steps[1:] = rng.integers(0, levels, size=(size - 1, n_elements))
    return IrsCodebook(entries=2 * np.pi * steps / levels, phase_bits=phase_bits)


def n_actions(bs_cb, irs_cb):
    return len(bs_cb) * len(irs_cb)


def encode_action(bs_index, irs_index, irs_size):
    return bs_index * irs_size + irs_index


def split_action(idx, bs_cb, irs_cb):
    if not 0 <= idx < n_actions(bs_cb, irs_cb):
        raise InvalidArgumentError(f"action index {idx} out of range [0, {n_actions(bs_cb, irs_cb)})")
    bs_index, irs_index = divmod(int(idx), len(irs_cb))
    return JointAction(bs_index=bs_index, irs_index=irs_index)


def decode_action(idx, bs_cb, irs_cb):
    """聯合動作索引 → BeamformingPair。bs_index = idx ÷ |IRS|，irs_index = idx mod |IRS|。"""
    action = split_action(idx, bs_cb, irs_cb)
    return BeamformingPair(V=bs_cb.entries[action.bs_index], theta=irs_cb.entries[action.irs_index])


def mrt_codebook(h_bu, p_max):
    """單一條目的 MRT 碼本：v_k = sqrt(P_max/K)·h_bu,k/‖h_bu,k‖。"""
    h_bu = np.asarray(h_bu)
    K = h_bu.shape[0]
    norms = np.linalg.norm(h_bu, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    V = (np.sqrt(p_max / K) * h_bu / norms).T
    return BsCodebook(entries=V[None], power_levels=(p_max,))


def zero_phase_codebook(n_elements):
    return IrsCodebook(entries=np.zeros((1, n_elements)), phase_bits=1)
