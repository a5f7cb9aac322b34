import logging
from dataclasses import dataclass, replace

import numpy as np

from common.exceptions import InvalidArgumentError
from common.utils import make_rng
from module_numerics.main import bessel_j0

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Geometry:
    """BS、IRS、合法用戶 (MU) 與竊聽者的二維座標 (公尺)。"""
    bs_pos: np.ndarray
    irs_pos: np.ndarray
    mu_pos: np.ndarray   # (K, 2)
    eve_pos: np.ndarray  # (M, 2)

    def __post_init__(self):
        object.__setattr__(self, "bs_pos", np.asarray(self.bs_pos, dtype=float).reshape(2))
        object.__setattr__(self, "irs_pos", np.asarray(self.irs_pos, dtype=float).reshape(2))
        object.__setattr__(self, "mu_pos", np.asarray(self.mu_pos, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "eve_pos", np.asarray(self.eve_pos, dtype=float).reshape(-1, 2))
        points = np.vstack([self.bs_pos, self.irs_pos, self.mu_pos, self.eve_pos])
        diff = points[:, None, :] - points[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=-1))
        off_diag = dist[~np.eye(len(points), dtype=bool)]
        if off_diag.size and np.min(off_diag) <= 0:
            raise InvalidArgumentError("geometry has coincident nodes (pairwise distance must be > 0)")

    @property
    def n_users(self):
        return len(self.mu_pos)

    @property
    def n_eves(self):
        return len(self.eve_pos)


@dataclass(frozen=True)
class PathLossParams:
    pl0_db: float = 30.0
    d0: float = 1.0
    exp_bs_mu: float = 3.2
    exp_bs_irs: float = 2.2
    exp_irs_mu: float = 2.2

    def __post_init__(self):
        if self.d0 <= 0:
            raise InvalidArgumentError(f"d0 must be > 0, got {self.d0}")
        for name in ("exp_bs_mu", "exp_bs_irs", "exp_irs_mu"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be > 0")


@dataclass(frozen=True)
class DopplerParams:
    velocity: float
    carrier_freq: float
    t_delay: float
    light_speed: float = 3.0e8

    def __post_init__(self):
        for name in ("velocity", "carrier_freq", "t_delay", "light_speed"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be non-negative")

    @property
    def doppler_freq(self):
        return self.velocity * self.carrier_freq / self.light_speed


@dataclass(frozen=True)
class ErrorRadii:
    """有界估計誤差球的半徑 ς，分別對應 BS-MU、IRS-MU、BS-Eve、IRS-Eve 四類鏈路。"""
    bu: float = 0.0
    ru: float = 0.0
    be: float = 0.0
    re: float = 0.0

    def __post_init__(self):
        for name in ("bu", "ru", "be", "re"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"error radius {name} must be >= 0")


@dataclass(frozen=True, eq=False)
class LinkGains:
    """大尺度功率增益 (線性)。在一個 episode 內固定。"""
    br: float
    bu: np.ndarray  # (K,)
    ru: np.ndarray  # (K,)
    be: np.ndarray  # (M,)
    re: np.ndarray  # (M,)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """
    某一時槽的全部通道。向量以列 (row) 儲存：
    H_br (L, N)、h_bu (K, N)、h_ru (K, L)、h_be (M, N)、h_re (M, L)。
    """
    H_br: np.ndarray
    h_bu: np.ndarray
    h_ru: np.ndarray
    h_be: np.ndarray
    h_re: np.ndarray
    gains: LinkGains

    def __post_init__(self):
        L, N = self.H_br.shape
        K, M = self.h_bu.shape[0], self.h_be.shape[0]
        expected = {
            "h_bu": (K, N), "h_ru": (K, L), "h_be": (M, N), "h_re": (M, L),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise InvalidArgumentError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in ("H_br", "h_bu", "h_ru", "h_be", "h_re"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidArgumentError(f"{name} contains non-finite entries")

    @property
    def dims(self):
        """(N, K, M, L)"""
        L, N = self.H_br.shape
        return N, self.h_bu.shape[0], self.h_be.shape[0], L

    def blocks(self):
        return [self.H_br, self.h_bu, self.h_ru, self.h_be, self.h_re]

    def features(self):
        """依 H_br, h_bu, h_ru, h_be, h_re 的順序攤平，每個區塊先實部後虛部。"""
        parts = []
        for block in self.blocks():
            flat = block.reshape(-1)
            parts.append(flat.real)
            parts.append(flat.imag)
        return np.concatenate(parts)


def path_gain(d, exponent, plp):
    """
    路徑損耗對應的線性功率增益。
    PL_dB = pl0_db + 10·exponent·log10(d/d0)，增益 = 10^(-PL_dB/10)。
    """
    if d <= 0:
        raise InvalidArgumentError(f"distance must be > 0, got {d}")
    pl_db = plp.pl0_db + 10.0 * exponent * np.log10(d / plp.d0)
    return float(10.0 ** (-pl_db / 10.0))


def _distances(origin, points):
    return np.sqrt(np.sum((np.asarray(points) - origin) ** 2, axis=-1))


def link_gains(geom, plp, irs_enabled=True):
    """
    由幾何位置計算每條鏈路的功率增益。竊聽者沿用合法用戶的路徑損耗指數。
    irs_enabled=False 時 IRS 相關鏈路增益為 0 (無 IRS 的基準方案)。
    """
    d_br = float(np.linalg.norm(geom.irs_pos - geom.bs_pos))
    d_bu = _distances(geom.bs_pos, geom.mu_pos)
    d_ru = _distances(geom.irs_pos, geom.mu_pos)
    d_be = _distances(geom.bs_pos, geom.eve_pos)
    d_re = _distances(geom.irs_pos, geom.eve_pos)
    irs = 1.0 if irs_enabled else 0.0
    return LinkGains(
        br=irs * path_gain(d_br, plp.exp_bs_irs, plp),
        bu=np.array([path_gain(d, plp.exp_bs_mu, plp) for d in d_bu]),
        ru=irs * np.array([path_gain(d, plp.exp_irs_mu, plp) for d in d_ru]),
        be=np.array([path_gain(d, plp.exp_bs_mu, plp) for d in d_be]),
        re=irs * np.array([path_gain(d, plp.exp_irs_mu, plp) for d in d_re]),
    )


def place_nodes(n_users, n_eves, rng, bs_pos=(0.0, 0.0), irs_pos=(150.0, 100.0),
                area=(100.0, 200.0, 0.0, 100.0), grid_step=2.5, exclude=()):
    """
    在矩形區域的網格點上隨機放置 K 個用戶與 M 個竊聽者 (不重複)。
    exclude 中的座標 (已明確指定的節點) 不會被選到。
    預設區域為 100m×100m、解析度 2.5m，共 1600 個網格點。
    """
    x_min, x_max, y_min, y_max = area
    xs = np.arange(x_min, x_max, grid_step)
    ys = np.arange(y_min, y_max, grid_step)
    grid = np.array([(x, y) for x in xs for y in ys])
    # 排除與 BS、IRS 重合的格點
    keep = (_distances(np.asarray(bs_pos, dtype=float), grid) > 0) & (_distances(np.asarray(irs_pos, dtype=float), grid) > 0)
    for point in np.asarray(exclude, dtype=float).reshape(-1, 2):
        keep &= _distances(point, grid) > 0
    grid = grid[keep]
    if n_users + n_eves > len(grid):
        raise InvalidArgumentError(f"cannot place {n_users + n_eves} nodes on {len(grid)} grid points")
    chosen = rng.choice(len(grid), size=n_users + n_eves, replace=False)
    points = grid[chosen]
    return Geometry(bs_pos=bs_pos, irs_pos=irs_pos, mu_pos=points[:n_users], eve_pos=points[n_users:])


def complex_gaussian(shape, rng):
    """循環對稱複高斯 CN(0, 1)。"""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _block_scales(gains, n_antennas, n_elements):
    """每個區塊逐元素的標準差 sqrt(path_gain)，形狀與區塊相同。"""
    K, M = len(gains.bu), len(gains.be)
    return [
        np.full((n_elements, n_antennas), np.sqrt(gains.br)),
        np.broadcast_to(np.sqrt(gains.bu)[:, None], (K, n_antennas)),
        np.broadcast_to(np.sqrt(gains.ru)[:, None], (K, n_elements)),
        np.broadcast_to(np.sqrt(gains.be)[:, None], (M, n_antennas)),
        np.broadcast_to(np.sqrt(gains.re)[:, None], (M, n_elements)),
    ]


def _from_blocks(blocks, gains):
    return ChannelSet(H_br=blocks[0], h_bu=blocks[1], h_ru=blocks[2], h_be=blocks[3], h_re=blocks[4], gains=gains)


def _block_rngs(rng):
    """
    五類鏈路 (H_br, h_bu, h_ru, h_be, h_re) 各自的子串流。每次呼叫只從 rng 取五個種子，
    直接鏈路的抽樣因此與 IRS 元件數 L 無關。
    """
    return [make_rng(int(s)) for s in rng.integers(0, 2 ** 63 - 1, size=5)]


def sample_initial(geom, plp, n_antennas, n_elements, rng, irs_enabled=True):
    """
    產生初始通道：每個元素 = sqrt(path_gain)·g，g ~ CN(0, 1) (Rayleigh 衰落)。
    """
    if n_antennas < 1 or n_elements < 1:
        raise InvalidArgumentError("n_antennas and n_elements must be >= 1")
    gains = link_gains(geom, plp, irs_enabled=irs_enabled)
    scales = _block_scales(gains, n_antennas, n_elements)
    blocks = [s * complex_gaussian(s.shape, r) for s, r in zip(scales, _block_rngs(rng))]
    return _from_blocks(blocks, gains)


def autocorrelation(dp):
    """Jakes 模型的時間相關係數 ρ = J0(2π f_D T_delay)。"""
    return bessel_j0(2.0 * np.pi * dp.doppler_freq * dp.t_delay)


def evolve(h_t, rho, rng):
    """
    過時 CSI 的一階 Gauss-Markov 演進：h(t+T) = ρ·h(t) + sqrt(1-ρ²)·ĥ，
    ĥ 與初始通道有相同的逐元素變異數。
    """
    if not 0.0 <= rho <= 1.0:
        raise InvalidArgumentError(f"rho must be within [0, 1], got {rho}")
    N, _, _, L = h_t.dims
    scales = _block_scales(h_t.gains, N, L)
    innovation_weight = np.sqrt(1.0 - rho ** 2)
    blocks = []
    for block, scale, block_rng in zip(h_t.blocks(), scales, _block_rngs(rng)):
        fresh = scale * complex_gaussian(block.shape, block_rng)
        blocks.append(rho * block + innovation_weight * fresh)
    return _from_blocks(blocks, h_t.gains)


def _ball_perturbation(rows, dim, radius, rng):
    """在複數範數球內均勻取樣：方向在球面上均勻，半徑 r = ς·u^(1/(2·dim))。"""
    direction = complex_gaussian((rows, dim), rng)
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    u = rng.uniform(0.0, 1.0, size=(rows, 1))
    r = radius * u ** (1.0 / (2.0 * dim))
    return r * direction / norms


def apply_error(h_est, radii, rng):
    """
    範數有界的估計誤差：實際通道 = 估計通道 + Δh，‖Δh‖ ≤ ς。
    只作用於用戶/竊聽者的向量；BS-IRS 矩陣不受影響。
    """
    N, K, M, L = h_est.dims
    _, r_bu, r_ru, r_be, r_re = _block_rngs(rng)
    return _from_blocks([
        h_est.H_br,
        h_est.h_bu + _ball_perturbation(K, N, radii.bu, r_bu),
        h_est.h_ru + _ball_perturbation(K, L, radii.ru, r_ru),
        h_est.h_be + _ball_perturbation(M, N, radii.be, r_be),
        h_est.h_re + _ball_perturbation(M, L, radii.re, r_re),
    ], h_est.gains)


def absolute_error_radii(relative, gains, n_antennas, n_elements):
    """
    把相對半徑 (相對於該類鏈路的平均通道範數 sqrt(gain·dim)) 轉成絕對半徑。
    """
    def scale(g, dim):
        g = np.asarray(g, dtype=float)
        return float(np.sqrt(np.mean(g) * dim)) if g.size else 0.0

    return replace(
        relative,
        bu=relative.bu * scale(gains.bu, n_antennas),
        ru=relative.ru * scale(gains.ru, n_elements),
        be=relative.be * scale(gains.be, n_antennas),
        re=relative.re * scale(gains.re, n_elements),
    )
