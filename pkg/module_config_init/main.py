import os
import logging
from dataclasses import dataclass, fields, replace

from common.exceptions import ConfigError
from common.utils import dbm_to_watt

logger = logging.getLogger(__name__)

# 從環境變數獲取執行期設定 (與實驗參數分開，不寫入輸出檔)
LOG_LEVEL = os.environ.get("IRS_LOG_LEVEL", "INFO")
SWEEP_JOBS = int(os.environ.get("IRS_SWEEP_JOBS", "1"))
DEFAULT_CONFIG_PATH = os.environ.get("IRS_CONFIG", "")

SWEEP_VARIABLES = ("p_max_dbm", "irs_elements", "rho", "learning_rate")


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_rho(text):
    lowered = text.strip().lower()
    if lowered == "auto":
        return None
    return float(text)


def _parse_positions(text):
    """'x:y;x:y' → ((x, y), ...)；空字串表示隨機放置。"""
    text = text.strip()
    if not text:
        return ()
    points = []
    for item in text.split(";"):
        x, y = item.split(":")
        points.append((float(x), float(y)))
    return tuple(points)


def _format_positions(points):
    return ";".join(f"{float(x)!r}:{float(y)!r}" for x, y in points)


def _parse_sizes(text):
    sizes = tuple(int(v) for v in text.split(",") if v.strip())
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive integers: {text!r}")
    return sizes


@dataclass(frozen=True)
class ExperimentConfig:
    """
    一次實驗的完整設定。欄位名稱即設定檔中的鍵名，預設值即文件中的預設表。
    """
    # --- 系統 ---
    n_antennas: int = 4
    n_users: int = 2
    n_eves: int = 2
    irs_elements: int = 10
    p_max_dbm: float = 30.0
    noise_dbm: float = -90.0
    pl0_db: float = 30.0
    d0: float = 1.0
    exp_bs_mu: float = 3.2
    exp_bs_irs: float = 2.2
    exp_irs_mu: float = 2.2
    bs_x: float = 0.0
    bs_y: float = 0.0
    irs_x: float = 150.0
    irs_y: float = 100.0
    area_x_min: float = 100.0
    area_x_max: float = 200.0
    area_y_min: float = 0.0
    area_y_max: float = 100.0
    grid_step: float = 2.5
    mu_positions: tuple = ()
    eve_positions: tuple = ()
    placement_seed: int = 7
    # --- 通道 ---
    rho: float = 0.95            # None 表示 auto：由都卜勒參數計算
    velocity: float = 3.0
    carrier_freq: float = 2.4e9
    t_delay: float = 1.0e-3
    light_speed: float = 3.0e8
    err_bu_rel: float = 0.0
    err_ru_rel: float = 0.0
    err_be_rel: float = 0.0
    err_re_rel: float = 0.0
    # --- QoS 與獎勵 ---
    r_sec_min: float = 3.0
    r_min: float = 5.0
    mu1: float = 2.0
    mu2: float = 2.0
    # --- 碼本 ---
    bs_directions: int = 4
    bs_power_levels: int = 2
    irs_codebook_size: int = 16
    phase_bits: int = 2
    codebook_seed: int = 11
    # --- 代理 ---
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
    reward_scale: float = 0.1
    warmup_steps: int = 1000
    validation_steps: int = 200
    # --- 訓練 ---
    episodes: int = 200
    horizon: int = 100
    seed: int = 0
    eval_episodes: int = 20
    log_every: int = 10

    @property
    def p_max_watt(self):
        return dbm_to_watt(self.p_max_dbm)

    @property
    def noise_watt(self):
        return dbm_to_watt(self.noise_dbm)

    def with_overrides(self, **overrides):
        """回傳套用覆寫值後的新設定 (sweep 使用)，並重新驗證。"""
        for key in overrides:
            if key not in _FIELD_TYPES:
                raise ConfigError(key, "unknown key")
        cfg = replace(self, **overrides)
        validate_config(cfg)
        return cfg

    def to_items(self):
        """回傳 (key, 文字值) 列表，格式可被 parse_config 重新讀回。"""
        return [(f.name, format_value(f.name, getattr(self, f.name))) for f in fields(self)]


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}

_PARSERS = {
    "mu_positions": _parse_positions,
    "eve_positions": _parse_positions,
    "hidden_sizes": _parse_sizes,
    "rho": _parse_rho,
}


def coerce_value(key, text):
    try:
        if key in _PARSERS:
            return _PARSERS[key](text)
        kind = _FIELD_TYPES[key]
        if kind is bool or kind == "bool":
            return _parse_bool(text)
        if kind is int or kind == "int":
            return int(text)
        if kind is float or kind == "float":
            return float(text)
        return text.strip()
    except (ValueError, TypeError) as e:
        raise ConfigError(key, f"cannot parse {text.strip()!r}: {e}") from e


def format_value(key, value):
    if key in ("mu_positions", "eve_positions"):
        return _format_positions(value)
    if key == "hidden_sizes":
        return ",".join(str(v) for v in value)
    if key == "rho" and value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def validate_config(cfg):
    """檢查各欄位的取值範圍，錯誤時拋出帶鍵名的 ConfigError。"""
    for key in ("n_antennas", "n_users", "n_eves", "irs_elements", "bs_directions", "bs_power_levels",
                "irs_codebook_size", "phase_bits", "batch_size", "buffer_capacity", "horizon"):
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be >= 1")
    for key in ("episodes", "eval_episodes", "warmup_steps", "validation_steps", "target_sync",
                "eps_anneal_episodes"):
        if getattr(cfg, key) < 0:
            raise ConfigError(key, "must be >= 0")
    if cfg.log_every < 1:
        raise ConfigError("log_every", "must be >= 1")
    if cfg.bs_directions < cfg.n_users:
        raise ConfigError("bs_directions", "must be >= n_users")
    if cfg.rho is not None and not 0.0 <= cfg.rho <= 1.0:
        raise ConfigError("rho", "must be within [0, 1] or 'auto'")
    if not 0.0 < cfg.gamma <= 1.0:
        raise ConfigError("gamma", "must be within (0, 1]")
    if cfg.learning_rate <= 0:
        raise ConfigError("learning_rate", "must be > 0")
    for key in ("eps_start", "eps_end"):
        if not 0.0 <= getattr(cfg, key) <= 1.0:
            raise ConfigError(key, "must be within [0, 1]")
    for key in ("mu1", "mu2", "r_sec_min", "r_min", "per_eta1", "per_eta2", "per_eps",
                "err_bu_rel", "err_ru_rel", "err_be_rel", "err_re_rel", "velocity", "t_delay"):
        if getattr(cfg, key) < 0:
            raise ConfigError(key, "must be >= 0")
    for key in ("d0", "exp_bs_mu", "exp_bs_irs", "exp_irs_mu", "grid_step", "carrier_freq",
                "light_speed", "reward_scale"):
        if getattr(cfg, key) <= 0:
            raise ConfigError(key, "must be > 0")
    if cfg.optimizer not in ("sgd", "momentum"):
        raise ConfigError("optimizer", "must be 'sgd' or 'momentum'")
    if not 0.0 <= cfg.momentum < 1.0:
        raise ConfigError("momentum", "must be within [0, 1)")
    if cfg.mu_positions and len(cfg.mu_positions) != cfg.n_users:
        raise ConfigError("mu_positions", f"expected {cfg.n_users} positions")
    if cfg.eve_positions and len(cfg.eve_positions) != cfg.n_eves:
        raise ConfigError("eve_positions", f"expected {cfg.n_eves} positions")
    return cfg


def parse_config_text(text, source="<string>"):
    """
    解析扁平的 key = value 文字格式。# 之後為註解；未知鍵、重複鍵或型別錯誤都會拋出 ConfigError。
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(key, f"{source}:{lineno}: unknown key")
        if key in values:
            raise ConfigError(key, f"{source}:{lineno}: duplicate key")
        values[key] = coerce_value(key, value)
    return validate_config(ExperimentConfig(**values))


def parse_config(path):
    """讀取設定檔並回傳 ExperimentConfig。空檔案即所有預設值。"""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError("<file>", f"cannot read config file {path}: {e}") from e
    cfg = parse_config_text(text, source=str(path))
    logger.info(f"Loaded experiment config from {path}.")
    return cfg


def extract_echoed_config(csv_path):
    """
    從輸出 CSV 的 '# key = value' 註解標頭還原設定，用於重現實驗。
    """
    lines = []
    with open(csv_path, encoding="utf-8") as fh:
        for raw in fh:
            if not raw.startswith("# "):
                break
            body = raw[2:].strip()
            key = body.split("=", 1)[0].strip()
            if key in _FIELD_TYPES:
                lines.append(body)
    return parse_config_text("\n".join(lines), source=str(csv_path))


def render_default_table():
    """以設定檔格式列出全部預設值 (即文件中的預設表)。"""
    return "\n".join(f"{key} = {value}" for key, value in ExperimentConfig().to_items())
