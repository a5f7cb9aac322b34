import numpy as np

from common.exceptions import InvalidArgumentError


def dbm_to_watt(power_dbm):
    """將 dBm 轉換為瓦特 (W)。P_W = 10^((P_dBm - 30) / 10)"""
    return 10.0 ** ((float(power_dbm) - 30.0) / 10.0)


def watt_to_dbm(power_watt):
    """將瓦特 (W) 轉換為 dBm。"""
    if power_watt <= 0:
        raise InvalidArgumentError(f"power must be positive, got {power_watt}")
    return 10.0 * np.log10(power_watt) + 30.0


def make_rng(seed):
    """建立可重現的隨機數產生器。所有模擬都必須透過明確的 RNG 傳遞，不使用全域狀態。"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seed(seed, *tags):
    """由基礎種子與標籤 (例如 sweep 的取值索引) 衍生獨立的子種子。"""
    entropy = [int(seed)] + [int(t) for t in tags]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def parse_float_list(text):
    """解析以逗號分隔的數值列表，例如 "15,25,35"。"""
    return [float(v) for v in str(text).split(",") if v.strip()]


def parse_int_list(text):
    """解析以逗號分隔的整數列表。"""
    return [int(v) for v in str(text).split(",") if v.strip()]
