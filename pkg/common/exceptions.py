class IrsWorkbenchError(Exception):
    """工作台所有錯誤的基底類別。CLI 邊界只捕捉這個類別。"""


class InvalidArgumentError(IrsWorkbenchError, ValueError):
    """參數不合法：維度不符、索引越界、ρ 超出 [0, 1] 等。"""


class PreconditionError(IrsWorkbenchError, RuntimeError):
    """呼叫前置條件不成立，例如從空的回放緩衝區取樣。"""


class TrainingDivergenceError(IrsWorkbenchError, ArithmeticError):
    """訓練發散：損失或梯度出現 NaN/Inf。"""


class ConfigError(InvalidArgumentError):
    """設定檔錯誤，訊息中一定包含出錯的鍵名。"""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
