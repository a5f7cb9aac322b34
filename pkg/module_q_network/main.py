import logging
from dataclasses import dataclass

import numpy as np

from common.exceptions import InvalidArgumentError, TrainingDivergenceError
from common.utils import make_rng

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "irs-qnet v1"


@dataclass(eq=False)
class Mlp:
    """
    全連接 Q 網路。weights[i] 形狀為 (fan_in, fan_out)；隱藏層使用 ReLU，輸出層為恆等。
    """
    weights: list
    biases: list

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self):
        return self.weights[0].shape[0]

    @property
    def n_outputs(self):
        return self.weights[-1].shape[1]

    def copy(self):
        return Mlp(weights=[w.copy() for w in self.weights], biases=[b.copy() for b in self.biases])


@dataclass(eq=False)
class Batch:
    inputs: np.ndarray           # (H, S)
    action_indices: np.ndarray   # (H,)
    targets: np.ndarray          # (H,)
    is_weights: np.ndarray       # (H,)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.action_indices = np.asarray(self.action_indices, dtype=int)
        self.targets = np.asarray(self.targets, dtype=float)
        self.is_weights = np.asarray(self.is_weights, dtype=float)
        H = self.inputs.shape[0]
        if not (len(self.action_indices) == len(self.targets) == len(self.is_weights) == H):
            raise InvalidArgumentError("batch fields must have equal lengths")
        if np.any(self.is_weights < 0) or not np.all(np.isfinite(self.is_weights)):
            raise InvalidArgumentError("importance-sampling weights must be finite and >= 0")


def init(layer_sizes, seed):
    """Glorot 均勻初始化：W ~ U(±sqrt(6/(fan_in+fan_out)))，偏置為 0。"""
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise InvalidArgumentError(f"need at least 2 positive layer sizes, got {layer_sizes}")
    rng = make_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights=weights, biases=biases)


def _relu(z):
    return np.maximum(z, 0.0)


def _hidden(net, X):
    """回傳最後一個隱藏層的輸出，以及反向傳播所需的中間量。"""
    activations = [X]
    pre_activations = []
    a = X
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ W + b
        pre_activations.append(z)
        a = _relu(z)
        activations.append(a)
    return a, activations, pre_activations


def forward_batch(net, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.n_inputs:
        raise InvalidArgumentError(f"input has {X.shape[1]} features, network expects {net.n_inputs}")
    a, _, _ = _hidden(net, X)
    return a @ net.weights[-1] + net.biases[-1]


def forward(net, x):
    """單一狀態 → 每個聯合動作一個 Q 值。"""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError(f"forward expects a 1-D state, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


def forward_selected(net, X, actions):
    """每一列只計算被選動作的輸出：out[i] = forward(X[i])[actions[i]]。"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.n_inputs:
        raise InvalidArgumentError(f"input has {X.shape[1]} features, network expects {net.n_inputs}")
    actions = np.asarray(actions, dtype=int)
    a, _, _ = _hidden(net, X)
    return np.einsum("ij,ji->i", a, net.weights[-1][:, actions]) + net.biases[-1][actions]


def forward_candidates(net, shared, varying):
    """
    所有候選輸入共用前綴特徵 shared，只有後綴 varying[c] 不同；第 c 列取輸出 c。
    shared: (B, S1) 或 (S1,)；varying: (B, C, S2) 或 (C, S2)。回傳 (B, C) 或 (C,)。
    第一層拆成 shared·W_top + varying·W_bottom，避免重複計算共用部分。
    """
    single = np.ndim(varying) == 2
    shared = np.atleast_2d(np.asarray(shared, dtype=float))
    varying = np.asarray(varying, dtype=float)
    if single:
        varying = varying[None]
    B, C, S2 = varying.shape
    S1 = shared.shape[1]
    if S1 + S2 != net.n_inputs or shared.shape[0] != B:
        raise InvalidArgumentError("shared/varying shapes do not match the network input")
    if C > net.n_outputs:
        raise InvalidArgumentError("more candidates than network outputs")
    W0, b0 = net.weights[0], net.biases[0]
    if len(net.weights) == 1:
        z = (shared @ W0[:S1, :C])[:, None, :] + varying @ W0[S1:, :C] + b0[:C]
        out = np.diagonal(z, axis1=1, axis2=2)
        return out[0] if single else out
    z = (shared @ W0[:S1])[:, None, :] + varying @ W0[S1:] + b0
    a = _relu(z).reshape(B * C, -1)
    for W, b in zip(net.weights[1:-1], net.biases[1:-1]):
        a = _relu(a @ W + b)
    a = a.reshape(B, C, -1)
    out = np.einsum("bch,hc->bc", a, net.weights[-1][:, :C]) + net.biases[-1][:C]
    return out[0] if single else out


def loss(net, batch):
    """(1/H) Σ W_i (target_i − q(x_i)[a_i])²"""
    q = forward_selected(net, batch.inputs, batch.action_indices)
    return float(np.mean(batch.is_weights * (batch.targets - q) ** 2))


def gradients(net, batch):
    """
    加權 MSE 對所有參數的解析梯度。每個樣本只有被選動作的輸出單元接收損失梯度。
    回傳 (grad_weights, grad_biases, loss_value)。
    """
    X = batch.inputs
    H = X.shape[0]
    a_last, activations, pre_activations = _hidden(net, X)
    out = a_last @ net.weights[-1] + net.biases[-1]
    rows = np.arange(H)
    q = out[rows, batch.action_indices]
    err = batch.targets - q
    loss_value = float(np.mean(batch.is_weights * err ** 2))

    d_out = np.zeros_like(out)
    np.add.at(d_out, (rows, batch.action_indices), -2.0 * batch.is_weights * err / H)

    grad_w = [None] * len(net.weights)
    grad_b = [None] * len(net.biases)
    delta = d_out
    for i in range(len(net.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = np.sum(delta, axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre_activations[i - 1] > 0)
    return grad_w, grad_b, loss_value


def _check_finite(grad_w, grad_b, loss_value):
    if not np.isfinite(loss_value):
        raise TrainingDivergenceError(f"non-finite loss {loss_value}")
    for g in grad_w + grad_b:
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("non-finite gradient")


class GradientDescent:
    """
    θ ← θ − β∇L(θ)。momentum > 0 時使用動量版本 (預設關閉)。
    """

    def __init__(self, beta, momentum=0.0):
        if beta <= 0:
            raise InvalidArgumentError(f"learning rate must be > 0, got {beta}")
        self.beta = beta
        self.momentum = momentum
        self._velocity = None

    def update(self, net, batch):
        grad_w, grad_b, loss_value = gradients(net, batch)
        _check_finite(grad_w, grad_b, loss_value)
        if self.momentum > 0:
            if self._velocity is None:
                self._velocity = [np.zeros_like(p) for p in net.weights + net.biases]
            steps = []
            for v, g in zip(self._velocity, grad_w + grad_b):
                v *= self.momentum
                v += g
                steps.append(v)
        else:
            steps = grad_w + grad_b
        n = len(net.weights)
        new_net = Mlp(
            weights=[w - self.beta * s for w, s in zip(net.weights, steps[:n])],
            biases=[b - self.beta * s for b, s in zip(net.biases, steps[n:])],
        )
        return new_net, loss_value


def backward_and_update(net, batch, beta):
    """單次純梯度下降，回傳更新後的新網路 (原網路不變)。"""
    new_net, _ = GradientDescent(beta).update(net, batch)
    return new_net


def save_checkpoint(net, path):
    """
    文字格式：第一行 'irs-qnet v1'，第二行層大小 (空白分隔)，
    之後每行一個參數：W1 (row-major)、b1、W2、b2 …，以 %.17g 寫出。
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write(" ".join(str(s) for s in net.layer_sizes) + "\n")
        for W, b in zip(net.weights, net.biases):
            for value in W.reshape(-1):
                fh.write(f"{value:.17g}\n")
            for value in b:
                fh.write(f"{value:.17g}\n")
    logger.info(f"Saved Q-network checkpoint to {path}.")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise InvalidArgumentError(f"{path} is not a Q-network checkpoint")
    sizes = [int(v) for v in lines[1].split()]
    values = np.array([float(v) for v in lines[2:] if v.strip()])
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if len(values) != expected:
        raise InvalidArgumentError(f"checkpoint has {len(values)} parameters, expected {expected}")
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(values[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(values[pos:pos + fan_out].copy())
        pos += fan_out
    return Mlp(weights=weights, biases=biases)
