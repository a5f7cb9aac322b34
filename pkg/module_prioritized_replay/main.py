import logging
from dataclasses import dataclass

import numpy as np

from common.exceptions import InvalidArgumentError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Transition:
    """PDS 經驗 e_t = <s_t, a_t, r_t, s̃_t, s_{t+1}>，獎勵拆成已知與未知兩部分。"""
    state: np.ndarray
    action: int
    r_known: float
    r_unknown: float
    pds_state: np.ndarray
    next_state: np.ndarray
    r_total: float = None
    next_context: object = None

    def __post_init__(self):
        if self.r_total is None:
            self.r_total = self.r_known + self.r_unknown


@dataclass(eq=False)
class SampleResult:
    indices: np.ndarray
    transitions: list
    probabilities: np.ndarray
    raw_weights: np.ndarray
    is_weights: np.ndarray


class SumTree:
    """
    陣列型態的求和樹：葉節點存放優先權 p^η1，內部節點為兩個子節點之和。
    更新時由子節點重新相加 (而非累加差值)，父子關係在任何操作後都精確成立。
    """

    def __init__(self, capacity):
        if capacity < 1:
            raise InvalidArgumentError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.tree = np.zeros(2 * capacity - 1)

    def update(self, leaf, value):
        idx = leaf + self.capacity - 1
        self.tree[idx] = value
        while idx > 0:
            idx = (idx - 1) // 2
            self.tree[idx] = self.tree[2 * idx + 1] + self.tree[2 * idx + 2]

    def total(self):
        return float(self.tree[0])

    def leaf(self, leaf):
        return float(self.tree[leaf + self.capacity - 1])

    def leaves(self):
        return self.tree[self.capacity - 1:]

    def find(self, mass):
        """回傳累積和首次超過 mass 的葉節點索引。"""
        idx = 0
        while idx < self.capacity - 1:
            left = 2 * idx + 1
            if mass < self.tree[left]:
                idx = left
            else:
                mass -= self.tree[left]
                idx = left + 1
        return idx - (self.capacity - 1)


class PrioritizedReplayBuffer:
    """
    比例式優先經驗回放。滿了之後依寫入順序 (FIFO) 覆蓋最舊的經驗。
    eta1 = 0 時退化為均勻取樣；eta2 = 0 時所有 IS 權重為 1。
    """

    def __init__(self, capacity, eta1=0.6, eta2=0.4, priority_eps=1e-6):
        self.capacity = capacity
        self.eta1 = eta1
        self.eta2 = eta2
        self.priority_eps = priority_eps
        self.tree = SumTree(capacity)
        self.data = [None] * capacity
        self.cursor = 0
        self.size = 0

    def __len__(self):
        return self.size

    def max_priority(self):
        """目前最大的葉節點值；空緩衝區時為 1。"""
        if self.size == 0:
            return 1.0
        return float(np.max(self.tree.leaves()[:self.size]))

    def push(self, t, priority=None):
        """
        寫入一筆經驗。priority 為原始優先權 p，葉節點存 p^η1；
        未指定時使用目前最大葉節點值，確保新經驗至少被回放一次。
        """
        if t.r_known + t.r_unknown != t.r_total:
            raise InvalidArgumentError("transition violates r_known + r_unknown == r_total")
        if priority is None:
            leaf_value = self.max_priority()
        else:
            if priority < 0:
                raise InvalidArgumentError(f"priority must be >= 0, got {priority}")
            leaf_value = float(priority) ** self.eta1
        self.data[self.cursor] = t
        self.tree.update(self.cursor, leaf_value)
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size, rng):
        """
        分層比例取樣：總質量分成 H 段，每段均勻抽一次。
        p(i) = leaf_i / Σ leaf；W(i) = (D·p(i))^(−η2)，再除以批次內最大值。
        """
        if self.size == 0:
            raise PreconditionError("cannot sample from an empty replay buffer")
        if batch_size < 1:
            raise InvalidArgumentError(f"batch size must be >= 1, got {batch_size}")
        total = self.tree.total()
        segment = total / batch_size
        indices = np.empty(batch_size, dtype=int)
        for i in range(batch_size):
            mass = rng.uniform(segment * i, segment * (i + 1))
            leaf = self.tree.find(min(mass, np.nextafter(total, 0.0)))
            # 浮點邊界可能落到空葉節點，退回到最後一個有效位置
            if leaf >= self.size or self.tree.leaf(leaf) <= 0:
                leaf = self._nearest_valid(leaf)
            indices[i] = leaf
        leaf_values = self.tree.leaves()[indices]
        probabilities = leaf_values / total
        raw_weights = ((self.size * leaf_values) / total) ** (-self.eta2)
        is_weights = raw_weights / np.max(raw_weights)
        return SampleResult(
            indices=indices,
            transitions=[self.data[i] for i in indices],
            probabilities=probabilities,
            raw_weights=raw_weights,
            is_weights=is_weights,
        )

    def _nearest_valid(self, leaf):
        leaves = self.tree.leaves()[:self.size]
        valid = np.flatnonzero(leaves > 0)
        if valid.size == 0:
            return min(leaf, self.size - 1)
        return int(valid[np.argmin(np.abs(valid - leaf))])

    def update_priorities(self, indices, abs_td_errors):
        """葉節點 = (|δ| + ε_p)^η1，並更新祖先節點。"""
        for idx, err in zip(np.asarray(indices, dtype=int), np.asarray(abs_td_errors, dtype=float)):
            if not 0 <= idx < self.size:
                raise InvalidArgumentError(f"priority index {idx} beyond occupancy {self.size}")
            self.tree.update(int(idx), (abs(float(err)) + self.priority_eps) ** self.eta1)

    def probabilities(self):
        """目前整個緩衝區的取樣機率 (測試與診斷用)。"""
        leaves = self.tree.leaves()[:self.size]
        return leaves / self.tree.total()
