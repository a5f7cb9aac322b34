import unittest

import numpy as np
import numpy.testing as npt

from common.exceptions import InvalidArgumentError, PreconditionError
from common.utils import make_rng
from module_prioritized_replay.main import PrioritizedReplayBuffer, SumTree, Transition


def transition(action=0, r_known=0.5, r_unknown=0.25):
    return Transition(state=np.zeros(3), action=action, r_known=r_known, r_unknown=r_unknown,
                      pds_state=np.zeros(3), next_state=np.zeros(3))


class TestSumTree(unittest.TestCase):

    def test_root_matches_linear_scan(self) -> None:
        rng = make_rng(0)
        for capacity in (1, 7, 64):
            tree = SumTree(capacity)
            for _ in range(10000):
                tree.update(int(rng.integers(capacity)), float(rng.uniform(0.0, 10.0)))
            self.assertAlmostEqual(tree.total(), float(np.sum(tree.leaves())), delta=1e-9 * tree.total())

    def test_find(self) -> None:
        tree = SumTree(4)
        for i, p in enumerate([1.0, 2.0, 3.0, 4.0]):
            tree.update(i, p)
        self.assertEqual([tree.find(m) for m in (0.0, 0.99, 1.0, 2.5, 3.0, 5.99, 6.0, 9.99)],
                         [0, 0, 1, 1, 2, 2, 3, 3])

    def test_invalid_capacity(self) -> None:
        with self.assertRaises(InvalidArgumentError):
            SumTree(0)


class TestPrioritizedReplay(unittest.TestCase):

    def test_sampling_frequencies(self) -> None:
        buffer = PrioritizedReplayBuffer(4, eta1=1.0, eta2=0.4)
        for i, p in enumerate([1.0, 2.0, 3.0, 4.0]):
            buffer.push(transition(action=i), priority=p)
        rng = make_rng(1)
        counts = np.zeros(4)
        for _ in range(1000):
            counts += np.bincount(buffer.sample(100, rng).indices, minlength=4)
        empirical = counts / counts.sum()
        tv = 0.5 * np.sum(np.abs(empirical - np.array([0.1, 0.2, 0.3, 0.4])))
        self.assertLess(tv, 0.01)

    def test_importance_weights(self) -> None:
        buffer = PrioritizedReplayBuffer(4, eta1=1.0, eta2=0.5)
        for i, p in enumerate([1.0, 2.0, 3.0, 4.0]):
            buffer.push(transition(action=i), priority=p)
        sample = buffer.sample(8, make_rng(2))
        npt.assert_allclose(sample.probabilities, (sample.indices + 1) / 10.0)
        npt.assert_allclose(sample.raw_weights, (4 * sample.probabilities) ** -0.5)
        self.assertAlmostEqual(np.max(sample.is_weights), 1.0)
        self.assertTrue(np.all(sample.is_weights <= 1.0))

    def test_uniform_when_exponents_zero(self) -> None:
        buffer = PrioritizedReplayBuffer(8, eta1=0.0, eta2=0.0)
        for i in range(5):
            buffer.push(transition(action=i), priority=float(i))
        npt.assert_allclose(buffer.probabilities(), np.full(5, 0.2))
        npt.assert_array_equal(buffer.sample(4, make_rng(0)).is_weights, 1.0)

    def test_root_after_interleaved_push_and_update(self) -> None:
        rng = make_rng(7)
        buffer = PrioritizedReplayBuffer(50, eta1=0.6, eta2=0.4)
        expected = np.zeros(50)
        cursor = 0
        for _ in range(10000):
            if len(buffer) == 0 or rng.random() < 0.5:
                priority = float(rng.uniform(0.0, 10.0))
                buffer.push(transition(), priority=priority)
                expected[cursor] = priority ** 0.6
                cursor = (cursor + 1) % 50
            else:
                indices = rng.integers(len(buffer), size=3)
                errors = rng.uniform(0.0, 5.0, size=3)
                buffer.update_priorities(indices, errors)
                for idx, err in zip(indices, errors):
                    expected[idx] = (err + buffer.priority_eps) ** 0.6
        total = float(np.sum(expected))
        self.assertAlmostEqual(buffer.tree.total(), total, delta=1e-9 * total)
        npt.assert_allclose(buffer.tree.leaves(), expected, rtol=1e-15)

    def test_full_correction_with_uniform_priorities(self) -> None:
        buffer = PrioritizedReplayBuffer(6, eta1=0.6, eta2=1.0)
        for i in range(6):
            buffer.push(transition(action=i))
        sample = buffer.sample(4, make_rng(3))
        npt.assert_array_equal(sample.raw_weights, 1.0)
        npt.assert_array_equal(sample.is_weights, 1.0)

    def test_empty_buffer(self) -> None:
        with self.assertRaises(PreconditionError):
            PrioritizedReplayBuffer(4).sample(1, make_rng(0))

    def test_new_transitions_get_max_priority(self) -> None:
        buffer = PrioritizedReplayBuffer(8, eta1=1.0)
        self.assertEqual(buffer.max_priority(), 1.0)
        buffer.push(transition())
        buffer.push(transition())
        buffer.update_priorities([0, 1], [5.0, 2.0])
        buffer.push(transition())
        self.assertAlmostEqual(buffer.tree.leaf(2), 5.0 + 1e-6)

    def test_update_priorities(self) -> None:
        buffer = PrioritizedReplayBuffer(4, eta1=0.5, priority_eps=0.0)
        for _ in range(3):
            buffer.push(transition())
        buffer.update_priorities([1], [-4.0])
        self.assertAlmostEqual(buffer.tree.leaf(1), 2.0)
        with self.assertRaises(InvalidArgumentError):
            buffer.update_priorities([3], [1.0])

    def test_fifo_eviction(self) -> None:
        buffer = PrioritizedReplayBuffer(3)
        for i in range(5):
            buffer.push(transition(action=i))
        self.assertEqual(len(buffer), 3)
        self.assertEqual(sorted(t.action for t in buffer.data), [2, 3, 4])

    def test_reward_split_checked_on_push(self) -> None:
        bad = transition()
        bad.r_total = 1.0
        with self.assertRaises(InvalidArgumentError):
            PrioritizedReplayBuffer(2).push(bad)
