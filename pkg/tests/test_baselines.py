import unittest

import numpy as np

from common.exceptions import InvalidArgumentError
from module_baselines.main import _mrt_step_codebooks, baseline_no_irs, baseline_random_phase, run_baseline_kind
from module_config_init.main import ExperimentConfig
from module_pds_per_agent.main import evaluate_fixed_policy
from module_secure_env.main import make_env


def baseline_config(**overrides):
    base = dict(horizon=5, eval_episodes=2, irs_codebook_size=4, bs_power_levels=1)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestNoIrsBaseline(unittest.TestCase):

    def test_independent_of_irs_codebook(self) -> None:
        a = baseline_no_irs(baseline_config(codebook_seed=11))
        b = baseline_no_irs(baseline_config(codebook_seed=99, irs_codebook_size=8, phase_bits=3))
        self.assertEqual(a, b)

    def test_flat_across_irs_sizes(self) -> None:
        results = [baseline_no_irs(baseline_config(irs_elements=L, rho=0.8, err_bu_rel=0.1)) for L in (10, 20, 40)]
        self.assertEqual(results[0], results[1])
        self.assertEqual(results[0], results[2])

    def test_matches_forced_mrt_evaluation(self) -> None:
        cfg = baseline_config(rho=0.9)
        env = make_env(cfg, irs_enabled=False)
        direct = evaluate_fixed_policy(env, lambda e, s, r: 0, cfg.eval_episodes, cfg.seed,
                                       codebooks=_mrt_step_codebooks)
        self.assertEqual(baseline_no_irs(cfg), direct)

    def test_stationary_mrt_single_user(self) -> None:
        # K = 1、ρ = 1、無估計誤差時，MRT 對合法用戶達到 log2(1 + P‖h‖²/δ²)
        cfg = baseline_config(n_users=1, bs_directions=1, rho=1.0)
        env = make_env(cfg, irs_enabled=False)
        env.reset(np.random.default_rng(0))
        h = env.context.h_bu[0]
        bs_cb, irs_cb = _mrt_step_codebooks(env)
        outcome = env.step(0, np.random.default_rng(1), bs_cb=bs_cb, irs_cb=irs_cb)
        expected = np.log2(1 + cfg.p_max_watt * np.sum(np.abs(h) ** 2) / cfg.noise_watt)
        self.assertAlmostEqual(outcome.per_user_rate[0], expected, places=9)


class TestRandomPhaseBaseline(unittest.TestCase):

    def test_seeded_and_bounded(self) -> None:
        cfg = baseline_config()
        a = baseline_random_phase(cfg, seed=3)
        self.assertEqual(a, baseline_random_phase(cfg, seed=3))
        self.assertGreaterEqual(a.avg_secrecy_rate, 0.0)
        self.assertTrue(0.0 <= a.qos_sat_prob <= 1.0)

    def test_unknown_kind(self) -> None:
        with self.assertRaises(InvalidArgumentError):
            run_baseline_kind(baseline_config(), "sdp")
