"""
長時間的趨勢檢查：每個方案在多個種子下以預設設定訓練再評估，只在 IRS_RUN_SLOW=1 時執行。
"""
import os
import unittest

import numpy as np

from module_config_init.main import ExperimentConfig
from module_experiment_cli.main import run_sweep_cell

RUN_SLOW = os.getenv("IRS_RUN_SLOW", "0") == "1"
TREND_SEEDS = (0, 1, 2)
COMPARISON_SEEDS = (0, 1, 2, 3, 4)


def mean_rate(cfg, variable, value, approach, seeds=TREND_SEEDS):
    rows = [run_sweep_cell(cfg, variable, value, seed, approach) for seed in seeds]
    return float(np.mean([row["avg_secrecy_rate"] for row in rows]))


@unittest.skipUnless(RUN_SLOW, "set IRS_RUN_SLOW=1 to run the training trend checks")
class TestTrends(unittest.TestCase):

    def setUp(self) -> None:
        self.cfg = ExperimentConfig()

    def test_secrecy_rate_grows_with_power(self) -> None:
        rates = [mean_rate(self.cfg, "p_max_dbm", p, "pds_per") for p in (15.0, 25.0, 35.0)]
        self.assertLess(rates[0], rates[1])
        self.assertLess(rates[1], rates[2])

    def test_secrecy_rate_grows_with_irs_size(self) -> None:
        sizes = (10, 20, 40)
        rates = [mean_rate(self.cfg, "irs_elements", n, "pds_per") for n in sizes]
        self.assertLess(rates[0], rates[1])
        self.assertLess(rates[1], rates[2])
        no_irs = [mean_rate(self.cfg, "irs_elements", n, "no_irs") for n in sizes]
        self.assertEqual(no_irs[0], no_irs[1])
        self.assertEqual(no_irs[1], no_irs[2])

    def test_secrecy_rate_grows_with_channel_correlation(self) -> None:
        rates = [mean_rate(self.cfg, "rho", rho, "pds_per") for rho in (0.6, 0.8, 0.95)]
        self.assertLessEqual(rates[0], rates[1])
        self.assertLessEqual(rates[1], rates[2])

    def test_approach_ordering(self) -> None:
        p = self.cfg.p_max_dbm
        means = {approach: mean_rate(self.cfg, "p_max_dbm", p, approach, COMPARISON_SEEDS)
                 for approach in ("pds_per", "dqn", "random_phase", "no_irs")}
        self.assertGreaterEqual(means["pds_per"], means["dqn"])
        self.assertGreaterEqual(means["dqn"], means["random_phase"])
        for approach in ("pds_per", "dqn", "random_phase"):
            self.assertGreaterEqual(means[approach], means["no_irs"], approach)
