import os
import tempfile
import unittest

import numpy as np
import numpy.testing as npt
import pandas as pd

from common.exceptions import InvalidArgumentError
from module_config_init.main import extract_echoed_config
from module_experiment_cli.main import (
    EXIT_BAD_INPUT, EXIT_OK, SWEEP_COLUMNS, load_config, main, parse_sweep_spec, run_sweep, run_train,
)

TINY_CONFIG = """\
# small enough to finish in a few seconds
episodes = 3
horizon = 4
warmup_steps = 10
hidden_sizes = 8
batch_size = 4
buffer_capacity = 100
eval_episodes = 1
irs_codebook_size = 2
bs_power_levels = 1
"""


def read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


class CliTestCase(unittest.TestCase):

    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name
        self.config = self.path("tiny.cfg")
        with open(self.config, "w", encoding="utf-8") as fh:
            fh.write(TINY_CONFIG)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp, name)


class TestTrainCommand(CliTestCase):

    def test_learning_curve_csv(self) -> None:
        out = self.path("train.csv")
        self.assertEqual(main(["train", self.config, "--out", out]), EXIT_OK)
        df = pd.read_csv(out, comment="#")
        self.assertEqual(list(df.columns),
                         ["episode", "epsilon", "mean_reward", "mean_secrecy_rate", "qos_sat_prob", "mean_loss",
                          "val_loss"])
        self.assertEqual(len(df), 3)
        text = read_text(out)
        self.assertIn("# noise_watt = 1e-12\n", text)
        self.assertIn("# p_max_watt = 1\n", text)
        self.assertIn("# seed = 0\n", text)

    def test_byte_identical_reruns(self) -> None:
        first, second = self.path("a.csv"), self.path("b.csv")
        self.assertEqual(main(["train", self.config, "--seed", "5", "--out", first]), EXIT_OK)
        self.assertEqual(main(["train", self.config, "--seed", "5", "--out", second]), EXIT_OK)
        self.assertEqual(read_text(first), read_text(second))

    def test_rerun_from_echoed_config(self) -> None:
        first, second = self.path("a.csv"), self.path("b.csv")
        run_train(load_config(self.config, seed=2), first)
        run_train(extract_echoed_config(first), second)
        self.assertEqual(read_text(first), read_text(second))

    def test_bad_config_exit_code(self) -> None:
        bad = self.path("bad.cfg")
        with open(bad, "w", encoding="utf-8") as fh:
            fh.write("p_max_dbm = thirty\n")
        self.assertEqual(main(["train", bad, "--out", self.path("x.csv")]), EXIT_BAD_INPUT)
        self.assertFalse(os.path.exists(self.path("x.csv")))

    def test_checkpoint_then_eval(self) -> None:
        ckpt = self.path("net.txt")
        self.assertEqual(main(["train", self.config, "--out", self.path("t.csv"), "--checkpoint", ckpt]), EXIT_OK)
        out = self.path("eval.csv")
        self.assertEqual(main(["eval", self.config, ckpt, "--out", out]), EXIT_OK)
        df = pd.read_csv(out, comment="#")
        self.assertEqual(len(df), 1)
        self.assertEqual(df["approach"][0], "pds_per")
        self.assertTrue(0.0 <= df["qos_sat_prob"][0] <= 1.0)

    def test_eval_rejects_mismatched_checkpoint(self) -> None:
        ckpt = self.path("net.txt")
        main(["train", self.config, "--out", self.path("t.csv"), "--checkpoint", ckpt])
        other = self.path("other.cfg")
        with open(other, "w", encoding="utf-8") as fh:
            fh.write(TINY_CONFIG + "irs_elements = 12\n")
        self.assertEqual(main(["eval", other, ckpt, "--out", self.path("e.csv")]), EXIT_BAD_INPUT)


class TestSweepCommand(CliTestCase):

    def test_rows_and_aggregates(self) -> None:
        out = self.path("sweep.csv")
        self.assertEqual(main(["sweep", self.config, "--var", "p_max_dbm", "--values", "20,30",
                               "--seeds", "0", "--out", out, "--jobs", "1"]), EXIT_OK)
        df = pd.read_csv(out, comment="#", dtype={"seed": str})
        self.assertEqual(list(df.columns), SWEEP_COLUMNS)
        per_seed = df[~df["seed"].isin(["mean", "std"])]
        self.assertEqual(len(per_seed), 8)
        self.assertEqual(sorted(set(per_seed["approach"])), ["dqn", "no_irs", "pds_per", "random_phase"])
        self.assertEqual(len(df) - len(per_seed), 4 * 2 * 2)
        std_rows = df[df["seed"] == "std"]
        npt.assert_array_equal(std_rows["avg_secrecy_rate"], 0.0)

    def test_aggregates_match_recomputation(self) -> None:
        cfg = load_config(self.config)
        spec = parse_sweep_spec("rho", "0.6,1.0", "0,1")
        df = run_sweep(cfg, spec, self.path("s.csv"), n_jobs=1, approaches=("random_phase", "no_irs"))
        per_seed = df[~df["seed"].isin(["mean", "std"])]
        for (approach, value), group in per_seed.groupby(["approach", "value"]):
            mean_row = df[(df["approach"] == approach) & (df["value"] == value) & (df["seed"] == "mean")]
            std_row = df[(df["approach"] == approach) & (df["value"] == value) & (df["seed"] == "std")]
            self.assertAlmostEqual(mean_row["avg_secrecy_rate"].iloc[0], group["avg_secrecy_rate"].mean())
            self.assertAlmostEqual(std_row["qos_sat_prob"].iloc[0], np.std(group["qos_sat_prob"], ddof=0))

    def test_sweep_is_deterministic(self) -> None:
        cfg = load_config(self.config)
        spec = parse_sweep_spec("irs_elements", "4,6", "3")
        a = run_sweep(cfg, spec, self.path("a.csv"), n_jobs=1, approaches=("random_phase",))
        b = run_sweep(cfg, spec, self.path("b.csv"), n_jobs=1, approaches=("random_phase",))
        pd.testing.assert_frame_equal(a, b)
        self.assertEqual(read_text(self.path("a.csv")), read_text(self.path("b.csv")))

    def test_sweep_spec_validation(self) -> None:
        with self.assertRaises(InvalidArgumentError):
            parse_sweep_spec("p_max_dbm", "30", "0")
        with self.assertRaises(InvalidArgumentError):
            parse_sweep_spec("n_users", "1,2", "0")
        with self.assertRaises(InvalidArgumentError):
            parse_sweep_spec("rho", "0.5,0.9", "")
        self.assertEqual(parse_sweep_spec("irs_elements", "10,20", "1,2").values, (10, 20))


class TestOtherCommands(CliTestCase):

    def test_baseline(self) -> None:
        out = self.path("b.csv")
        self.assertEqual(main(["baseline", self.config, "--kind", "no_irs", "--out", out]), EXIT_OK)
        df = pd.read_csv(out, comment="#")
        self.assertEqual(df["approach"][0], "no_irs")

    def test_lr_curves(self) -> None:
        out = self.path("lr.csv")
        self.assertEqual(main(["lr-curves", self.config, "--rates", "0.01,0.001", "--out", out, "--jobs", "1"]),
                         EXIT_OK)
        df = pd.read_csv(out, comment="#")
        self.assertEqual(len(df), 6)
        self.assertEqual(sorted(set(df["learning_rate"])), [0.001, 0.01])

    def test_defaults(self) -> None:
        self.assertEqual(main(["defaults"]), EXIT_OK)
