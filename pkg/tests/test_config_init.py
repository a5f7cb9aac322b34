import os
import tempfile
import unittest

from common.exceptions import ConfigError
from common.utils import dbm_to_watt, watt_to_dbm
from module_config_init.main import (
    ExperimentConfig, coerce_value, extract_echoed_config, parse_config, parse_config_text, render_default_table,
)


class TestUnits(unittest.TestCase):

    def test_dbm_to_watt(self) -> None:
        self.assertAlmostEqual(dbm_to_watt(-90), 1e-12, delta=1e-24)
        self.assertEqual(dbm_to_watt(30), 1.0)
        self.assertAlmostEqual(watt_to_dbm(1e-3), 0.0, places=12)


class TestParsing(unittest.TestCase):

    def test_empty_file_gives_defaults(self) -> None:
        self.assertEqual(parse_config_text(""), ExperimentConfig())

    def test_float_value(self) -> None:
        cfg = parse_config_text("p_max_dbm = 30")
        self.assertIsInstance(cfg.p_max_dbm, float)
        self.assertEqual(cfg.p_max_dbm, 30.0)

    def test_type_error_names_key(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("p_max_dbm = thirty")
        self.assertEqual(ctx.exception.key, "p_max_dbm")
        self.assertIn("p_max_dbm", str(ctx.exception))

    def test_unknown_and_duplicate_keys(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("n_antenna = 4")
        self.assertEqual(ctx.exception.key, "n_antenna")
        with self.assertRaises(ConfigError):
            parse_config_text("seed = 1\nseed = 2")

    def test_comments_and_special_values(self) -> None:
        cfg = parse_config_text(
            "# desk-scale run\n"
            "irs_elements = 20   # L\n"
            "rho = auto\n"
            "use_pds = false\n"
            "hidden_sizes = 64,32\n"
            "mu_positions = 110:20;150:50\n"
        )
        self.assertEqual(cfg.irs_elements, 20)
        self.assertIsNone(cfg.rho)
        self.assertFalse(cfg.use_pds)
        self.assertEqual(cfg.hidden_sizes, (64, 32))
        self.assertEqual(cfg.mu_positions, ((110.0, 20.0), (150.0, 50.0)))

    def test_invalid_values(self) -> None:
        for text, key in (("n_users = 0", "n_users"), ("rho = 1.5", "rho"), ("optimizer = adam", "optimizer"),
                          ("n_users = 5", "bs_directions"), ("gamma = 0", "gamma")):
            with self.assertRaises(ConfigError) as ctx:
                parse_config_text(text)
            self.assertEqual(ctx.exception.key, key, text)

    def test_items_round_trip(self) -> None:
        cfg = ExperimentConfig().with_overrides(rho=None, irs_elements=30, eve_positions=((120.0, 40.0), (130.0, 60.0)),
                                                 learning_rate=0.01, use_per=False)
        text = "\n".join(f"{k} = {v}" for k, v in cfg.to_items())
        self.assertEqual(parse_config_text(text), cfg)

    def test_positions_round_trip_at_full_precision(self) -> None:
        cfg = ExperimentConfig().with_overrides(mu_positions=((123.4567, 20.0), (150.123456789, 50.5)))
        text = "\n".join(f"{k} = {v}" for k, v in cfg.to_items())
        self.assertEqual(parse_config_text(text).mu_positions, ((123.4567, 20.0), (150.123456789, 50.5)))

    def test_with_overrides_validates(self) -> None:
        with self.assertRaises(ConfigError):
            ExperimentConfig().with_overrides(p_max=3.0)
        with self.assertRaises(ConfigError):
            ExperimentConfig().with_overrides(learning_rate=-1.0)

    def test_coerce_value(self) -> None:
        self.assertEqual(coerce_value("irs_elements", "40"), 40)
        self.assertEqual(coerce_value("rho", "0.6"), 0.6)
        with self.assertRaises(ConfigError):
            coerce_value("irs_elements", "4.5")


class TestFiles(unittest.TestCase):

    def test_parse_config_file(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.cfg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("episodes = 3\nseed = 4\n")
            cfg = parse_config(path)
        self.assertEqual((cfg.episodes, cfg.seed), (3, 4))

    def test_missing_file(self) -> None:
        with self.assertRaises(ConfigError):
            parse_config("/nonexistent/run.cfg")

    def test_extract_echoed_config(self) -> None:
        cfg = ExperimentConfig().with_overrides(seed=9, p_max_dbm=25.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "out.csv")
            with open(path, "w", encoding="utf-8") as fh:
                for key, value in cfg.to_items():
                    fh.write(f"# {key} = {value}\n")
                fh.write("# noise_watt = 1e-12\n")
                fh.write("episode,epsilon\n0,0.8\n")
            self.assertEqual(extract_echoed_config(path), cfg)

    def test_default_table(self) -> None:
        table = render_default_table()
        self.assertIn("p_max_dbm = 30.0", table)
        self.assertIn("rho = 0.95", table)
        self.assertIn("hidden_sizes = 128,128", table)
