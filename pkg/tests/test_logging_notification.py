import json
import unittest

import numpy as np
import pandas as pd

from module_logging_notification.main import format_run_summary, format_sweep_summary, log_event


class TestLogEvent(unittest.TestCase):

    def test_single_line_json(self) -> None:
        with self.assertLogs("irs_workbench.events", level="INFO") as logs:
            entry = log_event("SWEEP_CELL", {"value": np.float64(25.0), "seed": np.int64(2), "v": np.arange(2)})
        self.assertEqual(entry["event_type"], "SWEEP_CELL")
        payload = json.loads(logs.records[0].getMessage())
        self.assertEqual(payload["severity"], "INFO")
        self.assertEqual(payload["payload"], {"value": 25.0, "seed": 2, "v": [0, 1]})

    def test_level(self) -> None:
        with self.assertLogs("irs_workbench.events", level="ERROR") as logs:
            log_event("DIVERGENCE", {"episode": 3}, level="error")
        self.assertEqual(logs.records[0].levelname, "ERROR")


class TestSummaries(unittest.TestCase):

    def test_empty_run(self) -> None:
        self.assertIn("no episodes", format_run_summary(pd.DataFrame()))

    def test_run_summary(self) -> None:
        stats = pd.DataFrame({
            "episode": [0, 1], "epsilon": [0.8, 0.7], "mean_reward": [1.0, 3.0],
            "mean_secrecy_rate": [0.5, 1.5], "qos_sat_prob": [0.0, 1.0], "mean_loss": [0.1, 0.3],
        })
        text = format_run_summary(stats)
        self.assertIn("2 episodes", text)
        self.assertIn("final epsilon: 0.700", text)
        self.assertIn("last-10 mean reward: 2.0000", text)
        self.assertNotIn("validation loss", text)
        stats["val_loss"] = [0.2, 0.4]
        self.assertIn("last-10 validation loss: 0.3", format_run_summary(stats))

    def test_sweep_summary(self) -> None:
        rows = pd.DataFrame([{"approach": "dqn", "sweep_var": "rho", "value": 0.8, "seed": "mean",
                              "avg_secrecy_rate": 1.25, "qos_sat_prob": 0.5}])
        self.assertIn("rho=0.8: 1.2500", format_sweep_summary(rows))
