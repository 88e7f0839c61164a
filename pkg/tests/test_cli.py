import json
import os
import shutil
import tempfile

import pandas as pd
import pytest
import torch
from torchtestcase import TorchTestCase

from paramrom.archive import load_model
from paramrom.cli import (
    COSTS_NAME,
    ERRORS_NAME,
    INDEX_NAME,
    MODEL_NAME,
    SPECTRUM_NAME,
    SWEEP_NAME,
    TIMING_NAME,
    TRAINING_ERRORS_NAME,
    main,
    parse_grid,
    parse_vector,
)
from paramrom.exceptions import ConfigError
from paramrom.snapshots import MANIFEST_NAME, STATES_NAME, load_snapshot_set

torch.set_default_dtype(torch.float64)

SMALL_FOM = ["--n-x", "24", "--K", "21"]


def run(*args) -> int:
    return main([str(a) for a in args])


class TestParsing(TorchTestCase):
    def test_vectors(self):
        self.assertEqual(parse_vector("0.5,1.25"), (0.5, 1.25))
        self.assertEqual(parse_vector([1, 2]), (1.0, 2.0))
        self.assertEqual(parse_grid("5X3"), (5, 3))
        with self.assertRaises(ConfigError):
            parse_vector("a,b")
        with self.assertRaises(ConfigError):
            parse_grid("5")
        with self.assertRaises(ConfigError):
            parse_grid("0x2")


class TestPipeline(TorchTestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.mkdtemp()
        cls.data = os.path.join(cls.tmp, "data")
        cls.train = os.path.join(cls.tmp, "train")
        cls.pred = os.path.join(cls.tmp, "pred")
        cls.evaluation = os.path.join(cls.tmp, "eval")
        cls.codes = [
            run("generate", "--grid", "3x3", *SMALL_FOM, "--out", cls.data),
            run(
                "train",
                "--data", cls.data,
                "--subgrid", "2x2",
                "--rank", 4,
                "--grid-points", 3,
                "--out", cls.train,
            ),
            run(
                "predict",
                "--model", os.path.join(cls.train, MODEL_NAME),
                "--mu-from", cls.data,
                "--out", cls.pred,
            ),
            run(
                "evaluate",
                "--predictions", cls.pred,
                "--truth", cls.data,
                "--model", os.path.join(cls.train, MODEL_NAME),
                "--spectrum",
                "--out", cls.evaluation,
            ),
            run(
                "report",
                "--data", cls.data,
                "--model", os.path.join(cls.train, MODEL_NAME),
                "--predictions", cls.pred,
                "--out", cls.evaluation,
            ),
        ]

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp)

    def test_exit_codes(self):
        self.assertEqual(self.codes, [0, 0, 0, 0, 0])

    def test_generated_grid(self):
        index = pd.read_csv(os.path.join(self.data, INDEX_NAME))
        self.assertEqual(len(index), 9)
        self.assertEqual(list(index.columns[:2]), ["mu_q", "mu_p"])
        self.assertEqual(sorted(set(index.mu_q)), [0.5, 1.0, 1.5])
        sset = load_snapshot_set(os.path.join(self.data, index.directory[0]))
        self.assertEqual(tuple(sset.states.shape), (48, 21))

    def test_training_outputs(self):
        for name in (SPECTRUM_NAME, SWEEP_NAME, MODEL_NAME, TRAINING_ERRORS_NAME):
            self.assertTrue(os.path.isfile(os.path.join(self.train, name)), name)
        sweep = pd.read_csv(os.path.join(self.train, SWEEP_NAME))
        self.assertEqual(len(sweep), 27)
        rom = load_model(os.path.join(self.train, MODEL_NAME))
        self.assertEqual(rom.d, 4)
        self.assertEqual(rom.r, 4)
        self.assertEqual(rom.metadata["K"], 21)
        chosen = tuple(rom.metadata["regularization"])
        best = sweep.loc[sweep.average_error.idxmin()]
        self.assertEqual(chosen, (best.lambda1, best.lambda2, best.lambda3))

    def test_predictions(self):
        timing = pd.read_csv(os.path.join(self.pred, TIMING_NAME))
        self.assertEqual(len(timing), 9)
        self.assertTrue((timing.online_seconds > 0).all())
        dirs = [d for d in os.listdir(self.pred) if os.path.isdir(os.path.join(self.pred, d))]
        self.assertEqual(len(dirs), 9)
        sset = load_snapshot_set(os.path.join(self.pred, dirs[0]))
        self.assertEqual(tuple(sset.states.shape), (48, 21))

    def test_evaluation(self):
        errors = pd.read_csv(os.path.join(self.evaluation, ERRORS_NAME))
        self.assertEqual(len(errors), 9)
        self.assertEqual((errors.role == "train").sum(), 4)
        self.assertEqual((errors.role == "test").sum(), 5)
        self.assertTrue((errors.projection_error >= 0).all())
        self.assertTrue(os.path.isfile(os.path.join(self.evaluation, SPECTRUM_NAME)))

    def test_training_closure(self):
        errors = pd.read_csv(os.path.join(self.evaluation, ERRORS_NAME))
        training = pd.read_csv(os.path.join(self.train, TRAINING_ERRORS_NAME))
        for _, row in training.iterrows():
            hit = errors[(errors.mu_q - row.mu_q).abs().lt(1e-9) & (errors.mu_p - row.mu_p).abs().lt(1e-9)]
            self.assertEqual(len(hit), 1)
            self.assertLessEqual(hit.average_error.iloc[0], row.average_error + 1e-6)

    def test_costs(self):
        costs = pd.read_csv(os.path.join(self.evaluation, COSTS_NAME))
        self.assertEqual(
            list(costs.columns),
            ["fom_seconds", "offline_seconds", "online_seconds", "speedup", "breakeven_runs"],
        )
        self.assertGreater(costs.speedup[0], 0)

    def test_sweep_singleton(self):
        out = os.path.join(self.tmp, "sweep")
        grid = json.dumps({"grid1": [1e-3], "grid2": [1e2], "grid3": [1e-3]})
        code = run(
            "sweep", "--data", self.data, "--subgrid", "2x2", "--rank", 4,
            "--lambda-grid", grid, "--out", out,
        )
        self.assertEqual(code, 0)
        self.assertEqual(len(pd.read_csv(os.path.join(out, SWEEP_NAME))), 1)

    def test_out_of_hull(self):
        code = run(
            "predict", "--model", os.path.join(self.train, MODEL_NAME),
            "--mu", "2.0,2.0", "--out", os.path.join(self.tmp, "hull"),
        )
        self.assertEqual(code, 2)
        self.assertFalse(os.path.isdir(os.path.join(self.tmp, "hull")))

    def test_missing_model(self):
        code = run(
            "predict", "--model", os.path.join(self.tmp, "absent.h5"),
            "--mu", "1.0,1.0", "--out", os.path.join(self.tmp, "absent"),
        )
        self.assertEqual(code, 4)

    def test_paths_from_config_file(self):
        config = os.path.join(self.tmp, "train.json")
        model = os.path.join(self.tmp, "from_config")
        with open(config, "w") as f:
            json.dump(
                {"data": [self.data], "subgrid": "2x2", "rank": 4, "lambdas": [1e-3, 1e2, 1e-3]},
                f,
            )
        self.assertEqual(run("train", "--config", config, "--out", model), 0)
        self.assertTrue(os.path.isfile(os.path.join(model, MODEL_NAME)))

        config = os.path.join(self.tmp, "predict.json")
        with open(config, "w") as f:
            json.dump({"model": os.path.join(model, MODEL_NAME), "mu": ["1.0,1.0"]}, f)
        out = os.path.join(self.tmp, "config_pred")
        self.assertEqual(run("predict", "--config", config, "--out", out), 0)
        self.assertEqual(len(pd.read_csv(os.path.join(out, TIMING_NAME))), 1)

    def test_missing_paths(self):
        self.assertEqual(run("train", "--rank", 4, "--out", os.path.join(self.tmp, "none")), 2)
        self.assertEqual(run("predict", "--mu", "1.0,1.0", "--out", self.tmp), 2)
        self.assertEqual(run("evaluate", "--predictions", self.pred, "--out", self.tmp), 2)

    def test_conflicting_options(self):
        code = run(
            "train", "--data", self.data, "--rank", 4, "--energy", 0.999,
            "--out", os.path.join(self.tmp, "conflict"),
        )
        self.assertEqual(code, 2)


class TestGenerateCommand(TorchTestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_deterministic(self):
        payloads = []
        for name in ("a", "b"):
            out = os.path.join(self.tmp, name)
            self.assertEqual(run("generate", "--grid", "1x2", *SMALL_FOM, "--out", out), 0)
            index = pd.read_csv(os.path.join(out, INDEX_NAME))
            with open(os.path.join(out, index.directory[1], STATES_NAME), "rb") as f:
                payloads.append(f.read())
        self.assertEqual(payloads[0], payloads[1])

    def test_collinear_training(self):
        data = os.path.join(self.tmp, "line")
        self.assertEqual(run("generate", "--grid", "1x2", *SMALL_FOM, "--out", data), 0)
        code = run("train", "--data", data, "--rank", 2, "--out", os.path.join(self.tmp, "m"))
        self.assertEqual(code, 2)

    def test_config_file(self):
        config = os.path.join(self.tmp, "config.json")
        with open(config, "w") as f:
            json.dump({"n_x": 20, "K": 5, "grid": "1x1"}, f)
        out = os.path.join(self.tmp, "cfg")
        self.assertEqual(run("generate", "--config", config, "--out", out), 0)
        index = pd.read_csv(os.path.join(out, INDEX_NAME))
        self.assertEqual(len(index), 1)
        sset = load_snapshot_set(os.path.join(out, index.directory[0], MANIFEST_NAME))
        self.assertEqual(tuple(sset.states.shape), (40, 5))

    def test_unknown_config_key(self):
        config = os.path.join(self.tmp, "bad.json")
        with open(config, "w") as f:
            json.dump({"n_x": 20, "resolution": 3}, f)
        self.assertEqual(run("generate", "--config", config, "--out", self.tmp), 2)


@pytest.mark.slow
class TestEndToEnd(TorchTestCase):
    """5x5 synthetic grid, 3x3 training sub-grid, full lambda sweep"""

    def test_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            data, model, pred, out = (os.path.join(tmp, d) for d in ("data", "m", "p", "e"))
            self.assertEqual(run("generate", "--grid", "5x5", "--workers", 4, "--out", data), 0)
            self.assertEqual(run("train", "--data", data, "--subgrid", "3x3", "--out", model), 0)
            path = os.path.join(model, MODEL_NAME)
            self.assertEqual(run("predict", "--model", path, "--mu-from", data, "--out", pred), 0)
            self.assertEqual(
                run("evaluate", "--predictions", pred, "--truth", data, "--model", path, "--out", out),
                0,
            )
            errors = pd.read_csv(os.path.join(out, ERRORS_NAME))
        self.assertEqual(len(errors), 25)
        self.assertEqual((errors.role == "train").sum(), 9)
        self.assertLessEqual(errors.average_error.max(), 0.10)
        self.assertLessEqual(errors.projection_error.max(), 0.01)
