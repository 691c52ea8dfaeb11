import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

import baseline
import clfmetrics
import dataset
import image
import phantom
from artifacts import Severity
from baseline import DenoiserSpec, TrainConfig
from dosesim import DoseLevel, SeedSpec
from util import TrainingDivergedError, ValidationError


def random_problem(rng, n=60, d=3, prevalence=0.5):
    X = rng.standard_normal((n, d))
    y = (rng.random(n) < prevalence).astype(int)
    return X, y


class TestDenoise(unittest.TestCase):

    def test_identity(self):
        img = phantom.head_phantom(16)
        self.assertIs(baseline.denoise(img, DenoiserSpec("identity")), img)

    def test_gaussian_constant(self):
        img = image.constant(0.4, 20, 20)
        out = baseline.denoise(img, DenoiserSpec("gaussian", sigma=2.0))
        self.assertTrue(np.allclose(out.pixels, 0.4, atol=1e-12))

    def test_nlm_reduces_noise(self):
        """
        Test non-local means brings a noisy phantom closer to the clean one
        """
        clean = phantom.head_phantom(48)
        rng = np.random.default_rng(0)
        noisy = image.clip01(clean.pixels + 0.05 * rng.standard_normal(clean.shape))
        out = baseline.denoise(noisy, DenoiserSpec("nlm", patch=5, window=13, h=0.05))
        before = np.mean((noisy.pixels - clean.pixels) ** 2)
        after = np.mean((out.pixels - clean.pixels) ** 2)
        self.assertLess(after, before)

    def test_nlm_window_too_large(self):
        with self.assertRaises(ValidationError):
            baseline.denoise(image.constant(0.5, 8, 8), DenoiserSpec("nlm", window=13))

    def test_spec_validation(self):
        for kwargs in ({"kind": "median"}, {"kind": "gaussian", "sigma": 0.0},
                       {"kind": "nlm", "patch": 4}, {"kind": "nlm", "patch": 15, "window": 13},
                       {"kind": "nlm", "h": 0.0}):
            with self.assertRaises(ValidationError):
                DenoiserSpec(**kwargs)


class TestFeatures(unittest.TestCase):

    def test_layout(self):
        """
        Test the feature vector holds a normalized histogram and summaries
        """
        img = phantom.head_phantom(32)
        feats = baseline.extract_features(img)
        self.assertEqual(feats.shape, (baseline.N_FEATURES,))
        self.assertEqual(baseline.N_FEATURES, 37)
        self.assertAlmostEqual(feats[:baseline.HIST_BINS].sum(), 1.0, places=12)
        self.assertAlmostEqual(feats[baseline.HIST_BINS], img.pixels.mean(), places=12)

    def test_constant_image(self):
        feats = baseline.extract_features(image.constant(1.0, 4, 4))
        self.assertEqual(feats[baseline.HIST_BINS - 1], 1.0)
        self.assertEqual(feats[baseline.HIST_BINS + 1], 0.0)


class TestLogReg(unittest.TestCase):

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        X, y = random_problem(rng, 20, 5)
        w = 0.3 * rng.standard_normal(5)
        b = 0.2
        _, grad_w, grad_b = baseline.logreg_loss_and_grad(w, b, X, y, 0.1)
        eps = 1e-6
        numeric = np.zeros(5)
        for k in range(5):
            step = np.zeros(5)
            step[k] = eps
            plus, _, _ = baseline.logreg_loss_and_grad(w + step, b, X, y, 0.1)
            minus, _, _ = baseline.logreg_loss_and_grad(w - step, b, X, y, 0.1)
            numeric[k] = (plus - minus) / (2 * eps)
        self.assertLess(np.linalg.norm(numeric - grad_w) / np.linalg.norm(grad_w), 1e-5)
        plus, _, _ = baseline.logreg_loss_and_grad(w, b + eps, X, y, 0.1)
        minus, _, _ = baseline.logreg_loss_and_grad(w, b - eps, X, y, 0.1)
        self.assertLess(abs((plus - minus) / (2 * eps) - grad_b), 1e-6)

    def test_sigmoid_extremes(self):
        out = baseline.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        self.assertEqual(out.tolist(), [0.0, 0.5, 1.0])

    def test_loss_decreases(self):
        """
        Test full-batch training never increases the loss
        """
        rng = np.random.default_rng(2)
        X, y = random_problem(rng)
        model = baseline.train_logreg(list(zip(X, y)), TrainConfig(learning_rate=0.1, epochs=200))
        self.assertEqual(len(model.loss_history), 200)
        for before, after in zip(model.loss_history, model.loss_history[1:]):
            self.assertLessEqual(after, before + 1e-12)

    def test_separable(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((80, 2))
        y = (X[:, 0] > 0).astype(int)
        X[:, 0] += np.where(y == 1, 0.5, -0.5)
        model = baseline.train_logreg(list(zip(X, y)), TrainConfig(epochs=300))
        preds = [clfmetrics.Prediction(str(i), baseline.predict_logreg(model, x), int(label))
                 for i, (x, label) in enumerate(zip(X, y))]
        self.assertGreater(clfmetrics.roc_auc(preds), 0.99)

    def test_strong_penalty_predicts_prevalence(self):
        """
        Test a heavy L2 penalty pulls predictions to the training prevalence
        """
        rng = np.random.default_rng(4)
        X, y = random_problem(rng, 200, 3, prevalence=0.3)
        model = baseline.train_logreg(list(zip(X, y)), TrainConfig(epochs=500, l2=5.0))
        prevalence = y.mean()
        for x in X:
            self.assertLess(abs(baseline.predict_logreg(model, x) - prevalence), 0.1)

    def test_divergence(self):
        rng = np.random.default_rng(5)
        X, y = random_problem(rng)
        with np.errstate(all="ignore"):
            with self.assertRaises(TrainingDivergedError):
                baseline.train_logreg(list(zip(X, y)), TrainConfig(learning_rate=1e308, epochs=10))

    def test_single_class(self):
        with self.assertRaises(ValidationError):
            baseline.train_logreg([(np.ones(2), 1), (np.zeros(2), 1)])

    def test_minibatch_deterministic(self):
        rng = np.random.default_rng(6)
        X, y = random_problem(rng)
        config = TrainConfig(epochs=20, batch_size=16, seed=3)
        a = baseline.train_logreg(list(zip(X, y)), config)
        b = baseline.train_logreg(list(zip(X, y)), config)
        self.assertTrue(np.array_equal(a.weights, b.weights))
        self.assertEqual(a.bias, b.bias)


class TestModelFile(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        rng = np.random.default_rng(7)
        X = rng.random((30, baseline.N_FEATURES))
        y = np.arange(30) % 2
        self.model = baseline.train_logreg(list(zip(X, y)), TrainConfig(epochs=5))
        self.path = os.path.join(self.tmp.name, "m", "model.json")

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        baseline.save_model(self.model, self.path)
        back = baseline.load_model(self.path)
        self.assertTrue(np.array_equal(back.weights, self.model.weights))
        self.assertEqual(back.bias, self.model.bias)
        self.assertEqual(back.train_meta, self.model.train_meta)

    def test_schema_mismatch(self):
        baseline.save_model(self.model, self.path)
        with open(self.path) as f:
            doc = json.load(f)
        doc["feature_schema"] = "0" * 40
        with open(self.path, "w") as f:
            json.dump(doc, f)
        with self.assertRaises(ValidationError):
            baseline.load_model(self.path)

    def test_version_mismatch(self):
        baseline.save_model(self.model, self.path)
        with open(self.path) as f:
            doc = json.load(f)
        doc["format_version"] = 99
        with open(self.path, "w") as f:
            json.dump(doc, f)
        with self.assertRaises(ValidationError):
            baseline.load_model(self.path)


class TestRunBaseline(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _dataset(self, **kwargs):
        return dataset.load_manifest(phantom.write_corpus(self.tmp.name, **kwargs))

    def test_separable_corpus(self):
        ds = self._dataset()
        run = baseline.run_baseline(ds, DoseLevel(40.0), DenoiserSpec("identity"), TrainConfig(epochs=200),
                                    seed=7, image_size=16)
        self.assertEqual(len(run.predictions), 20)
        self.assertGreater(clfmetrics.roc_auc(run.predictions), 0.95)
        self.assertEqual(len(run.iq_corrupted), 20)

    def test_degenerate_classifier(self):
        """
        Test uninformative images with 77% negatives give an all-negative classifier
        """
        ds = self._dataset(separable=False, neg_fraction=0.772)
        run = baseline.run_baseline(ds, DoseLevel(1.0), DenoiserSpec("identity"),
                                    TrainConfig(epochs=300, l2=1.0), seed=7, image_size=16)
        metrics = clfmetrics.threshold_metrics(clfmetrics.confusion(run.predictions))
        self.assertEqual(metrics["sensitivity"], 0.0)
        self.assertEqual(metrics["specificity"], 1.0)

    def test_deterministic(self):
        ds = self._dataset(n_train=10, n_test=6)
        args = (ds, Severity(3), DenoiserSpec("gaussian", sigma=1.0), TrainConfig(epochs=20))
        a = baseline.run_baseline(*args, seed=17, image_size=16)
        b = baseline.run_baseline(*args, seed=17, image_size=16)
        self.assertEqual(a.predictions, b.predictions)

    def test_augment_only_on_train(self):
        """
        Test augmentation runs once per training slice and never on test slices
        """
        ds = self._dataset(n_train=10, n_test=6)
        with patch("dataset.augment", wraps=dataset.augment) as spy:
            baseline.run_baseline(ds, None, DenoiserSpec("identity"), TrainConfig(epochs=5), seed=1,
                                  image_size=16, augment_config=dataset.AugmentConfig())
        self.assertEqual(spy.call_count, len(ds.split("train")))
        self.assertEqual({c.args[2] for c in spy.call_args_list},
                         {SeedSpec(1).for_item(r.id) for r in ds.split("train")})

    def test_no_test_split(self):
        ds = self._dataset(n_train=4, n_test=0)
        with self.assertRaises(ValidationError):
            baseline.run_baseline(ds, None, DenoiserSpec("identity"), image_size=16)


if __name__ == '__main__':
    unittest.main(buffer=True)
