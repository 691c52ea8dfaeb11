import os
import tempfile
import unittest

import numpy as np

import dataset
import image
import phantom
from dataset import AugmentConfig, ManifestRecord
from dosesim import SeedSpec
from util import ValidationError

HEADER = "id,image_path,label,patient_id,split\n"


class TestManifest(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "manifest.csv")

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text):
        with open(self.path, "w") as f:
            f.write(text)

    def test_unknown_split(self):
        """
        Test that a bad split value names its line and value
        """
        self._write(HEADER + "a,a.png,0,P1,train\nb,b.png,1,P2,eval\n")
        with self.assertRaises(ValidationError) as ctx:
            dataset.load_manifest(self.path)
        self.assertIn("line 3", str(ctx.exception))
        self.assertIn("'eval'", str(ctx.exception))

    def test_bad_label(self):
        self._write(HEADER + "a,a.png,2,P1,train\n")
        with self.assertRaises(ValidationError):
            dataset.load_manifest(self.path)

    def test_missing_value(self):
        self._write(HEADER + "a,,0,P1,train\n")
        with self.assertRaises(ValidationError) as ctx:
            dataset.load_manifest(self.path)
        self.assertIn("image_path", str(ctx.exception))

    def test_duplicate_id(self):
        self._write(HEADER + "a,a.png,0,P1,train\na,b.png,1,P2,test\n")
        with self.assertRaises(ValidationError) as ctx:
            dataset.load_manifest(self.path)
        self.assertIn("line 2", str(ctx.exception))

    def test_bad_header(self):
        self._write("id,path,label,patient,split\na,a.png,0,P1,train\n")
        with self.assertRaises(ValidationError):
            dataset.load_manifest(self.path)

    def test_extra_field(self):
        self._write(HEADER + "a,a.png,0,P1,train,extra\n")
        with self.assertRaises(ValidationError):
            dataset.load_manifest(self.path)

    def test_missing_file(self):
        with self.assertRaises(OSError):
            dataset.load_manifest(os.path.join(self.tmp.name, "absent.csv"))

    def test_round_trip_large(self):
        """
        Test that 10,000 records survive a write and reload unchanged
        """
        rng = np.random.default_rng(0)
        records = [ManifestRecord(f"img{i:05d}", f"images/img{i:05d}.png", int(rng.integers(0, 2)),
                                  f"P{i // 4}", dataset.SPLITS[(i // 4) % 3])
                   for i in range(10000)]
        dataset.write_manifest(dataset.Dataset(records), self.path)
        back = dataset.load_manifest(self.path)
        self.assertEqual(back.records, records)
        self.assertEqual(back.root, self.tmp.name)

    def test_lookup(self):
        ds = dataset.Dataset([ManifestRecord("a", "a.png", 0, "P1", "train"),
                              ManifestRecord("b", "b.png", 1, "P2", "test")])
        self.assertIn("a", ds)
        self.assertNotIn("c", ds)
        self.assertEqual(ds.by_id("b").label, 1)
        self.assertEqual([r.id for r in ds.split("test")], ["b"])

    def test_load_resized(self):
        path = phantom.write_corpus(self.tmp.name, n_train=2, n_test=2, size=12)
        ds = dataset.load_manifest(path)
        img = ds.load(ds.split("test")[0], 20)
        self.assertEqual(img.shape, (20, 20))
        self.assertEqual(ds.load(ds.split("test")[0]).shape, (12, 12))


class TestSplitValidation(unittest.TestCase):

    def test_leak_reported(self):
        """
        Test a patient with slices in train and test is named with both splits
        """
        records = [ManifestRecord("a", "a.png", 0, "P7", "train"),
                   ManifestRecord("b", "b.png", 0, "P7", "test"),
                   ManifestRecord("c", "c.png", 1, "P8", "val")]
        report = dataset.validate_splits(dataset.Dataset(records))
        self.assertFalse(report.passed)
        self.assertIn("P7:{train,test}", report.to_text())
        self.assertEqual(report.to_dict()["leaks"], {"P7": ["train", "test"]})

    def test_patient_first_split_passes(self):
        rng = np.random.default_rng(1)
        records = []
        for patient in range(1000):
            split = dataset.SPLITS[int(rng.integers(0, 3))]
            for k in range(3):
                records.append(ManifestRecord(f"{patient}-{k}", "x.png", 0, f"P{patient}", split))
        report = dataset.validate_splits(dataset.Dataset(records))
        self.assertTrue(report.passed)
        self.assertTrue(report.to_text().startswith("PASS"))

    def test_slice_level_split_fails(self):
        """
        Test that splitting slices at random leaks patients
        """
        rng = np.random.default_rng(2)
        records = [ManifestRecord(f"{patient}-{k}", "x.png", 0, f"P{patient}",
                                  dataset.SPLITS[int(rng.integers(0, 3))])
                   for patient in range(1000) for k in range(3)]
        report = dataset.validate_splits(dataset.Dataset(records))
        self.assertFalse(report.passed)
        self.assertGreater(len(report.leaks), 500)


class TestAugment(unittest.TestCase):

    def test_config_validation(self):
        for kwargs in ({"rotate_deg_max": -1.0}, {"flip_h_prob": 1.5}, {"translate_frac_max": 1.0}):
            with self.assertRaises(ValidationError):
                AugmentConfig(**kwargs)

    def test_null_augment_is_identity(self):
        img = phantom.head_phantom(32)
        cfg = AugmentConfig(0.0, 0.0, 0.0, 0.0)
        for s in range(5):
            self.assertEqual(dataset.augment(img, cfg, SeedSpec(s, 3)), img)

    def test_double_flip(self):
        img = phantom.head_phantom(24)
        once = dataset.apply_augmentation(img, flip_h=True, flip_v=True)
        self.assertNotEqual(once, img)
        self.assertEqual(dataset.apply_augmentation(once, flip_h=True, flip_v=True), img)

    def test_rotate_back(self):
        """
        Test rotating by an angle then its negative nearly restores a blob
        """
        img = phantom.blob(64)
        turned = dataset.apply_augmentation(img, angle_deg=12.0)
        back = dataset.apply_augmentation(turned, angle_deg=-12.0)
        self.assertLess(np.mean(np.abs(back.pixels - img.pixels)), 0.02)
        self.assertGreater(np.mean(np.abs(turned.pixels - img.pixels)), 0.001)

    def test_augment_deterministic(self):
        img = phantom.head_phantom(32)
        cfg = AugmentConfig()
        a = dataset.augment(img, cfg, SeedSpec(4, 9))
        self.assertEqual(a, dataset.augment(img, cfg, SeedSpec(4, 9)))
        self.assertGreaterEqual(a.pixels.min(), 0.0)
        self.assertLessEqual(a.pixels.max(), 1.0)

    def test_config_seed_used_without_item_seed(self):
        img = phantom.head_phantom(32)
        cfg = AugmentConfig(seed=SeedSpec(4, 9))
        self.assertEqual(dataset.augment(img, cfg), dataset.augment(img, AugmentConfig(), SeedSpec(4, 9)))
        self.assertEqual(dataset.augment(img, cfg, SeedSpec(1)), dataset.augment(img, AugmentConfig(), SeedSpec(1)))

    def test_constant_stays_constant(self):
        img = image.constant(0.3, 16, 16)
        out = dataset.augment(img, AugmentConfig(), SeedSpec(2))
        self.assertTrue(np.allclose(out.pixels, 0.3, atol=1e-12))


if __name__ == '__main__':
    unittest.main(buffer=True)
