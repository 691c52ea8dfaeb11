import unittest

import bench
import config


class TestBench(unittest.TestCase):

    def test_bench_image(self):
        img = bench.bench_image(64)
        self.assertEqual(img.shape, (64, 64))
        self.assertEqual(img.pixels.min(), 0.0)
        self.assertEqual(img.pixels.max(), 1.0)
        self.assertEqual(bench.bench_image(64), img)

    def test_minimum_repetitions(self):
        conf = config.Config()
        result = bench.cmd_bench(conf, size=32, repetitions=3)
        for timing in result["stages"].values():
            self.assertEqual(timing["repetitions"], bench.MIN_REPETITIONS)

    def test_stages_and_scaling(self):
        """
        Test per-stage timings and that doubling the pixel count at most
        multiplies the dose corruption time by 2.5
        """
        result = bench.cmd_bench(config.Config(), size=256)
        self.assertEqual(list(result["stages"]), ["dose_1", "severity_5", "iq_metrics"])
        for timing in result["stages"].values():
            self.assertGreater(timing["median_s"], 0.0)
            self.assertGreaterEqual(timing["iqr_s"], 0.0)
        scaling = result["scaling"]
        self.assertEqual(scaling["small_pixels"], 256 * 256)
        self.assertEqual(scaling["large_pixels"], 362 * 362)
        self.assertLessEqual(scaling["time_ratio"], 2.5)


if __name__ == '__main__':
    unittest.main(buffer=True)
