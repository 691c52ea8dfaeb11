import subprocess
import unittest


class TestGeneral(unittest.TestCase):

    def test_no_global_random_state(self):
        """
        Make sure randomness always comes from a seeded Generator and never
        from numpy's global random state
        """
        grep_cmd = ["grep", "-rnE",
                    r"np\.random\.(seed|rand|randn|randint|random|choice|shuffle|permutation|normal|uniform|poisson)\(",
                    "--include=*.py", "ctstress"]
        try:
            output = subprocess.check_output(grep_cmd).decode('utf-8')
        except subprocess.CalledProcessError as e:
            output = e.output.decode('utf-8')

        self.assertEqual(output.strip(), "")


if __name__ == "__main__":
    unittest.main(buffer=True)
