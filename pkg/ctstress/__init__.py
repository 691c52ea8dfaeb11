"""ctstress, a low-dose portable-CT corruption and evaluation harness."""

import os
import sys

__all__ = ["artifacts", "baseline", "bench", "clfmetrics", "config", "dataset",
           "dosesim", "harness", "image", "iqmetrics", "report", "util"]

__version__ = "0.1.0"


def main(argv=None):
    """Console entry point; the modules import each other by bare name."""
    here = os.path.dirname(os.path.abspath(__file__))
    if here not in sys.path:
        sys.path.insert(0, here)
    from . import ctstress as cli
    cli.main(argv)
