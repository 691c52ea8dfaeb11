import os
import sys

here = os.path.dirname(os.path.abspath(__file__))
for sub in ("ctstress", "tests"):
    path = os.path.join(here, sub)
    if path not in sys.path:
        sys.path.insert(0, path)
