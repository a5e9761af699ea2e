"""Brute-force checks of the MaxCut embedding on every connected graph up to four vertices."""

import sys

from _common import launch

CONFIG = {"model": {"max_vertices": 4, "qubit_cap": 6}}

if __name__ == "__main__":
    sys.exit(launch("verify-reduction", CONFIG, __doc__, "results/verify_reduction"))
