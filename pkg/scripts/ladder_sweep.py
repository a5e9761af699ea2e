"""Frustrated-ladder phase diagram: nu_1 and log-sign ratios over (J_perp, J_cross) / J_par."""

import sys

from _common import launch

CONFIG = {
    "experiment": "ladder_sweep",
    "model": {"n_rungs": 4, "J_par": 1.0},
    "qmc": {"beta": 1.0, "m": 100},
    "n_restarts": 3,
}

if __name__ == "__main__":
    sys.exit(launch("sweep", CONFIG, __doc__, "results/ladder_sweep"))
