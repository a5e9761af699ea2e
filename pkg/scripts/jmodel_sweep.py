"""J0-J1-J2-J3 ladder phase diagram over (J2, J3) with J0 = J1 = 1."""

import sys

from _common import launch

CONFIG = {
    "experiment": "jmodel_sweep",
    "model": {"n_rungs": 4, "J": 1.0},
    "qmc": {"beta": 1.0, "m": 100},
    "n_restarts": 3,
}

if __name__ == "__main__":
    sys.exit(launch("sweep", CONFIG, __doc__, "results/jmodel_sweep"))
