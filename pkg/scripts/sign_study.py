"""Average sign against nu_1 along the interpolating family for random 5-qubit chains."""

import sys

from _common import launch

CONFIG = {"n_instances": 50, "n_sites": 5, "alpha_steps": 20, "qmc": {"beta": 1.0, "m": 100}}

if __name__ == "__main__":
    sys.exit(launch("sign-study", CONFIG, __doc__, "results/sign_study"))
