"""How fast the mixing quadrature converges for TCE and MTCE.

    python scripts/quadrature_convergence.py

For a few skewed models the value at N nodes is compared with the value at
512 nodes.  Rules too coarse to pass the built-in N versus 2N check are
reported as ``refused``.
"""

import warnings

import numpy as np

from lsme.errors import NumericalFailure
from lsme.generators import LAPLACE, NORMAL, student_t
from lsme.mixing import Gamma, GIG, InverseGamma
from lsme.model import LSMEModel
from lsme.multivariate import mtce
from lsme.univariate import tce_1d

CASES = [
    ("normal/Gamma(2,1)", LSMEModel.univariate(NORMAL, Gamma(2.0, 1.0), 0.0, 1.0, 0.5)),
    ("laplace/InvGamma(3,2)", LSMEModel.univariate(LAPLACE, InverseGamma(3.0, 2.0), 0.0, 1.0, 0.5)),
    ("t5/GIG(-0.5,1,1)", LSMEModel.univariate(student_t(5), GIG(-0.5, 1.0, 1.0), 0.0, 1.0, -0.3)),
]


NODES = (8, 16, 32, 64, 128)


def _error(fn, ref):
    try:
        return f"{np.max(np.abs(fn() - ref)):8.1e}"
    except NumericalFailure:
        return " refused"


def main():
    warnings.simplefilter("ignore")
    for name, m in CASES:
        ref = tce_1d(m, 0.99, nodes=512).value
        errs = [_error(lambda: tce_1d(m, 0.99, nodes=k).value, ref) for k in NODES]
        print(f"TCE  {name:>24}: " + " ".join(errs))
    pair = LSMEModel(NORMAL, [0, 0], [[1, 0.5], [0.5, 2]], [0.4, -0.2], Gamma(2.0, 1.0))
    ref = mtce(pair, 0.95, nodes=512).value
    errs = [_error(lambda: mtce(pair, 0.95, nodes=k).value, ref) for k in NODES]
    print(f"MTCE {'normal pair/Gamma(2,1)':>24}: " + " ".join(errs))
    print("columns: N = 8 16 32 64 128")


if __name__ == "__main__":
    main()
