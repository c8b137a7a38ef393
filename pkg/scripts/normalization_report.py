"""Check generator normalisation, cumulative generators and deleted-component normalisers.

    python scripts/normalization_report.py

Every closed form in ``lsme.generators`` is compared with adaptive quadrature
for each family and n = 1, 2, 3.
"""

import numpy as np
from scipy import integrate

import lsme.generators as gen

FAMILIES = [gen.NORMAL, gen.student_t(5), gen.student_t(3), gen.LOGISTIC, gen.LAPLACE]


def main():
    print(f"{'family':>14} {'n':>2} {'c_n':>14} {'|int f - 1|':>12} {'max Gbar err':>13} {'max N rel err':>14}")
    for fam in FAMILIES:
        for n in (1, 2, 3):
            total = gen.radial_integral(lambda u: gen.density_generator(fam, n, u), n)
            gbar = 0.0
            for u in (0.0, 0.5, 2.0, 8.0, 20.0):
                num, _ = integrate.quad(lambda v: gen.density_generator(fam, n, v), u, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
                gbar = max(gbar, abs(gen.cumulative_generator(fam, n, u) - num))
            norm = float("nan")
            if n >= 2:
                norm = max(
                    abs(gen.tail_density_normalizer(fam, n, a) / gen.tail_density_normalizer(fam, n, a, method="quadrature") - 1)
                    for a in (0.0, 0.5, 3.0, 10.0)
                )
            c_n = gen.normalizing_constant(fam, n)
            print(f"{str(fam):>14} {n:>2} {c_n:14.10f} {abs(total - 1):12.2e} {gbar:13.2e} {norm:14.2e}")
    print(f"\neta(1) - ln 2      = {gen.dirichlet_eta(1.0) - np.log(2):.2e}")
    print(f"eta(2) - pi^2 / 12 = {gen.dirichlet_eta(2.0) - np.pi**2 / 12:.2e}")


if __name__ == "__main__":
    main()
