"""
Asymptotic power and relative efficiency
========================================

Closed-form power of the size-weighted test and of the equal-weight
competitor, and where one beats the other.
"""

import numpy as np

from hdbf import DesignSpec, PopulationSpec, are_case_one, are_lower_bound, power_hu, power_proposed
from hdbf.power import are_case_two, solve_are_roots

p, n = 400, 100
tr_sigma2 = 2.0 * p

# only the last group is shifted; vary its share of the sample
mu = np.zeros((3, p))
mu[2, :20] = 0.25
print("lambda_3   power(T)   power(T_CH)   ARE   bound")
for lam3 in (0.1, 0.2, 1 / 3, 0.5, 0.7):
    design = DesignSpec([(1 - lam3) / 2, (1 - lam3) / 2, lam3])
    pop = PopulationSpec.homogeneous(mu, tr_sigma2, n)
    print(f"{lam3:8.3f} {power_proposed(design, pop):10.4f} {power_hu(design, pop):12.4f}"
          f" {are_case_one(design):6.3f} {are_lower_bound(design):6.3f}")

# mean vectors sharing one direction: mu_2 = tau * mu_3
for tau in (0.2, 2.0, -25.0):
    curve = solve_are_roots(tau)
    roots = ", ".join(f"{r:.4f}" for r in curve.roots)
    print(f"tau={tau:+6.1f}: ARE = 1 at lambda_3 in {{{roots}}};"
          f" ARE(0.1)={are_case_two(tau, 0.1):.3f}, ARE(0.6)={are_case_two(tau, 0.6):.3f}")
