"""
Monte Carlo size and power
==========================

Empirical rejection rates under the moving-average model (unbalanced sizes)
and the factor model with a random alternating mean. Replications are kept
small here; the command line tool runs full campaigns.
"""

import time

from hdbf import Model1Config, Model2Config, SimConfig, run_monte_carlo

R = 500
campaigns = {
    "MA model, null": Model1Config(200, (20, 30, 50)),
    "MA model, theta=0.005": Model1Config(200, (10, 10, 80), theta=0.005),
    "factor model, null": Model2Config(200, (11, 16, 28)),
    "factor model, a=0.2": Model2Config(200, (11, 16, 28), a=0.2),
}

for label, model in campaigns.items():
    t0 = time.perf_counter()
    res = run_monte_carlo(SimConfig(model, replications=R, seed=1))
    rates = "  ".join(f"{m.value}={r.rate:.3f}({r.se:.3f})" for m, r in res.rates.items())
    print(f"{label:24s} {rates}  [{time.perf_counter() - t0:.1f}s, digest {res.config_digest}]")
