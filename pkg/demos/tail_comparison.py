"""Monte Carlo campaign vs the analytic tail for two softening slopes.

Runs a few hundred replicas per slope (raise REPLICAS for smoother
empirical curves), fits the damage-count weights and prints both
failure probabilities on a common stress grid.
"""
import numpy as np

from fishnet import (
    EnsembleConfig,
    OrderStatBasis,
    TailModel,
    failure_probability,
    fit_sample,
    run_ensemble,
    strength_at_probability,
    table1_defaults,
)

REPLICAS = 400

for kt in (0.1, 0.5):
    res = run_ensemble(EnsembleConfig(kt_ratio=kt, replicas=REPLICAS, master_seed=11))
    w = fit_sample(res.n_c[res.ok])
    k0, dk = table1_defaults(kt)
    model = TailModel(OrderStatBasis(512), w, k0, dk)
    x, p, _, _ = res.empirical_cdf()
    print(f"|Kt/K0| = {kt}: median {np.median(res.sigma_max):.3f} MPa, mean N_c {res.n_c.mean():.1f}, "
          f"lambda {w.lam:.2f}, theta {w.theta:.3f}")
    for q in (0.05, 0.25, 0.5, 0.75, 0.95):
        i = int(np.searchsorted(p, q))
        print(f"  x = {x[i]:.3f}: empirical {p[i]:.3f}  analytic {failure_probability(x[i], model):.3f}")
    print(f"  strength at P_f = 1e-6: {strength_at_probability(1e-6, model):.3f} MPa")
