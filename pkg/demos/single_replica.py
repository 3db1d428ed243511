"""One sequentially linear run of the default net.

Shows the load-jump history up to the peak, the four reporting stages and
how close the nominal stress stays to the k-th weakest strength.
"""
import numpy as np

from fishnet import build_topology, run_simulation, sample_strengths

topo = build_topology(16, 16)
strengths = sample_strengths(topo.n_links, seed=7)

for kt in (0.1, 0.5):
    rec = run_simulation(topo, strengths, kt_ratio=kt, J=20)
    print(f"|Kt/K0| = {kt}: {rec.n_events} events, peak {rec.sigma_max:.4f} MPa "
          f"at event {rec.peak_index} with N_c = {rec.n_c} damaged links")
    print("  stages:", rec.stage_events())
    k, ratio = rec.ratio_trace()
    print(f"  s_(k)/sigma_N over k = 1..{k[-1]}: min {ratio.min():.3f}, max {ratio.max():.3f}")

print("weakest link", strengths.min(), "first event", rec.sigma[0])
