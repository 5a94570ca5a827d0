"""One road snapshot, clustered and given max-min fair RSU capacity."""

import numpy as np

from v2vnet import analytic, montecarlo
from v2vnet.allocation import SharingGraph, max_min_allocate, verify_bottleneck
from v2vnet.clustering import attach_rsus, form_clusters
from v2vnet.model import SingleLaneSpec, sample_single_lane

spec = SingleLaneSpec(0.025, 0.8, 150.0, 1000.0)
snap = sample_single_lane(spec, window=50_000.0, seed=5)
clusters = attach_rsus(form_clusters(snap, spec.d), spec.rsu_spacing, snap.rsu_phase)
graph = SharingGraph.from_clusters(clusters, spec.rho_rsu)
alloc = max_min_allocate(graph)

print(f"{len(snap)} vehicles on 50 km, {snap.n_v2v} V2V-capable, {len(clusters)} clusters")
print(f"clusters reaching two or more RSUs: {np.sum(clusters.m >= 2)}")
print(f"vehicles with no RSU: {np.sum(alloc.vehicle_rates == 0)}")
print(f"rate quartiles: {np.round(np.quantile(alloc.vehicle_rates, [0.25, 0.5, 0.75]), 4)}")
check = verify_bottleneck(graph, alloc)
print(f"bottleneck check: {'ok' if check else check.violations}")

print("\nEvenly spaced platoons: bigger clusters reach more RSUs, but use each one less")
print(f"{'n':>3} {'coverage':>9} {'utilization':>12}  (d = 40 m, 10 veh/km)")
for n in (1, 2, 4, 8, 16, 26):
    cov, util = analytic.tradeoff_point(n, 0.010, 40.0, 1000.0)
    if montecarlo.TRADEOFF_WINDOW % (n / 0.010) == 0:
        sim = montecarlo.simulate_tradeoff(n, 0.010, 40.0, 1000.0, phases=1024)
        print(f"{n:>3} {cov:>9.3f} {util:>12.3f}   simulated {sim[0]:.3f} / {sim[1]:.3f}")
    else:
        print(f"{n:>3} {cov:>9.3f} {util:>12.3f}   (platoons do not tile the simulation window)")
