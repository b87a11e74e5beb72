"""Checking the contraction and variance bounds on parameter lattices.

Each verifier evaluates a closed form on a lattice, refines around the worst
point, and adds a mean-value slack plus a floating-point budget before
deciding. The coarse contraction grid used here is honest about failing: its
slack is far larger than the margin below one.
"""
import os

from selfnorm import verify as V

workers = min(8, os.cpu_count() or 1)

rep = V.verify_contraction(grid=V.GridSpec.per_axis(V.OMEGA_CONTRACTION, 40), workers=workers)
print(f"contraction, 40 points per axis: max S = {rep.extremum:.10f} at {rep.arg_extremum}")
print(f"  slack {rep.slack:.4f} + budget {rep.error_budget:.1e} -> {rep.verdict}")
fine = V.mvt_slack(V.S_DERIVATIVE_BOUNDS, V.FINE_CONTRACTION_GRID)
print(f"  slack on the fine grid would be {fine:.9f}, leaving margin {1 - rep.extremum - fine:.2e}")

rep = V.verify_domain_mapping(grid=V.GridSpec.per_axis(V.OMEGA, 30), workers=workers)
d = rep.details
print(f"\nimage of the moment box: mean in [{d['mu_next_min']:.5f}, {d['mu_next_max']:.5f}],"
      f" variance in [{d['nu_next_min']:.5f}, {d['nu_next_max']:.5f}] -> {rep.verdict}")

rep = V.verify_variance_decrease(grid=V.GridSpec.per_axis(V.OMEGA_PLUSPLUS, 12), samples=10_000, seed=7)
print(f"\nlarge variances shrink: max(xi_next - nu) = {rep.extremum:.7f} -> {rep.verdict}")
for name, dom in (("nu in [0.05, 0.16]", V.OMEGA1_MINUS), ("nu in [0.05, 0.24]", V.OMEGA2_MINUS)):
    rep = V.verify_variance_increase(dom, V.GridSpec.per_axis(dom, 12), samples=10_000, seed=1)
    print(f"small variances grow ({name}): min gain = {rep.extremum:.6f} -> {rep.verdict}")

rep = V.verify_mu_squared_bound()
print(f"\nmax mean^2 on the low-variance box: {rep.extremum:.9f} (+ slack {rep.slack:.6f}) -> {rep.verdict}")
