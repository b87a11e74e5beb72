"""Where the SELU constants come from and why (0, 1) attracts.

Solves for the activation parameters that make (mean 0, variance 1) a fixed
point of the moment map, then iterates the map from a few starting moments
and prints the Jacobian at the fixed point.
"""
from selfnorm import (
    MomentPair,
    WeightMoments,
    iterate_map,
    jacobian_H,
    solve_selu_params,
    spectral_norm_S,
)

p = solve_selu_params(MomentPair(0.0, 1.0))
print(f"fixed point (0, 1): lambda = {p.lam:.10f}, alpha = {p.alpha:.10f}")

p2 = solve_selu_params(MomentPair(0.0, 2.0))
print(f"fixed point (0, 2): lambda = {p2.lam:.5f}, alpha = {p2.alpha:.5f}")

w = WeightMoments(0.0, 1.0)
print("\niterating the map from a few starting moments:")
for start in (MomentPair(0.1, 1.5), MomentPair(-0.1, 0.8), MomentPair(0.05, 3.0)):
    traj = iterate_map(start, w)
    end = traj[-1]
    print(f"  ({start.mu:+.2f}, {start.nu:.2f}) -> ({end.mu:+.2e}, {end.nu:.8f}) in {len(traj) - 1} steps")

h = jacobian_H(MomentPair(0.0, 1.0), w).as_array()
print(f"\nJacobian of (mean, variance) at the fixed point:\n{h.round(6)}")
print(f"largest singular value: {spectral_norm_S(0.0, 0.0, 1.0, 1.0):.6f}")
