"""Moments of a deep random SELU network stay near (0, 1).

Pushes Gaussian inputs through 32 random layers and compares each layer's
empirical moments with the moment map applied to the layer before. Also shows
that alpha dropout leaves the moments unchanged.
"""
from selfnorm.primitives import alpha_dropout, make_dropout_config, make_rng
from selfnorm.simulation import propagate_moments_mc

trace = propagate_moments_mc(depth=32, width=256, n_samples=10_000, seed=0, input_moments=(0.0, 1.0))
print("layer    mean      var    z(mean)  z(var)")
for r in trace.layers[::4]:
    zm, zv = r.z_scores() if r.layer else (0.0, 0.0)
    print(f"{r.layer:5d} {r.mean:+.4f} {r.var:8.4f} {zm:8.2f} {zv:7.2f}")

x = make_rng(0).standard_normal(10**6)
for q in (0.8, 0.9, 0.95):
    out = alpha_dropout(x, make_dropout_config(q), 1)
    print(f"alpha dropout q={q}: mean {out.mean():+.4f}, variance {out.var():.4f}")
