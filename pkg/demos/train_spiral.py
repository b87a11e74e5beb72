"""A 16-layer SELU network trained with plain SGD on a two-arm spiral.

Without any normalization layers the gradient at the first layer stays within
a small factor of the gradient at the last, and the loss keeps falling.
"""
from selfnorm.simulation import NetSpec, make_spiral, train_sgd

hist = train_sgd(NetSpec(depth=16, width=128), make_spiral(2000, seed=0), lr=0.01, epochs=60, seed=0)
for epoch in range(0, len(hist), 10):
    print(f"epoch {epoch:3d}: loss {hist.loss[epoch]:.5f}, first/last gradient norm {hist.grad_ratio[epoch]:.3f}")
print(f"final loss {hist.loss[-1]:.2e} ({hist.loss[-1] / hist.loss[0]:.1e} of initial)")
