import csv
import json

import numpy as np
import pytest

from selfnorm.moments import MomentPair, WeightMoments, iterate_map
from selfnorm.primitives import lecun_init, make_rng, selu
from selfnorm.simulation import (
    NetSpec,
    PropagationTrace,
    SeluMLP,
    TrainHistory,
    TrainingDivergedError,
    _layer_weights,
    make_blobs,
    make_spiral,
    make_xor,
    normality_check,
    propagate_moments_mc,
    train_sgd,
)
from selfnorm.special import DomainError


def test_depth_zero_trace():
    t = propagate_moments_mc(0, 64, 5000, seed=1)
    assert len(t) == 1
    assert t.layers[0].mean == pytest.approx(0.0, abs=0.05)
    assert t.layers[0].var == pytest.approx(1.0, abs=0.05)


def test_trace_invariants_and_determinism():
    a = propagate_moments_mc(6, 32, 2000, seed=3)
    b = propagate_moments_mc(6, 32, 2000, seed=3)
    assert len(a) == 7 and all(r.var > 0 for r in a.layers)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != propagate_moments_mc(6, 32, 2000, seed=4).to_dict()


def test_preconditions():
    with pytest.raises(DomainError):
        propagate_moments_mc(3, 8, 2000)
    with pytest.raises(DomainError):
        propagate_moments_mc(3, 32, 500)
    with pytest.raises(DomainError):
        propagate_moments_mc(3, 32, 2000, w_mode="uniform")


def test_normalized_weights_have_exact_moments():
    w = _layer_weights(make_rng(0), 64, "normalized", WeightMoments(0.0, 1.0))
    np.testing.assert_allclose(w.sum(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose((w * w).sum(axis=0), 1.0, rtol=1e-12)
    w = _layer_weights(make_rng(0), 64, "perturbed", WeightMoments(0.1, 1.1))
    np.testing.assert_allclose(w.sum(axis=0), 0.1, atol=1e-12)
    np.testing.assert_allclose((w * w).sum(axis=0), 1.1, rtol=1e-12)


def test_iterated_prediction_converges_monotonically():
    t = propagate_moments_mc(20, 32, 2000, seed=0, input_moments=(0.5, 2.0))
    dist = [max(abs(r.iter_mean), abs(r.iter_var - 1.0)) for r in t.layers]
    assert all(b <= a for a, b in zip(dist[3:], dist[4:]))


def test_perturbed_weights_track_their_fixed_point():
    w = WeightMoments(0.1, 1.1)
    t = propagate_moments_mc(16, 128, 4000, w_mode=("perturbed", w.omega, w.tau), seed=2)
    first = t.layers[0]
    traj = iterate_map(MomentPair(first.mean, first.var), w, max_steps=16, tol=0.0)
    for r, m in zip(t.layers, traj):
        assert (r.iter_mean, r.iter_var) == pytest.approx((m.mu, m.nu), abs=1e-13)
    target = iterate_map(MomentPair(0.0, 1.0), w)[-1]
    assert t.layers[-1].mean == pytest.approx(target.mu, abs=0.05)
    assert t.layers[-1].var == pytest.approx(target.nu, abs=0.05)
    for r in t.layers[1:]:
        zm, zv = r.z_scores()
        assert zm < 5 and zv < 5


def test_trace_serialisation(tmp_path):
    t = propagate_moments_mc(3, 32, 1000, seed=5)
    path = tmp_path / "trace.csv"
    t.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["layer", "mean", "var", "pred_mean", "pred_var"]
    assert len(rows) == 5
    assert float(rows[2][1]) == t.layers[1].mean
    assert PropagationTrace.from_dict(json.loads(t.to_json())).to_dict() == t.to_dict()


def test_normality_of_gaussian_samples():
    assert normality_check(make_rng(0).standard_normal(10**5)) < 0.01


def test_normality_of_wide_layer_inputs():
    x = make_rng(1).standard_normal((2000, 512))
    a = selu(x @ lecun_init(512, 512, 2).weights)
    z = a @ lecun_init(512, 512, 3).weights
    assert normality_check(z) < 0.02


def test_normality_degenerate_and_small():
    assert normality_check(np.full(500, 3.0)) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        normality_check(np.zeros(99))


@pytest.mark.parametrize("maker", [make_spiral, make_blobs, make_xor])
def test_datasets_standardised(maker):
    x, y = maker(seed=0)
    assert len(x) == len(y)
    np.testing.assert_allclose(x.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(x.std(axis=0), 1.0, atol=1e-12)
    assert np.array_equal(maker(seed=0)[0], x)


def test_backprop_matches_finite_differences():
    x, y = make_xor(40, seed=2)
    model = SeluMLP(2, 2, NetSpec(3, 5), seed=1)
    _, gw, gb, g_out, _ = model.gradients(x, y)
    h = 1e-6
    for k, (i, j) in [(0, (0, 1)), (1, (2, 3)), (2, (4, 0))]:
        w = model.weights[k]
        old = w[i, j]
        w[i, j] = old + h
        lp = model.loss(x, y)
        w[i, j] = old - h
        lm = model.loss(x, y)
        w[i, j] = old
        assert gw[k][i, j] == pytest.approx((lp - lm) / (2 * h), rel=1e-5, abs=1e-9)
    b = model.biases[1]
    b[2] += h
    lp = model.loss(x, y)
    b[2] -= 2 * h
    lm = model.loss(x, y)
    b[2] += h
    assert gb[1][2] == pytest.approx((lp - lm) / (2 * h), rel=1e-5, abs=1e-9)
    model.w_out[1, 0] += h
    lp = model.loss(x, y)
    model.w_out[1, 0] -= 2 * h
    lm = model.loss(x, y)
    model.w_out[1, 0] += h
    assert g_out[1, 0] == pytest.approx((lp - lm) / (2 * h), rel=1e-5, abs=1e-9)


def test_zero_epochs():
    h = train_sgd(NetSpec(2, 16), make_xor(100), epochs=0)
    assert len(h) == 1 and len(h.grad_ratio) == 1


def test_training_deterministic():
    data = make_spiral(200, seed=1)
    a = train_sgd(NetSpec(4, 16), data, epochs=3, seed=9, dropout_q=0.9)
    b = train_sgd(NetSpec(4, 16), data, epochs=3, seed=9, dropout_q=0.9)
    assert a.to_dict() == b.to_dict()


def test_linearly_separable_reaches_low_loss():
    h = train_sgd(NetSpec(4, 32), make_blobs(400, centers=2, spread=0.5, seed=1), lr=0.01, epochs=30)
    assert h.loss[-1] < 0.05
    assert all(np.isfinite(h.loss))


def test_divergence_reports_partial_history():
    with pytest.raises(TrainingDivergedError) as exc:
        train_sgd(NetSpec(8, 32), make_spiral(200), lr=50.0, epochs=5)
    assert len(exc.value.history) >= 1
    assert all(np.isfinite(exc.value.history.loss))


def test_training_input_validation():
    with pytest.raises(DomainError):
        train_sgd(NetSpec(2, 8), make_xor(50), lr=0.0)
    with pytest.raises(DomainError):
        train_sgd(NetSpec(2, 8), (np.zeros((0, 2)), np.zeros(0)))


def test_history_serialisation(tmp_path):
    h = train_sgd(NetSpec(2, 8), make_xor(60), epochs=2)
    path = tmp_path / "hist.csv"
    h.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "loss", "grad_ratio"] and len(rows) == 4
    assert TrainHistory.from_dict(json.loads(h.to_json())) == h
