"""Monte-Carlo checks of self-normalisation and a small SGD trainer for deep SELU nets."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .moments import SELU_01, MomentPair, SeluParams, WeightMoments, next_moments
from .primitives import alpha_dropout, make_dropout_config, make_rng, selu, selu_derivative
from .special import DomainError


class TrainingDivergedError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


# ---------------------------------------------------------------------------
# moment propagation


@dataclass(frozen=True)
class LayerMoments:
    layer: int
    mean: float
    var: float
    pred_mean: float
    pred_var: float
    se_mean: float
    se_var: float
    iter_mean: float
    iter_var: float

    @property
    def predicted(self) -> MomentPair:
        return MomentPair(self.pred_mean, self.pred_var)

    def z_scores(self) -> tuple[float, float]:
        """Empirical minus one-step prediction, in MC standard errors."""
        return (
            abs(self.mean - self.pred_mean) / self.se_mean,
            abs(self.var - self.pred_var) / self.se_var,
        )


@dataclass
class PropagationTrace:
    layers: list[LayerMoments]
    width: int
    n_samples: int
    w_mode: str
    weights: WeightMoments
    seed: int

    def __len__(self):
        return len(self.layers)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["layer", "mean", "var", "pred_mean", "pred_var"])
            for r in self.layers:
                w.writerow([r.layer, repr(r.mean), repr(r.var), repr(r.pred_mean), repr(r.pred_var)])

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "n_samples": self.n_samples,
            "w_mode": self.w_mode,
            "omega": self.weights.omega,
            "tau": self.weights.tau,
            "seed": self.seed,
            "layers": [asdict(r) for r in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PropagationTrace":
        return cls(
            [LayerMoments(**r) for r in d["layers"]],
            d["width"],
            d["n_samples"],
            d["w_mode"],
            WeightMoments(d["omega"], d["tau"]),
            d["seed"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _parse_w_mode(w_mode):
    if w_mode == "normalized":
        return "normalized", WeightMoments(0.0, 1.0)
    if w_mode == "lecun":
        return "lecun", WeightMoments(0.0, 1.0)
    if isinstance(w_mode, (tuple, list)) and len(w_mode) == 3 and w_mode[0] == "perturbed":
        return "perturbed", WeightMoments(float(w_mode[1]), float(w_mode[2]))
    raise DomainError(f"unknown weight mode {w_mode!r}")


def _layer_weights(rng, width, mode, wm: WeightMoments):
    w = rng.normal(0.0, np.sqrt(1.0 / width), size=(width, width))
    if mode == "lecun":
        return w
    # exact column moments: sum(w) = omega, sum(w^2) = tau
    spread = wm.tau - wm.omega**2 / width
    if spread <= 0:
        raise DomainError("tau must exceed omega^2 / width")
    c = w - w.mean(axis=0)
    c *= np.sqrt(spread / np.sum(c * c, axis=0))
    return c + wm.omega / width


def _moments_with_se(a, n_samples):
    m = float(a.mean())
    dev2 = (a - m) ** 2
    v = float(dev2.mean())
    # units within one sample are correlated; n_samples independent draws
    return m, v, float(a.std()) / np.sqrt(n_samples), float(dev2.std()) / np.sqrt(n_samples)


def propagate_moments_mc(
    depth: int,
    width: int,
    n_samples: int,
    w_mode="normalized",
    seed: int = 0,
    p: SeluParams = SELU_01,
    input_moments: tuple[float, float] = (0.0, 1.0),
) -> PropagationTrace:
    """Push Gaussian inputs through ``depth`` random dense SELU layers.

    Row 0 describes the inputs. ``pred_*`` is the one-step prediction, the
    moment map applied to the empirical moments of the previous layer.
    ``iter_*`` is the purely analytic trajectory iterated from the empirical
    input moments. Both use the weight moments implied by ``w_mode``.
    """
    if width < 16 or n_samples < 1000:
        raise DomainError("need width >= 16 and n_samples >= 1000")
    mode, wm = _parse_w_mode(w_mode)
    streams = np.random.SeedSequence(seed).spawn(depth + 1)
    mu0, nu0 = input_moments
    x = make_rng(streams[0]).standard_normal((n_samples, width)) * np.sqrt(nu0) + mu0

    m, v, se_m, se_v = _moments_with_se(x, n_samples)
    it = (m, v)
    rows = [LayerMoments(0, m, v, m, v, se_m, se_v, m, v)]
    for k in range(1, depth + 1):
        w = _layer_weights(make_rng(streams[k]), width, mode, wm)
        pm, _, pv = next_moments(m, wm.omega, v, wm.tau, p.lam, p.alpha)
        im, _, iv = next_moments(it[0], wm.omega, it[1], wm.tau, p.lam, p.alpha)
        it = (float(im), float(iv))
        x = selu(x @ w, p)
        m, v, se_m, se_v = _moments_with_se(x, n_samples)
        rows.append(LayerMoments(k, m, v, float(pm), float(pv), se_m, se_v, it[0], it[1]))
    return PropagationTrace(rows, width, n_samples, mode, wm, seed)


def normality_check(z_samples) -> float:
    """Kolmogorov-Smirnov distance between standardised samples and N(0, 1)."""
    z = np.asarray(z_samples, dtype=float).ravel()
    if z.size < 100:
        raise DomainError("normality_check needs at least 100 samples")
    sd = z.std()
    zs = (z - z.mean()) / sd if sd > 0 else np.zeros_like(z)
    return float(stats.kstest(zs, "norm").statistic)


# ---------------------------------------------------------------------------
# datasets


def _standardize(x):
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def make_spiral(n: int = 2000, noise: float = 0.2, turns: float = 1.5, seed: int = 0):
    """Two interleaved spirals; returns standardised (X, y)."""
    rng = make_rng(seed)
    half = n // 2
    t = np.sqrt(rng.random(half)) * turns * 2 * np.pi
    arm = np.column_stack([t * np.cos(t), t * np.sin(t)]) / (turns * 2 * np.pi)
    x = np.vstack([arm, -arm]) + noise * rng.standard_normal((2 * half, 2)) / (turns * 2 * np.pi) * 2
    y = np.repeat([0, 1], half)
    return _standardize(x), y


def make_blobs(n: int = 1000, centers: int = 3, spread: float = 0.5, dim: int = 2, seed: int = 0):
    rng = make_rng(seed)
    mus = rng.normal(0.0, 3.0, size=(centers, dim))
    y = np.arange(n) % centers
    x = mus[y] + spread * rng.standard_normal((n, dim))
    return _standardize(x), y


def make_xor(n: int = 1000, noise: float = 0.1, seed: int = 0):
    rng = make_rng(seed)
    corners = rng.integers(0, 2, size=(n, 2))
    x = corners * 2.0 - 1.0 + noise * rng.standard_normal((n, 2))
    y = corners[:, 0] ^ corners[:, 1]
    return _standardize(x), y


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class NetSpec:
    depth: int
    width: int
    params: SeluParams = SELU_01


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    grad_ratio: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.loss)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "grad_ratio"])
            for e, (l, g) in enumerate(zip(self.loss, self.grad_ratio)):
                w.writerow([e, repr(l), repr(g)])

    def to_dict(self) -> dict:
        return {"loss": list(self.loss), "grad_ratio": list(self.grad_ratio)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TrainHistory":
        return cls(list(d["loss"]), list(d["grad_ratio"]))


class SeluMLP:
    """Dense SELU network with a softmax head, trained by plain SGD."""

    def __init__(self, n_in: int, n_classes: int, spec: NetSpec, seed: int = 0):
        self.spec = spec
        dims = [n_in] + [spec.width] * spec.depth
        streams = np.random.SeedSequence(seed).spawn(spec.depth + 1)
        self.weights, self.biases = [], []
        for k, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.weights.append(make_rng(streams[k]).normal(0.0, np.sqrt(1.0 / a), size=(a, b)))
            self.biases.append(np.zeros(b))
        self.w_out = make_rng(streams[-1]).normal(0.0, np.sqrt(1.0 / dims[-1]), size=(dims[-1], n_classes))
        self.b_out = np.zeros(n_classes)

    def _forward(self, x, dropout_cfg=None, rng=None):
        p = self.spec.params
        acts, pre, masks = [x], [], []
        for w, b in zip(self.weights, self.biases):
            z = acts[-1] @ w + b
            a = selu(z, p)
            if dropout_cfg is not None and dropout_cfg.q < 1:
                keep = rng.random(a.shape) < dropout_cfg.q
                a = dropout_cfg.a * np.where(keep, a, dropout_cfg.alpha_prime) + dropout_cfg.b
                masks.append(keep)
            else:
                masks.append(None)
            pre.append(z)
            acts.append(a)
        logits = acts[-1] @ self.w_out + self.b_out
        return logits, acts, pre, masks

    @staticmethod
    def _softmax_ce(logits, y):
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -logp[np.arange(len(y)), y].mean()
        return loss, np.exp(logp)

    def gradients(self, x, y, dropout_cfg=None, rng=None):
        logits, acts, pre, masks = self._forward(x, dropout_cfg, rng)
        loss, prob = self._softmax_ce(logits, y)
        d = prob
        d[np.arange(len(y)), y] -= 1.0
        d /= len(y)
        g_wout = acts[-1].T @ d
        g_bout = d.sum(axis=0)
        da = d @ self.w_out.T
        gw, gb = [None] * len(self.weights), [None] * len(self.weights)
        for k in range(len(self.weights) - 1, -1, -1):
            if masks[k] is not None:
                da = da * dropout_cfg.a * masks[k]
            dz = da * selu_derivative(pre[k], self.spec.params)
            gw[k] = acts[k].T @ dz
            gb[k] = dz.sum(axis=0)
            if k:
                da = dz @ self.weights[k].T
        return loss, gw, gb, g_wout, g_bout

    def loss(self, x, y) -> float:
        return float(self._softmax_ce(self._forward(x)[0], y)[0])

    def predict(self, x) -> np.ndarray:
        return np.argmax(self._forward(x)[0], axis=1)

    def evaluate(self, x, y) -> tuple[float, float]:
        """Full-batch loss and ||grad W_1|| / ||grad W_L|| without dropout."""
        loss, gw, _, _, _ = self.gradients(x, y)
        return float(loss), float(np.linalg.norm(gw[0]) / np.linalg.norm(gw[-1]))


def train_sgd(
    spec: NetSpec,
    dataset: tuple[np.ndarray, np.ndarray],
    lr: float = 0.01,
    epochs: int = 200,
    dropout_q: float = 1.0,
    seed: int = 0,
    batch_size: int = 32,
    return_model: bool = False,
):
    """Minibatch SGD with softmax cross-entropy.

    History entry 0 is the untrained network; entry e is measured on the full
    dataset after epoch e.
    """
    x, y = dataset
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.ndim != 2 or len(x) == 0 or len(x) != len(y):
        raise DomainError("dataset must be a non-empty (n, d) matrix with n labels")
    if lr <= 0:
        raise DomainError("learning rate must be positive")
    classes, y_idx = np.unique(y, return_inverse=True)
    s_init, s_shuffle, s_drop = np.random.SeedSequence(seed).spawn(3)
    model = SeluMLP(x.shape[1], len(classes), spec, seed=int(s_init.generate_state(1)[0]))
    cfg = make_dropout_config(dropout_q, spec.params) if dropout_q < 1 else None
    shuffle_rng, drop_rng = make_rng(s_shuffle), make_rng(s_drop)

    hist = TrainHistory()

    def record():
        loss, ratio = model.evaluate(x, y_idx)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss after {len(hist)} epochs", hist)
        hist.loss.append(loss)
        hist.grad_ratio.append(ratio)

    # overflow shows up as a non-finite loss, which record() turns into an error
    with np.errstate(over="ignore", invalid="ignore"):
        record()
        for _ in range(epochs):
            order = shuffle_rng.permutation(len(x))
            for start in range(0, len(x), batch_size):
                idx = order[start:start + batch_size]
                _, gw, gb, g_wout, g_bout = model.gradients(x[idx], y_idx[idx], cfg, drop_rng)
                for k in range(len(gw)):
                    model.weights[k] -= lr * gw[k]
                    model.biases[k] -= lr * gb[k]
                model.w_out -= lr * g_wout
                model.b_out -= lr * g_bout
            record()
    return (hist, model) if return_model else hist
