"""SELU activation, alpha dropout, LeCun-normal initialisation and a dense forward pass."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .moments import SELU_01, SeluParams
from .special import DomainError


class ShapeError(ValueError):
    """Incompatible array dimensions."""


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; accepts an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


def selu(x, p: SeluParams = SELU_01):
    """lambda * x for x > 0, lambda * alpha * (exp(x) - 1) otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > 0, p.lam * x, p.lam * p.alpha * np.expm1(np.minimum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


def selu_derivative(x, p: SeluParams = SELU_01):
    # at exactly 0 the right limit lambda is returned
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, p.lam, p.lam * p.alpha * np.exp(np.minimum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DropoutConfig:
    q: float
    alpha_prime: float
    a: float
    b: float


def make_dropout_config(q: float, p: SeluParams = SELU_01) -> DropoutConfig:
    """Affine correction (a, b) that keeps zero mean / unit variance under alpha dropout.

    ``q`` is the keep probability; dropped units are set to the SELU
    saturation value ``alpha' = -lambda * alpha``.
    """
    if not 0 < q <= 1:
        raise DomainError(f"keep probability must lie in (0, 1], got {q}")
    ap = p.saturation
    a = (q + ap * ap * q * (1.0 - q)) ** -0.5
    b = -a * (1.0 - q) * ap
    return DropoutConfig(q, ap, a, b)


def alpha_dropout(batch, cfg: DropoutConfig, rng_seed) -> np.ndarray:
    x = np.asarray(batch, dtype=float)
    if cfg.q == 1.0:
        return x.copy()
    keep = make_rng(rng_seed).random(x.shape) < cfg.q
    return cfg.a * np.where(keep, x, cfg.alpha_prime) + cfg.b


@dataclass
class LayerSpec:
    fan_in: int
    fan_out: int
    weights: np.ndarray
    biases: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.shape != (self.fan_in, self.fan_out):
            raise ShapeError(f"weights have shape {self.weights.shape}, expected {(self.fan_in, self.fan_out)}")
        if self.biases.shape != (self.fan_out,):
            raise ShapeError(f"biases have shape {self.biases.shape}, expected {(self.fan_out,)}")

    def to_dict(self) -> dict:
        return {
            "fan_in": self.fan_in,
            "fan_out": self.fan_out,
            "seed": self.seed,
            "weights": self.weights.ravel(order="C").tolist(),
            "biases": self.biases.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        w = np.asarray(d["weights"], dtype=float).reshape(d["fan_in"], d["fan_out"])
        return cls(d["fan_in"], d["fan_out"], w, np.asarray(d["biases"], dtype=float), d.get("seed"))


def lecun_init(fan_in: int, fan_out: int, rng_seed) -> LayerSpec:
    """Weights i.i.d. N(0, 1/fan_in), biases zero."""
    if fan_in < 1 or fan_out < 1:
        raise DomainError("fan_in and fan_out must be >= 1")
    w = make_rng(rng_seed).normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, fan_out))
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return LayerSpec(fan_in, fan_out, w, np.zeros(fan_out), seed)


def save_layers(path, layers: list[LayerSpec]) -> None:
    with open(path, "w") as fh:
        json.dump({"layers": [layer.to_dict() for layer in layers]}, fh)


def load_layers(path) -> list[LayerSpec]:
    with open(path) as fh:
        return [LayerSpec.from_dict(d) for d in json.load(fh)["layers"]]


def forward(layers: list[LayerSpec], p: SeluParams, inputs) -> list[tuple[np.ndarray, np.ndarray]]:
    """Dense SELU network; returns ``(z, selu(z))`` for every layer.

    ``inputs`` has shape (batch, fan_in of the first layer).
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2:
        raise ShapeError("inputs must be a 2-D (batch, features) array")
    out = []
    for k, layer in enumerate(layers):
        if x.shape[1] != layer.fan_in:
            raise ShapeError(f"layer {k} expects {layer.fan_in} inputs, got {x.shape[1]}")
        z = x @ layer.weights + layer.biases
        x = selu(z, p)
        out.append((z, x))
    return out
