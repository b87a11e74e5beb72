"""Analytic Jacobians of the moment map and their largest singular value."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import (
    ALPHA_01,
    LAMBDA_01,
    SELU_01,
    SQRT_2_OVER_PI,
    MomentPair,
    SeluParams,
    WeightMoments,
    _check_products,
    _terms,
)

# Reference bounds on |J11| and |J12| over Omega (tau in [0.8, 1.25]).
J11_BOUND = 0.104497
J12_BOUND = 0.194145
J12_BOUND_PROOF = 0.194035  # value the proof actually concludes
MU_NEXT_LOW_VARIANCE_BOUND = 0.289324


@dataclass(frozen=True)
class Jacobian2x2:
    j11: float
    j12: float
    j21: float
    j22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.j11, self.j12], [self.j21, self.j22]], dtype=float)


@dataclass(frozen=True)
class SingularPair:
    s1: float
    s2: float


def jacobian_entries(mu, omega, nu, tau, lam=LAMBDA_01, alpha=ALPHA_01):
    """Vectorised ``(J11, J12, J21, J22, mu_next)``.

    J is the Jacobian of (mu_next, xi_next) with respect to (mu, nu); the
    next-layer mean is returned as well because H needs it.
    """
    omega = np.asarray(omega, dtype=float)
    tau = np.asarray(tau, dtype=float)
    y, x = _check_products(mu, omega, nu, tau)
    ea, gauss, e1, e2 = _terms(y, x)
    sx = np.sqrt(x)
    j11 = 0.5 * lam * omega * (alpha * e1 - ea + 2.0)
    j12 = 0.25 * lam * tau * (alpha * e1 - (alpha - 1.0) * SQRT_2_OVER_PI / sx * gauss)
    j21 = lam**2 * omega * (
        -(alpha**2) * e1 + alpha**2 * e2 + y * (2.0 - ea) + SQRT_2_OVER_PI * sx * gauss
    )
    j22 = 0.5 * lam**2 * tau * (-(alpha**2) * e1 + 2.0 * alpha**2 * e2 - ea + 2.0)
    mu_next = 0.5 * lam * (
        -(alpha + y) * ea + alpha * e1 + SQRT_2_OVER_PI * sx * gauss + 2.0 * y
    )
    return j11, j12, j21, j22, mu_next


def _pack(*entries) -> Jacobian2x2:
    if all(np.ndim(e) == 0 for e in entries):
        entries = tuple(float(e) for e in entries)
    return Jacobian2x2(*entries)


def jacobian_J(m: MomentPair, w: WeightMoments, p: SeluParams = SELU_01) -> Jacobian2x2:
    j11, j12, j21, j22, _ = jacobian_entries(m.mu, w.omega, m.nu, w.tau, p.lam, p.alpha)
    return _pack(j11, j12, j21, j22)


def h_entries(mu, omega, nu, tau, lam=LAMBDA_01, alpha=ALPHA_01):
    """Vectorised entries of H, the Jacobian of (mu_next, nu_next)."""
    j11, j12, j21, j22, m = jacobian_entries(mu, omega, nu, tau, lam, alpha)
    return j11, j12, j21 - 2.0 * m * j11, j22 - 2.0 * m * j12


def jacobian_H(m: MomentPair, w: WeightMoments, p: SeluParams = SELU_01) -> Jacobian2x2:
    return _pack(*h_entries(m.mu, w.omega, m.nu, w.tau, p.lam, p.alpha))


def _singular(a11, a12, a21, a22):
    a11, a12, a21, a22 = (np.asarray(v, dtype=float) for v in (a11, a12, a21, a22))
    r1 = np.hypot(a11 + a22, a21 - a12)
    r2 = np.hypot(a11 - a22, a12 + a21)
    return 0.5 * (r1 + r2), 0.5 * np.abs(r1 - r2)


def singular_values_2x2(a11, a12, a21, a22) -> SingularPair:
    """Both singular values of [[a11, a12], [a21, a22]] in closed form.

    s1 = (r1 + r2)/2 and s2 = |r1 - r2|/2 with
    r1 = |(a11 + a22, a21 - a12)|, r2 = |(a11 - a22, a12 + a21)|.
    """
    s1, s2 = _singular(a11, a12, a21, a22)
    if np.ndim(s1) == 0:
        s1, s2 = float(s1), float(s2)
    return SingularPair(s1, s2)


def spectral_norm_field(mu, omega, nu, tau, lam=LAMBDA_01, alpha=ALPHA_01):
    """Vectorised largest singular value of H over arrays of points."""
    return _singular(*h_entries(mu, omega, nu, tau, lam, alpha))[0]


def spectral_norm_S(mu, omega, nu, tau, p: SeluParams = SELU_01):
    s = spectral_norm_field(mu, omega, nu, tau, p.lam, p.alpha)
    return float(s) if np.ndim(s) == 0 else s


def dj11_dmu(mu, omega, nu, tau, lam=LAMBDA_01, alpha=ALPHA_01):
    """Analytic derivative of J11 with respect to mu, equal to 2 omega^2 J12 / tau."""
    _, j12, _, _, _ = jacobian_entries(mu, omega, nu, tau, lam, alpha)
    return 2.0 * np.asarray(omega) ** 2 * j12 / np.asarray(tau)
