"""Mean/variance map of a SELU layer under Gaussian net inputs.

A layer whose inputs have mean ``mu`` and variance ``nu`` and whose weight
vector has ``omega = sum(w)`` and ``tau = sum(w**2)`` produces net inputs
``z ~ N(mu*omega, nu*tau)``. The functions here give the mean, second moment
and variance of ``selu(z)`` in closed form, an independent quadrature route
for the same quantities, the SELU parameters that make a chosen moment pair
a fixed point, and plain fixed-point iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as _sp

from .special import DomainError

MIN_NU_TAU = 1e-12
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class ConvergenceError(RuntimeError):
    """A numerical routine did not reach its tolerance."""


class NoSolutionError(ConvergenceError):
    """Root finding for SELU parameters failed."""


class DivergenceError(RuntimeError):
    """Iteration left the admissible region; ``trajectory`` holds the prefix."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class MomentPair:
    mu: float
    nu: float

    def __post_init__(self):
        if not np.all(np.asarray(self.nu) > 0):
            raise DomainError("variance nu must be positive")


@dataclass(frozen=True)
class WeightMoments:
    omega: float
    tau: float

    def __post_init__(self):
        if not np.all(np.asarray(self.tau) > 0):
            raise DomainError("tau must be positive")


@dataclass(frozen=True)
class SeluParams:
    lam: float
    alpha: float

    def __post_init__(self):
        if not (self.lam > 0 and self.alpha > 0):
            raise DomainError("lambda and alpha must be positive")

    @property
    def saturation(self) -> float:
        """Limit of selu(x) for x -> -inf, i.e. -lambda*alpha."""
        return -self.lam * self.alpha


@dataclass(frozen=True)
class MapResult:
    mu_next: float
    xi_next: float
    nu_next: float


def _fixed_point_01():
    # closed forms for the (0, 1) fixed point with omega=0, tau=1
    e = math.e
    c = _sp.erfc(1.0 / math.sqrt(2.0))
    alpha = -SQRT_2_OVER_PI / (c * math.exp(0.5) - 1.0)
    lam = (1.0 - c * math.sqrt(e)) * math.sqrt(2.0 * math.pi) * (
        2.0 * _sp.erfc(math.sqrt(2.0)) * e**2
        + math.pi * c**2 * e
        - 2.0 * (2.0 + math.pi) * c * math.sqrt(e)
        + math.pi
        + 2.0
    ) ** -0.5
    return lam, alpha


LAMBDA_01, ALPHA_01 = _fixed_point_01()
SELU_01 = SeluParams(LAMBDA_01, ALPHA_01)

NORMALIZED_WEIGHTS = WeightMoments(0.0, 1.0)


def _check_products(mu, omega, nu, tau):
    mu, omega, nu, tau = (np.asarray(v, dtype=float) for v in (mu, omega, nu, tau))
    x = nu * tau
    if not np.all(np.isfinite(x)) or np.any(x < MIN_NU_TAU):
        raise DomainError(f"nu*tau must be >= {MIN_NU_TAU:g}")
    return mu * omega, x


def _terms(y, x):
    """Shared sub-expressions of the closed forms (y = mu*omega, x = nu*tau).

    Returns erfc(y/s), gauss = exp(-y^2/(2x)), and the two scaled products
    exp(y + x/2) erfc((y+x)/s) and exp(2y + 2x) erfc((y+2x)/s), s = sqrt(2x).
    """
    s = np.sqrt(2.0 * x)
    gauss = np.exp(-y * y / (2.0 * x))
    e1 = gauss * _sp.erfcx((y + x) / s)
    e2 = gauss * _sp.erfcx((y + 2.0 * x) / s)
    return _sp.erfc(y / s), gauss, e1, e2


def next_moments(mu, omega, nu, tau, lam=LAMBDA_01, alpha=ALPHA_01):
    """Vectorised closed form: returns ``(mu_next, xi_next, nu_next)``."""
    y, x = _check_products(mu, omega, nu, tau)
    ea, gauss, e1, e2 = _terms(y, x)
    sx = np.sqrt(x)
    mu_next = 0.5 * lam * (
        -(alpha + y) * ea + alpha * e1 + SQRT_2_OVER_PI * sx * gauss + 2.0 * y
    )
    xi_next = 0.5 * lam**2 * (
        (y * y + x) * (2.0 - ea)
        + alpha**2 * (-2.0 * e1 + e2 + ea)
        + SQRT_2_OVER_PI * y * sx * gauss
    )
    return mu_next, xi_next, xi_next - mu_next * mu_next


def mean_next(mu, omega, nu, tau, lam=LAMBDA_01, alpha=ALPHA_01):
    y, x = _check_products(mu, omega, nu, tau)
    ea, gauss, e1, _ = _terms(y, x)
    return 0.5 * lam * (
        -(alpha + y) * ea + alpha * e1 + SQRT_2_OVER_PI * np.sqrt(x) * gauss + 2.0 * y
    )


def map_moments(m: MomentPair, w: WeightMoments, p: SeluParams = SELU_01) -> MapResult:
    mu_n, xi_n, nu_n = next_moments(m.mu, w.omega, m.nu, w.tau, p.lam, p.alpha)
    if np.ndim(mu_n) == 0:
        mu_n, xi_n, nu_n = float(mu_n), float(xi_n), float(nu_n)
    return MapResult(mu_n, xi_n, nu_n)


def quadrature_oracle(
    m: MomentPair,
    w: WeightMoments,
    p: SeluParams = SELU_01,
    tol: float = 1e-10,
    limit: int = 200,
) -> MapResult:
    """Moments of selu(z), z ~ N(mu*omega, nu*tau), by adaptive quadrature.

    Integrates in the standardised variable t = (z - mean)/sd, split at the
    kink t0 = -mean/sd so each half-line integrand is smooth.
    """
    y, x = _check_products(m.mu, w.omega, m.nu, w.tau)
    y, x = float(y), float(x)
    sd = math.sqrt(x)
    t0 = -y / sd
    lam, alpha = p.lam, p.alpha
    phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)  # noqa: E731

    def neg(t, power):
        return (lam * alpha * math.expm1(y + sd * t)) ** power * phi(t)

    def pos(t, power):
        return (lam * (y + sd * t)) ** power * phi(t)

    moments = []
    for power in (1, 2):
        total = 0.0
        for f, a, b in ((neg, -np.inf, t0), (pos, t0, np.inf)):
            val, err, info = integrate.quad(
                f, a, b, args=(power,), epsabs=tol, epsrel=tol, limit=limit, full_output=1
            )[:3]
            if err > 10 * tol and err > 10 * tol * abs(val):
                raise ConvergenceError(
                    f"quadrature did not converge (estimated error {err:.3g})"
                )
            total += val
        moments.append(total)
    mu_n, xi_n = moments
    return MapResult(mu_n, xi_n, xi_n - mu_n * mu_n)


def solve_selu_params(
    target: MomentPair,
    w: WeightMoments = NORMALIZED_WEIGHTS,
    initial: tuple[float, float] = (1.0, 1.5),
    tol: float = 1e-13,
    max_iter: int = 100,
) -> SeluParams:
    """Find (lambda, alpha) such that ``target`` is a fixed point of the map.

    Damped Newton on the residual (mu_next - mu*, nu_next - nu*) with a
    central-difference Jacobian.
    """
    if target.nu <= 0:
        raise DomainError("target variance must be positive")
    mu_t, nu_t = target.mu, target.nu

    def residual(v):
        lam, alpha = v
        mu_n, _, nu_n = next_moments(mu_t, w.omega, nu_t, w.tau, lam, alpha)
        return np.array([mu_n - mu_t, nu_n - nu_t])

    v = np.array(initial, dtype=float)
    r = residual(v)
    h = 1e-7
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            jac[:, j] = (residual(v + step) - residual(v - step)) / (2 * h)
        try:
            delta = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NoSolutionError("singular Jacobian in Newton step") from exc
        t = 1.0
        norm = np.max(np.abs(r))
        while t > 1e-6:
            cand = v + t * delta
            if np.all(cand > 0):
                r_c = residual(cand)
                if np.max(np.abs(r_c)) < norm:
                    v, r = cand, r_c
                    break
            t *= 0.5
        else:
            raise NoSolutionError("line search failed to reduce the residual")
    if np.max(np.abs(r)) >= max(tol, 1e-12):
        raise NoSolutionError(f"no convergence, residual {np.max(np.abs(r)):.3g}")
    return SeluParams(float(v[0]), float(v[1]))


def iterate_map(
    start: MomentPair,
    w: WeightMoments = NORMALIZED_WEIGHTS,
    p: SeluParams = SELU_01,
    max_steps: int = 1000,
    tol: float = 1e-9,
) -> list[MomentPair]:
    """Apply the map repeatedly; the returned trajectory includes ``start``.

    Stops once two successive points differ by less than ``tol`` in the max
    norm, or after ``max_steps`` applications.
    """
    traj = [start]
    cur = start
    for _ in range(max_steps):
        mu_n, _, nu_n = next_moments(cur.mu, w.omega, cur.nu, w.tau, p.lam, p.alpha)
        mu_n, nu_n = float(mu_n), float(nu_n)
        if not (np.isfinite(mu_n) and 0.0 < nu_n < 1e6):
            raise DivergenceError(f"variance left (0, 1e6): {nu_n!r}", traj)
        nxt = MomentPair(mu_n, nu_n)
        traj.append(nxt)
        if max(abs(nxt.mu - cur.mu), abs(nxt.nu - cur.nu)) < tol:
            break
        cur = nxt
    return traj
