"""Grid-based re-runs of the computer-assisted bounds.

Every verifier evaluates a function on a closed lattice over a 4-D box
(mu, omega, nu, tau), optionally refines around the extremum, adds a
mean-value-theorem slack and a floating-point error budget, and returns a
:class:`VerificationReport` whose verdict can be recomputed from its fields.

Lattice evaluation is split into chunks that depend only on the lattice,
and chunk results are merged in a fixed order, so reports are bit-identical
for any worker count.
"""
from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .jacobian import spectral_norm_field
from .moments import ALPHA_01, LAMBDA_01, SELU_01, SeluParams, mean_next, next_moments
from .special import DomainError

MACHINE_EPS = 2.0**-52

# Error amplification factors (multiples of the input precision) for the
# Jacobian entries, the next-layer mean and the singular value on Omega.
ERROR_FACTORS = {"J11": 6, "J12": 78, "J21": 189, "J22": 405, "mu_next": 52, "S": 292}


class ConfigError(ValueError):
    """Inconsistent domain/grid configuration."""


Interval = tuple[float, float]


@dataclass(frozen=True)
class DomainBox:
    mu: Interval
    omega: Interval
    nu: Interval
    tau: Interval

    def __post_init__(self):
        for name, (lo, hi) in zip(("mu", "omega", "nu", "tau"), self.intervals):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ConfigError(f"empty or invalid interval for {name}: {(lo, hi)}")
        if self.nu[0] * self.tau[0] <= 0:
            raise ConfigError("nu_min * tau_min must be positive")

    @property
    def intervals(self) -> tuple[Interval, ...]:
        return (tuple(self.mu), tuple(self.omega), tuple(self.nu), tuple(self.tau))

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in self.intervals)

    @classmethod
    def point(cls, mu, omega, nu, tau) -> "DomainBox":
        return cls((mu, mu), (omega, omega), (nu, nu), (tau, tau))

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in zip(("mu", "omega", "nu", "tau"), self.intervals)}

    @classmethod
    def from_dict(cls, d) -> "DomainBox":
        return cls(*(tuple(d[k]) for k in ("mu", "omega", "nu", "tau")))


@dataclass(frozen=True)
class GridSpec:
    delta_mu: float
    delta_omega: float
    delta_nu: float
    delta_tau: float

    def __post_init__(self):
        # zero spacing only describes a degenerate (single-point) axis
        if not all(d >= 0 for d in self.deltas):
            raise ConfigError("grid deltas must be non-negative")

    @property
    def deltas(self) -> tuple[float, ...]:
        return (self.delta_mu, self.delta_omega, self.delta_nu, self.delta_tau)

    @classmethod
    def per_axis(cls, domain: DomainBox, n: int) -> "GridSpec":
        """Grid with ``n`` points on every non-degenerate axis."""
        if n < 2:
            raise ConfigError("need at least two points per axis")
        return cls(*(w / (n - 1) if w > 0 else 1.0 for w in domain.widths))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DerivativeBounds:
    d_mu: float
    d_omega: float
    d_nu: float
    d_tau: float

    def __post_init__(self):
        if not all(b > 0 for b in self.values):
            raise ConfigError("derivative bounds must be positive")

    @property
    def values(self) -> tuple[float, ...]:
        return (self.d_mu, self.d_omega, self.d_nu, self.d_tau)


OMEGA = DomainBox((-0.1, 0.1), (-0.1, 0.1), (0.8, 1.5), (0.95, 1.1))
OMEGA_CONTRACTION = DomainBox((-0.1, 0.1), (-0.1, 0.1), (0.8, 1.5), (0.8, 1.25))
OMEGA_PLUSPLUS = DomainBox((-1.0, 1.0), (-0.1, 0.1), (3.0, 16.0), (0.8, 1.25))
OMEGA1_MINUS = DomainBox((-0.1, 0.1), (-0.1, 0.1), (0.05, 0.16), (0.8, 1.25))
OMEGA2_MINUS = DomainBox((-0.1, 0.1), (-0.1, 0.1), (0.05, 0.24), (0.9, 1.25))
OMEGA_MINUS = DomainBox((-0.1, 0.1), (-0.1, 0.1), (0.05, 0.24), (0.8, 1.25))

FINE_CONTRACTION_GRID = GridSpec(0.0068097371, 0.0008292885, 0.0009580840, 0.0007323095)
FINE_MU2_GRID = GridSpec(0.001498041, 0.001498041, 0.0004033190, 0.0019065994)

S_DERIVATIVE_BOUNDS = DerivativeBounds(0.32112, 2.63690, 2.28242, 2.98610)
MU_NEXT_DERIVATIVE_BOUNDS = (0.14, 0.14, 0.52, 0.11)
MU_NEXT_ABS_BOUND = 0.289324
MU2_DERIVATIVE_BOUNDS = DerivativeBounds(*(2 * MU_NEXT_ABS_BOUND * b for b in MU_NEXT_DERIVATIVE_BOUNDS))

MAPPED_MOMENT_BOX = ((-0.03106, 0.06773), (0.80009, 1.48617))
DEFAULT_POINTS_PER_AXIS = 40


@dataclass
class VerificationReport:
    """Outcome of one grid verification.

    ``sense`` says which inequality the verdict encodes:
    ``"below"``: extremum + slack + error_budget < bound;
    ``"above"``: extremum - slack - error_budget > bound.
    """

    verdict: str
    extremum: float
    arg_extremum: tuple[float, float, float, float]
    slack: float
    error_budget: float
    points_evaluated: int
    grid: GridSpec
    domain: DomainBox
    bound: float = 1.0
    sense: str = "below"
    kind: str = ""
    details: dict = field(default_factory=dict)
    wall_time_s: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def inequality_holds(self) -> bool:
        if self.sense == "below":
            return self.extremum + self.slack + self.error_budget < self.bound
        return self.extremum - self.slack - self.error_budget > self.bound

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "verdict": self.verdict,
            "extremum": self.extremum,
            "arg_extremum": list(self.arg_extremum),
            "slack": self.slack,
            "error_budget": self.error_budget,
            "bound": self.bound,
            "sense": self.sense,
            "points_evaluated": self.points_evaluated,
            "grid": self.grid.to_dict(),
            "domain": self.domain.to_dict(),
            "details": self.details,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        return cls(
            verdict=d["verdict"],
            extremum=d["extremum"],
            arg_extremum=tuple(d["arg_extremum"]),
            slack=d["slack"],
            error_budget=d["error_budget"],
            points_evaluated=d["points_evaluated"],
            grid=GridSpec(**d["grid"]),
            domain=DomainBox.from_dict(d["domain"]),
            bound=d["bound"],
            sense=d["sense"],
            kind=d.get("kind", ""),
            details=d.get("details", {}),
            wall_time_s=d.get("wall_time_s", 0.0),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))

    def summary(self) -> str:
        op = "<" if self.sense == "below" else ">"
        sign = "+" if self.sense == "below" else "-"
        return (
            f"{self.kind}: {self.verdict.upper()} extremum={self.extremum!r} "
            f"{sign} slack={self.slack:.6g} {sign} budget={self.error_budget:.3g} {op} {self.bound!r} "
            f"at {tuple(round(a, 8) for a in self.arg_extremum)} ({self.points_evaluated} points)"
        )


def error_components(machine_eps: float = MACHINE_EPS) -> dict[str, float]:
    if machine_eps < 0:
        raise ValueError("machine_eps must be non-negative")
    return {k: f * machine_eps for k, f in ERROR_FACTORS.items()}


def error_budget(machine_eps: float = MACHINE_EPS, domain: DomainBox | None = None) -> float:
    """Bound on the floating-point error of one evaluation of S.

    The factor 292 was derived for inputs in Omega (nu*tau >= 0.64); ``domain``
    is accepted for the record only.
    """
    return error_components(machine_eps)["S"]


def mvt_slack(bounds: DerivativeBounds, grid: GridSpec) -> float:
    """Sum of |dF/dx_i| * delta_i: how far F can move between lattice points."""
    return math.fsum(b * d for b, d in zip(bounds.values, grid.deltas))


def lattice_axes(domain: DomainBox, grid: GridSpec) -> tuple[list[np.ndarray], GridSpec]:
    """Closed lattice axes (endpoints included) and the effective spacing.

    Each axis gets the fewest points whose spacing does not exceed the
    requested delta; a degenerate interval yields a single point.
    """
    axes, eff = [], []
    for (lo, hi), d in zip(domain.intervals, grid.deltas):
        width = hi - lo
        if width == 0:
            axes.append(np.array([lo], dtype=float))
            eff.append(0.0)
            continue
        if d <= 0:
            raise ConfigError(f"grid delta must be positive on a non-degenerate axis, got {d}")
        if d > width * (1 + 1e-12):
            raise ConfigError(f"grid delta {d} exceeds interval width {width}")
        n = int(math.ceil(width / d - 1e-9)) + 1
        axes.append(np.linspace(lo, hi, n))
        eff.append(width / (n - 1))
    return axes, GridSpec(*eff)


# ---------------------------------------------------------------------------
# lattice reduction machinery


@dataclass(frozen=True)
class _Extrema:
    max_val: float
    max_idx: tuple
    min_val: float
    min_idx: tuple
    count: int


def _chunks(shape, chunk_points):
    n0, n1, n2, n3 = shape
    block = max(1, chunk_points // max(1, n2 * n3))
    return [(i, j, min(j + block, n1)) for i in range(n0) for j in range(0, n1, block)]


def _eval_chunk(func, axes, chunk):
    i, j0, j1 = chunk
    mu = axes[0][i]
    om, nu, ta = np.meshgrid(axes[1][j0:j1], axes[2], axes[3], indexing="ij")
    vals = np.asarray(func(mu, om, nu, ta), dtype=float)
    vals = np.broadcast_to(vals, om.shape)
    if np.isnan(vals).any():
        raise DomainError("objective produced NaN on the lattice")
    kmax = int(np.argmax(vals))
    kmin = int(np.argmin(vals))
    imax = np.unravel_index(kmax, vals.shape)
    imin = np.unravel_index(kmin, vals.shape)
    return _Extrema(
        float(vals.flat[kmax]),
        (i, j0 + int(imax[0]), int(imax[1]), int(imax[2])),
        float(vals.flat[kmin]),
        (i, j0 + int(imin[0]), int(imin[1]), int(imin[2])),
        vals.size,
    )


def lattice_extrema(func: Callable, axes, workers: int = 1, chunk_points: int = 1 << 20) -> _Extrema:
    """Max/min of ``func`` over the tensor lattice spanned by ``axes``.

    ``func(mu, omega, nu, tau)`` must broadcast and be picklable when
    ``workers > 1``. Ties resolve to the first point in C order.
    """
    shape = tuple(len(a) for a in axes)
    chunks = _chunks(shape, chunk_points)
    work = partial(_eval_chunk, func, axes)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks, chunksize=max(1, len(chunks) // (4 * workers))))
    else:
        results = [work(c) for c in chunks]
    best = results[0]
    mx, mxi, mn, mni, count = best.max_val, best.max_idx, best.min_val, best.min_idx, 0
    for r in results:
        count += r.count
        if r.max_val > mx:
            mx, mxi = r.max_val, r.max_idx
        if r.min_val < mn:
            mn, mni = r.min_val, r.min_idx
    return _Extrema(mx, mxi, mn, mni, count)


def _point(axes, idx) -> tuple[float, float, float, float]:
    return tuple(float(a[i]) for a, i in zip(axes, idx))


def _refine_axes(domain: DomainBox, eff: GridSpec, center, cells: int = 2, factor: int = 20):
    axes = []
    for (lo, hi), d, c in zip(domain.intervals, eff.deltas, center):
        if d == 0:
            axes.append(np.array([c]))
            continue
        a, b = max(lo, c - cells * d), min(hi, c + cells * d)
        n = int(round((b - a) / (d / factor))) + 1
        axes.append(np.linspace(a, b, max(n, 2)))
    return axes


def _optimize(func, domain, grid, mode, workers, refine):
    axes, eff = lattice_axes(domain, grid)
    ext = lattice_extrema(func, axes, workers)
    if mode == "max":
        val, arg = ext.max_val, _point(axes, ext.max_idx)
    else:
        val, arg = ext.min_val, _point(axes, ext.min_idx)
    count = ext.count
    details = {"lattice_shape": [len(a) for a in axes], "coarse_extremum": val}
    if refine and count > 1:
        raxes = _refine_axes(domain, eff, arg)
        rext = lattice_extrema(func, raxes, workers)
        count += rext.count
        rval = rext.max_val if mode == "max" else rext.min_val
        ridx = rext.max_idx if mode == "max" else rext.min_idx
        details["refined_extremum"] = rval
        details["refined_shape"] = [len(a) for a in raxes]
        if (rval > val) if mode == "max" else (rval < val):
            val, arg = rval, _point(raxes, ridx)
    return val, arg, count, eff, details


def sample_box(domain: DomainBox, n: int, seed: int) -> np.ndarray:
    """``n`` uniform points in the box as an (n, 4) array (Philox stream)."""
    rng = np.random.Generator(np.random.Philox(seed))
    lo = np.array([iv[0] for iv in domain.intervals])
    hi = np.array([iv[1] for iv in domain.intervals])
    return lo + (hi - lo) * rng.random((n, 4))


def _sampled(func, domain, samples, seed, mode):
    pts = sample_box(domain, samples, seed)
    vals = np.asarray(func(*pts.T), dtype=float)
    k = int(np.argmax(vals) if mode == "max" else np.argmin(vals))
    return float(vals[k]), tuple(float(v) for v in pts[k]), vals


def _finish(kind, val, arg, slack, budget, count, eff, domain, bound, sense, details, t0):
    rep = VerificationReport(
        verdict="fail",
        extremum=val,
        arg_extremum=arg,
        slack=slack,
        error_budget=budget,
        points_evaluated=count,
        grid=eff,
        domain=domain,
        bound=bound,
        sense=sense,
        kind=kind,
        details=details,
    )
    rep.verdict = "pass" if rep.inequality_holds() else "fail"
    rep.wall_time_s = time.perf_counter() - t0
    return rep


def _default_grid(domain, grid):
    return grid if grid is not None else GridSpec.per_axis(domain, DEFAULT_POINTS_PER_AXIS)


# ---------------------------------------------------------------------------
# objectives (module level so they pickle)


def _s_field(mu, omega, nu, tau, lam, alpha):
    return spectral_norm_field(mu, omega, nu, tau, lam, alpha)


def _mu_field(mu, omega, nu, tau, lam, alpha):
    return mean_next(mu, omega, nu, tau, lam, alpha)


def _xi_field(mu, omega, nu, tau, lam, alpha):
    return next_moments(mu, omega, nu, tau, lam, alpha)[1]


def _nu_field(mu, omega, nu, tau, lam, alpha):
    return next_moments(mu, omega, nu, tau, lam, alpha)[2]


def _xi_minus_nu(mu, omega, nu, tau, lam, alpha):
    return next_moments(mu, omega, nu, tau, lam, alpha)[1] - nu


def _nu_gain(mu, omega, nu, tau, lam, alpha):
    return next_moments(mu, omega, nu, tau, lam, alpha)[2] - nu


def _mu_squared(mu, omega, nu, tau, lam, alpha):
    return mean_next(mu, omega, nu, tau, lam, alpha) ** 2


# ---------------------------------------------------------------------------
# verifiers


def verify_contraction(
    domain: DomainBox = OMEGA_CONTRACTION,
    grid: GridSpec | None = None,
    bounds: DerivativeBounds = S_DERIVATIVE_BOUNDS,
    p: SeluParams = SELU_01,
    *,
    workers: int = 1,
    refine: bool = True,
    machine_eps: float = MACHINE_EPS,
) -> VerificationReport:
    """Largest singular value S of the Jacobian stays below one on ``domain``.

    Passes iff max_lattice S + sum(bounds_i * delta_i) + 292 eps < 1.
    """
    t0 = time.perf_counter()
    grid = _default_grid(domain, grid)
    func = partial(_s_field, lam=p.lam, alpha=p.alpha)
    val, arg, count, eff, details = _optimize(func, domain, grid, "max", workers, refine)
    slack = mvt_slack(bounds, eff)
    details["requested_grid"] = grid.to_dict()
    details["derivative_bounds"] = list(bounds.values)
    return _finish("contraction", val, arg, slack, error_budget(machine_eps, domain), count, eff,
                   domain, 1.0, "below", details, t0)


def verify_domain_mapping(
    moment_box: tuple[Interval, Interval] = ((-0.1, 0.1), (0.8, 1.5)),
    w_box: tuple[Interval, Interval] = ((-0.1, 0.1), (0.95, 1.1)),
    grid: GridSpec | None = None,
    p: SeluParams = SELU_01,
    *,
    target: tuple[Interval, Interval] = MAPPED_MOMENT_BOX,
    atol: float = 1e-6,
    workers: int = 1,
    machine_eps: float = MACHINE_EPS,
) -> VerificationReport:
    """Image of the (mu, nu) box under the map lies inside ``target``.

    The quoted target endpoints are rounded to five decimals, hence ``atol``.
    The report extremum is the smallest signed margin (negative = outside);
    individual extrema and their locations are in ``details``.
    """
    (w_lo, w_hi), (t_lo, t_hi) = w_box
    if w_lo < -0.1 or w_hi > 0.1 or t_lo < 0.95 or t_hi > 1.1:
        raise ConfigError("w_box must lie within omega in [-0.1, 0.1], tau in [0.95, 1.1]")
    t0 = time.perf_counter()
    domain = DomainBox(moment_box[0], w_box[0], moment_box[1], w_box[1])
    grid = _default_grid(domain, grid)
    axes, eff = lattice_axes(domain, grid)
    details: dict = {"target": [list(target[0]), list(target[1])], "atol": atol}
    count = 0
    for name, f in (("mu_next", _mu_field), ("xi_next", _xi_field), ("nu_next", _nu_field)):
        ext = lattice_extrema(partial(f, lam=p.lam, alpha=p.alpha), axes, workers)
        count += ext.count
        details[f"{name}_min"] = ext.min_val
        details[f"{name}_argmin"] = list(_point(axes, ext.min_idx))
        details[f"{name}_max"] = ext.max_val
        details[f"{name}_argmax"] = list(_point(axes, ext.max_idx))
    margins = {
        "mu_next_min": details["mu_next_min"] - target[0][0],
        "mu_next_max": target[0][1] - details["mu_next_max"],
        "nu_next_min": details["nu_next_min"] - target[1][0],
        "nu_next_max": target[1][1] - details["nu_next_max"],
    }
    details["margins"] = margins
    worst = min(margins, key=margins.get)
    arg = tuple(details[worst.replace("_min", "_argmin").replace("_max", "_argmax")])
    details["worst"] = worst
    details["strictly_inside"] = all(m > 0 for m in margins.values())
    return _finish("domain_mapping", margins[worst], arg, 0.0,
                   ERROR_FACTORS["mu_next"] * machine_eps, count, eff, domain, -atol, "above",
                   details, t0)


def verify_variance_decrease(
    domain: DomainBox = OMEGA_PLUSPLUS,
    grid: GridSpec | None = None,
    p: SeluParams = SELU_01,
    *,
    samples: int = 0,
    seed: int = 0,
    workers: int = 1,
    refine: bool = True,
    machine_eps: float = MACHINE_EPS,
) -> VerificationReport:
    """xi_next - nu < 0 on ``domain`` (large variances shrink)."""
    t0 = time.perf_counter()
    grid = _default_grid(domain, grid)
    func = partial(_xi_minus_nu, lam=p.lam, alpha=p.alpha)
    val, arg, count, eff, details = _optimize(func, domain, grid, "max", workers, refine)
    if samples:
        sval, sarg, _ = _sampled(func, domain, samples, seed, "max")
        details.update(sample_max=sval, sample_argmax=list(sarg), samples=samples, seed=seed)
        count += samples
        if sval > val:
            val, arg = sval, sarg
    return _finish("variance_decrease", val, arg, 0.0, error_budget(machine_eps), count, eff,
                   domain, 0.0, "below", details, t0)


def verify_variance_increase(
    domain: DomainBox = OMEGA1_MINUS,
    grid: GridSpec | None = None,
    p: SeluParams = SELU_01,
    *,
    samples: int = 0,
    seed: int = 0,
    workers: int = 1,
    refine: bool = True,
    machine_eps: float = MACHINE_EPS,
) -> VerificationReport:
    """nu_next - nu > 0 on ``domain`` (small variances grow)."""
    t0 = time.perf_counter()
    grid = _default_grid(domain, grid)
    func = partial(_nu_gain, lam=p.lam, alpha=p.alpha)
    val, arg, count, eff, details = _optimize(func, domain, grid, "min", workers, refine)
    if samples:
        sval, sarg, _ = _sampled(func, domain, samples, seed, "min")
        details.update(sample_min=sval, sample_argmin=list(sarg), samples=samples, seed=seed)
        count += samples
        if sval < val:
            val, arg = sval, sarg
    return _finish("variance_increase", val, arg, 0.0, error_budget(machine_eps), count, eff,
                   domain, 0.0, "above", details, t0)


def _mu2_reduced(axes, lam, alpha):
    # mu_next is strictly increasing in y = mu*omega, so for each nu*tau the
    # lattice maximum of mu_next^2 sits at the smallest or largest product.
    mu_ax, om_ax, nu_ax, ta_ax = axes
    prods = np.multiply.outer(mu_ax, om_ax)
    i_lo = np.unravel_index(int(np.argmin(prods)), prods.shape)
    i_hi = np.unravel_index(int(np.argmax(prods)), prods.shape)
    nu_g, ta_g = np.meshgrid(nu_ax, ta_ax, indexing="ij")
    best, best_idx, evals = -np.inf, None, 0
    for i_mu, i_om in (i_lo, i_hi):
        vals = mean_next(mu_ax[i_mu], om_ax[i_om], nu_g, ta_g, lam, alpha) ** 2
        evals += vals.size
        k = int(np.argmax(vals))
        if vals.flat[k] > best:
            j_nu, j_ta = np.unravel_index(k, vals.shape)
            best, best_idx = float(vals.flat[k]), (int(i_mu), int(i_om), int(j_nu), int(j_ta))
    return best, _point(axes, best_idx), evals


def verify_mu_squared_bound(
    domain: DomainBox = OMEGA_MINUS,
    grid: GridSpec | None = FINE_MU2_GRID,
    p: SeluParams = SELU_01,
    *,
    bounds: DerivativeBounds = MU2_DERIVATIVE_BOUNDS,
    limit: float = 0.005,
    method: str = "reduced",
    refine: bool = True,
    workers: int = 1,
    machine_eps: float = MACHINE_EPS,
) -> VerificationReport:
    """(mu_next)^2 stays below ``limit`` on the low-variance domain.

    ``method="reduced"`` uses the monotonicity of mu_next in mu*omega to
    evaluate only the extreme products of the (mu, omega) lattice; the result
    equals the brute-force lattice maximum (``method="full"``).
    """
    t0 = time.perf_counter()
    grid = _default_grid(domain, grid)
    axes, eff = lattice_axes(domain, grid)
    lattice_points = int(np.prod([len(a) for a in axes]))
    details: dict = {"lattice_shape": [len(a) for a in axes], "lattice_points": lattice_points,
                     "method": method}
    if method == "reduced":
        val, arg, count = _mu2_reduced(axes, p.lam, p.alpha)
    elif method == "full":
        func = partial(_mu_squared, lam=p.lam, alpha=p.alpha)
        ext = lattice_extrema(func, axes, workers)
        val, arg, count = ext.max_val, _point(axes, ext.max_idx), ext.count
    else:
        raise ConfigError(f"unknown method {method!r}")
    details["coarse_extremum"] = val
    if refine:
        raxes = _refine_axes(domain, eff, arg)
        if method == "reduced":
            rval, rarg, rcount = _mu2_reduced(raxes, p.lam, p.alpha)
        else:
            rext = lattice_extrema(partial(_mu_squared, lam=p.lam, alpha=p.alpha), raxes, workers)
            rval, rarg, rcount = rext.max_val, _point(raxes, rext.max_idx), rext.count
        count += rcount
        details["refined_extremum"] = rval
        details["refined_argmax"] = list(rarg)
        if rval > val:
            val, arg = rval, rarg
    slack = mvt_slack(bounds, eff)
    details["derivative_bounds"] = list(bounds.values)
    return _finish("mu_squared", val, arg, slack, ERROR_FACTORS["S"] * machine_eps, count, eff,
                   domain, limit, "below", details, t0)


# ---------------------------------------------------------------------------
# auxiliary checks


def recheck_derivative_bounds(
    domain: DomainBox = OMEGA_CONTRACTION,
    n: int = 12,
    bounds: DerivativeBounds = S_DERIVATIVE_BOUNDS,
    p: SeluParams = SELU_01,
    h: float = 1e-6,
) -> dict[str, float]:
    """Maximise |dS/dx_i| by central differences on an ``n``-point lattice.

    Warns when a numeric maximum exceeds the corresponding reference bound.
    """
    axes = [np.linspace(lo, hi, n) for lo, hi in domain.intervals]
    pts = np.meshgrid(*axes, indexing="ij")
    out = {}
    for k, name in enumerate(("mu", "omega", "nu", "tau")):
        plus = list(pts)
        minus = list(pts)
        plus[k] = pts[k] + h
        minus[k] = pts[k] - h
        d = (spectral_norm_field(*plus, p.lam, p.alpha) - spectral_norm_field(*minus, p.lam, p.alpha)) / (2 * h)
        out[name] = float(np.max(np.abs(d)))
        if out[name] > bounds.values[k]:
            warnings.warn(
                f"numeric max |dS/d{name}| = {out[name]:.6g} exceeds bound {bounds.values[k]}",
                RuntimeWarning,
                stacklevel=2,
            )
    return out


def xi_nu_derivative_lower_bound(
    nu_range: Interval, tau_min: float, mu_omega_max: float = 0.01,
    lam: float = LAMBDA_01, alpha: float = ALPHA_01,
) -> float:
    """Corner lower bound on d(xi_next)/d(nu) over a low-variance box.

    Each factor is set to the box corner that makes it smallest: the
    exponential prefactor and erfc(-y/...) at the smallest nu*tau, the
    scaled-erfc difference at the largest nu with the smallest tau.
    """
    from scipy.special import erfc, erfcx

    y = mu_omega_max
    x_lo = nu_range[0] * tau_min
    x_hi = nu_range[1] * tau_min
    s_hi = math.sqrt(2 * x_hi)
    inner = -(erfcx((x_hi + y) / s_hi) - 2.0 * erfcx((2 * x_hi + y) / s_hi))
    return 0.5 * tau_min * math.exp(-y * y / (2 * x_lo)) * lam**2 * (
        alpha**2 * inner - erfc(-y / math.sqrt(2 * x_lo)) + 2.0
    )


def write_lattice_csv(path, domain: DomainBox, grid: GridSpec, p: SeluParams = SELU_01) -> int:
    """Dump (mu, omega, nu, tau, S) rows for every lattice point; returns row count."""
    axes, _ = lattice_axes(domain, grid)
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu", "omega", "nu", "tau", "S"])
        for mu in axes[0]:
            om, nu, ta = np.meshgrid(axes[1], axes[2], axes[3], indexing="ij")
            s = spectral_norm_field(mu, om, nu, ta, p.lam, p.alpha)
            for vals in zip(np.broadcast_to(mu, om.shape).ravel(), om.ravel(), nu.ravel(),
                            ta.ravel(), s.ravel()):
                writer.writerow([repr(float(v)) for v in vals])
                rows += 1
    return rows
