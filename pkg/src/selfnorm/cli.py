"""Command-line entry point: ``selfnorm <subcommand> [options]``.

Exit codes: 0 success or verification pass, 1 verification fail,
2 usage or domain error, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import verify as V
from .jacobian import jacobian_H, jacobian_J, singular_values_2x2, spectral_norm_S
from .moments import (
    SELU_01,
    ConvergenceError,
    DivergenceError,
    MomentPair,
    SeluParams,
    WeightMoments,
    map_moments,
    next_moments,
    solve_selu_params,
)
from .primitives import alpha_dropout, make_dropout_config, selu
from .simulation import (
    NetSpec,
    TrainingDivergedError,
    make_blobs,
    make_spiral,
    make_xor,
    propagate_moments_mc,
    train_sgd,
)
from .special import DomainError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class DatasetError(ValueError):
    """Malformed dataset file; ``row`` is the 1-based line number, if known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    seed: int
    output: str | None
    workers: int
    fmt: str

    def __post_init__(self):
        if self.workers < 1:
            raise V.ConfigError("worker count must be >= 1")
        if self.fmt not in ("json", "csv"):
            raise V.ConfigError(f"unknown output format {self.fmt!r}")


# ---------------------------------------------------------------------------
# data products


def ingest_csv_dataset(path, label_column) -> tuple[np.ndarray, np.ndarray]:
    """Read a CSV with a header row and numeric feature columns.

    ``label_column`` is a header name or a 0-based index. Feature columns are
    standardised to zero mean and unit variance (constant columns become
    zeros); labels (numeric or text) are encoded as 0..k-1 in sorted order.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError("file has no header")
    header = rows[0]
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if label_column not in header:
            raise DatasetError(f"label column {label_column!r} not in header")
        li = header.index(label_column)
    else:
        li = int(label_column)
        if not -len(header) <= li < len(header):
            raise DatasetError(f"label column index {li} out of range")
        li %= len(header)
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"expected {len(header)} fields, got {len(row)}", lineno)
        cells = list(row)
        labels.append(cells.pop(li).strip())
        try:
            feats.append([float(c) for c in cells])
        except ValueError as exc:
            raise DatasetError(f"non-numeric cell ({exc})", lineno) from None
    if not feats:
        raise DatasetError("dataset has no data rows")
    x = np.array(feats, dtype=float).reshape(len(feats), len(header) - 1)
    sd = x.std(axis=0)
    x = np.where(sd > 0, (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0), 0.0)
    try:
        keys = np.array([float(v) for v in labels])
    except ValueError:
        keys = np.array(labels)
    _, y = np.unique(keys, return_inverse=True)
    return x, y


def vector_field_rows(mu_axis, nu_axis, w: WeightMoments = WeightMoments(0.0, 1.0),
                      p: SeluParams = SELU_01) -> np.ndarray:
    """Array of (mu, nu, mu_next - mu, nu_next - nu) over the product grid."""
    mu, nu = np.meshgrid(np.asarray(mu_axis, float), np.asarray(nu_axis, float), indexing="ij")
    m_next, _, v_next = next_moments(mu, w.omega, nu, w.tau, p.lam, p.alpha)
    return np.column_stack([mu.ravel(), nu.ravel(), (m_next - mu).ravel(), (v_next - nu).ravel()])


def emit_vector_field(mu_axis, nu_axis, w: WeightMoments = WeightMoments(0.0, 1.0),
                      p: SeluParams = SELU_01, path=None) -> np.ndarray:
    rows = vector_field_rows(mu_axis, nu_axis, w, p)
    if path is not None:
        _write_table(path, ["mu", "nu", "dmu", "dnu"], rows)
    return rows


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in rows:
            writer.writerow([repr(float(v)) for v in r])


def _write_kv_csv(path, d: dict):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value"])
        for k, v in d.items():
            writer.writerow([k, json.dumps(v)])


def _emit(cfg: CliConfig, payload: dict, csv_writer=None):
    if cfg.output is None:
        return
    if cfg.fmt == "json":
        with open(cfg.output, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    elif csv_writer is not None:
        csv_writer(cfg.output)
    else:
        _write_kv_csv(cfg.output, payload)


# ---------------------------------------------------------------------------
# subcommands


def _params(a) -> SeluParams:
    if a.lam is None and a.alpha is None:
        return SELU_01
    return SeluParams(a.lam if a.lam is not None else SELU_01.lam,
                      a.alpha if a.alpha is not None else SELU_01.alpha)


def _box(a, default: V.DomainBox) -> V.DomainBox:
    return V.DomainBox(
        tuple(a.mu_range) if a.mu_range else default.mu,
        tuple(a.omega_range) if a.omega_range else default.omega,
        tuple(a.nu_range) if a.nu_range else default.nu,
        tuple(a.tau_range) if a.tau_range else default.tau,
    )


def _grid(a, domain, default_points=None):
    if a.deltas:
        return V.GridSpec(*a.deltas)
    n = a.points or default_points
    return V.GridSpec.per_axis(domain, n) if n else None


def _report_exit(cfg, report: V.VerificationReport) -> int:
    _emit(cfg, report.to_dict())
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_solve_fixed_point(cfg, a):
    p = solve_selu_params(MomentPair(a.mu, a.nu), WeightMoments(a.omega, a.tau))
    r = map_moments(MomentPair(a.mu, a.nu), WeightMoments(a.omega, a.tau), p)
    _emit(cfg, {"mu": a.mu, "nu": a.nu, "omega": a.omega, "tau": a.tau, "lam": p.lam,
                "alpha": p.alpha, "residual": max(abs(r.mu_next - a.mu), abs(r.nu_next - a.nu))})
    print(f"λ={p.lam:.4f} α={p.alpha:.4f} (lam={p.lam!r} alpha={p.alpha!r})")
    return EXIT_OK


def cmd_map(cfg, a):
    r = map_moments(MomentPair(a.mu, a.nu), WeightMoments(a.omega, a.tau), _params(a))
    _emit(cfg, {"mu_next": r.mu_next, "xi_next": r.xi_next, "nu_next": r.nu_next})
    print(f"μ̃={r.mu_next:.6g} ξ̃={r.xi_next:.6g} ν̃={r.nu_next:.6g}")
    return EXIT_OK


def cmd_jacobian(cfg, a):
    m, w, p = MomentPair(a.mu, a.nu), WeightMoments(a.omega, a.tau), _params(a)
    j, h = jacobian_J(m, w, p), jacobian_H(m, w, p)
    sv = singular_values_2x2(h.j11, h.j12, h.j21, h.j22)
    s = spectral_norm_S(a.mu, a.omega, a.nu, a.tau, p)
    _emit(cfg, {"J": j.as_array().tolist(), "H": h.as_array().tolist(), "s1": sv.s1, "s2": sv.s2, "S": s})
    print(f"H=[[{h.j11:.6f}, {h.j12:.6f}], [{h.j21:.6f}, {h.j22:.6f}]] S={s:.6f}")
    return EXIT_OK


def cmd_verify_contraction(cfg, a):
    domain = _box(a, V.OMEGA_CONTRACTION)
    if a.recheck_bounds:
        numeric = V.recheck_derivative_bounds(domain, p=_params(a))
        print("numeric max |dS/dx|: " + " ".join(f"{k}={v:.5g}" for k, v in numeric.items()))
    grid = V.FINE_CONTRACTION_GRID if a.fine_grid else _grid(a, domain)
    rep = V.verify_contraction(domain, grid, p=_params(a), workers=cfg.workers,
                               refine=not a.no_refine)
    return _report_exit(cfg, rep)


def cmd_verify_domain(cfg, a):
    moment_box = (tuple(a.mu_range or (-0.1, 0.1)), tuple(a.nu_range or (0.8, 1.5)))
    w_box = (tuple(a.omega_range or (-0.1, 0.1)), tuple(a.tau_range or (0.95, 1.1)))
    domain = V.DomainBox(moment_box[0], w_box[0], moment_box[1], w_box[1])
    rep = V.verify_domain_mapping(moment_box, w_box, _grid(a, domain, 30), _params(a),
                                  workers=cfg.workers)
    return _report_exit(cfg, rep)


def cmd_verify_theorem2(cfg, a):
    domain = _box(a, V.OMEGA_PLUSPLUS)
    rep = V.verify_variance_decrease(domain, _grid(a, domain), _params(a), samples=a.samples,
                                     seed=cfg.seed, workers=cfg.workers, refine=not a.no_refine)
    return _report_exit(cfg, rep)


def cmd_verify_theorem3(cfg, a):
    reports = []
    for default in (V.OMEGA1_MINUS, V.OMEGA2_MINUS):
        domain = _box(a, default)
        reports.append(V.verify_variance_increase(
            domain, _grid(a, domain), _params(a), samples=a.samples, seed=cfg.seed,
            workers=cfg.workers, refine=not a.no_refine))
    _emit(cfg, {"reports": [r.to_dict() for r in reports],
                "verdict": "pass" if all(r.passed for r in reports) else "fail"})
    for r in reports:
        print(r.summary())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_verify_mu2(cfg, a):
    domain = _box(a, V.OMEGA_MINUS)
    grid = _grid(a, domain) or V.FINE_MU2_GRID
    rep = V.verify_mu_squared_bound(domain, grid, _params(a), method=a.method,
                                    refine=not a.no_refine, workers=cfg.workers)
    return _report_exit(cfg, rep)


def _w_mode(a):
    if a.w_mode == "perturbed":
        return ("perturbed", a.omega, a.tau)
    return a.w_mode


def cmd_simulate(cfg, a):
    trace = propagate_moments_mc(a.depth, a.width, a.samples, _w_mode(a), cfg.seed, _params(a))
    _emit(cfg, trace.to_dict(), trace.to_csv)
    last = trace.layers[-1]
    print(f"layer {last.layer}: mean={last.mean:.5f} var={last.var:.5f} "
          f"(predicted {last.pred_mean:.5f}, {last.pred_var:.5f})")
    return EXIT_OK


def _dataset(a, seed):
    makers = {"spiral": make_spiral, "blobs": make_blobs, "xor": make_xor}
    if a.dataset in makers:
        return makers[a.dataset](n=a.n_points, seed=seed)
    return ingest_csv_dataset(a.dataset, a.label_column)


def cmd_train(cfg, a):
    data = _dataset(a, cfg.seed)
    spec = NetSpec(a.depth, a.width, _params(a))
    try:
        hist = train_sgd(spec, data, a.lr, a.epochs, a.dropout_q, cfg.seed, a.batch_size)
    except TrainingDivergedError as exc:
        _emit(cfg, exc.history.to_dict(), exc.history.to_csv)
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(cfg, hist.to_dict(), hist.to_csv)
    print(f"epochs={len(hist) - 1} loss {hist.loss[0]:.4f} -> {hist.loss[-1]:.4f} "
          f"grad ratio in [{min(hist.grad_ratio):.3g}, {max(hist.grad_ratio):.3g}]")
    return EXIT_OK


def cmd_vector_field(cfg, a):
    mr, nr = a.mu_range or (-0.1, 0.1), a.nu_range or (0.8, 1.5)
    rows = vector_field_rows(np.linspace(*mr, a.n), np.linspace(*nr, a.n),
                             WeightMoments(a.omega, a.tau), _params(a))
    header = ["mu", "nu", "dmu", "dnu"]
    _emit(cfg, {"columns": header, "rows": rows.tolist()},
          lambda path: _write_table(path, header, rows))
    print(f"{len(rows)} rows, max |displacement| = {np.max(np.hypot(rows[:, 2], rows[:, 3])):.4g}")
    return EXIT_OK


def cmd_selu(cfg, a):
    p = _params(a)
    x = np.asarray(a.x, dtype=float)
    payload = {"x": x.tolist(), "selu": np.atleast_1d(selu(x, p)).tolist()}
    if a.dropout_q is not None:
        dc = make_dropout_config(a.dropout_q, p)
        payload.update(dropout_a=dc.a, dropout_b=dc.b, alpha_prime=dc.alpha_prime,
                       dropped=np.atleast_1d(alpha_dropout(x, dc, cfg.seed)).tolist())
    _emit(cfg, payload)
    print(" ".join(f"{v:.6g}" for v in payload["selu"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(sp):
    sp.add_argument("--output", "-o", help="report path")
    sp.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=int(os.environ.get("SNN_WORKERS", "1")))
    sp.add_argument("--config", help="JSON file with option defaults")
    sp.add_argument("--lam", type=float)
    sp.add_argument("--alpha", type=float)


def _moments_args(sp, mu=0.0, omega=0.0, nu=1.0, tau=1.0):
    sp.add_argument("--mu", type=float, default=mu)
    sp.add_argument("--omega", type=float, default=omega)
    sp.add_argument("--nu", type=float, default=nu)
    sp.add_argument("--tau", type=float, default=tau)


def _domain_args(sp, grid=True):
    for name in ("mu", "omega", "nu", "tau"):
        sp.add_argument(f"--{name}-range", nargs=2, type=float, metavar=("LO", "HI"))
    if grid:
        sp.add_argument("--points", type=int, help="lattice points per axis")
        sp.add_argument("--deltas", nargs=4, type=float, metavar=("DMU", "DOMEGA", "DNU", "DTAU"))
        sp.add_argument("--no-refine", action="store_true")


COMMANDS = {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfnorm", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_):
        sp = subs.add_parser(name, help=help_)
        _common(sp)
        COMMANDS[name] = func
        return sp

    _moments_args(add("solve-fixed-point", cmd_solve_fixed_point, "SELU parameters for a fixed point"))
    _moments_args(add("map", cmd_map, "apply the moment map once"))
    _moments_args(add("jacobian", cmd_jacobian, "Jacobians J, H and spectral norm"))

    sp = add("verify-contraction", cmd_verify_contraction, "grid check that S < 1")
    _domain_args(sp)
    sp.add_argument("--fine-grid", action="store_true", help="use the fine reference deltas")
    sp.add_argument("--recheck-bounds", action="store_true")

    _domain_args(add("verify-domain", cmd_verify_domain, "image of the moment box"))

    for name, func, help_ in (
        ("verify-theorem2", cmd_verify_theorem2, "large variances decrease"),
        ("verify-theorem3", cmd_verify_theorem3, "small variances increase"),
    ):
        sp = add(name, func, help_)
        _domain_args(sp)
        sp.add_argument("--samples", type=int, default=0, help="extra random interior points")

    sp = add("verify-mu2", cmd_verify_mu2, "bound on the squared mapped mean")
    _domain_args(sp)
    sp.add_argument("--method", choices=("reduced", "full"), default="reduced")

    sp = add("simulate", cmd_simulate, "Monte-Carlo moment propagation")
    sp.add_argument("--depth", type=int, default=32)
    sp.add_argument("--width", type=int, default=256)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--w-mode", choices=("normalized", "lecun", "perturbed"), default="normalized")
    sp.add_argument("--omega", type=float, default=0.0)
    sp.add_argument("--tau", type=float, default=1.0)

    sp = add("train", cmd_train, "SGD training of a deep SELU network")
    sp.add_argument("--dataset", default="spiral", help="spiral, blobs, xor or a CSV path")
    sp.add_argument("--label-column", default="-1")
    sp.add_argument("--n-points", type=int, default=2000)
    sp.add_argument("--depth", type=int, default=16)
    sp.add_argument("--width", type=int, default=128)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--dropout-q", type=float, default=1.0)

    sp = add("vector-field", cmd_vector_field, "CSV of moment-map displacements")
    sp.add_argument("--mu-range", nargs=2, type=float)
    sp.add_argument("--nu-range", nargs=2, type=float)
    sp.add_argument("--n", type=int, default=21)
    sp.add_argument("--omega", type=float, default=0.0)
    sp.add_argument("--tau", type=float, default=1.0)

    sp = add("selu", cmd_selu, "evaluate SELU (and alpha dropout)")
    sp.add_argument("x", nargs="+", type=float)
    sp.add_argument("--dropout-q", type=float)
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # config values become defaults, so explicit flags still win
        with open(args.config) as fh:
            conf = json.load(fh)
        if not isinstance(conf, dict):
            raise V.ConfigError("config file must hold a JSON object")
        conf = {k.replace("-", "_"): v for k, v in conf.items()}
        sub = parser._subparsers._group_actions[0].choices[args.subcommand]
        unknown = set(conf) - {act.dest for act in sub._actions}
        if unknown:
            raise V.ConfigError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
    return args


def run_cli(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except (V.ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = CliConfig(args.subcommand, args.seed, args.output, args.workers, args.fmt)
        return COMMANDS[args.subcommand](cfg, args)
    except (DomainError, V.ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, DivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli())
