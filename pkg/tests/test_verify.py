import csv
import warnings
from functools import partial

import numpy as np
import pytest

from selfnorm import verify as V
from selfnorm.moments import SELU_01, mean_next


def test_error_budget_exact():
    assert V.error_budget(2.0**-52) == 292 * 2.0**-52 == 6.483702463810914e-14
    assert V.error_budget(2.0**-52) < 1e-13
    assert V.error_budget(0.0) == 0.0
    comps = V.error_components()
    assert comps["J11"] < 1.4e-15
    assert comps == {k: f * 2.0**-52 for k, f in {"J11": 6, "J12": 78, "J21": 189, "J22": 405,
                                                    "mu_next": 52, "S": 292}.items()}
    with pytest.raises(ValueError):
        V.error_budget(-1.0)


def test_mvt_slack_with_fine_deltas():
    slack = V.mvt_slack(V.S_DERIVATIVE_BOUNDS, V.FINE_CONTRACTION_GRID)
    assert slack < 0.008747
    assert slack == pytest.approx(0.008746993104432, abs=1e-15)


def test_types_validate():
    with pytest.raises(V.ConfigError):
        V.DomainBox((1.0, 0.0), (0, 0), (1, 1), (1, 1))
    with pytest.raises(V.ConfigError):
        V.DomainBox((0, 0), (0, 0), (0.0, 1.0), (1, 1))
    with pytest.raises(V.ConfigError):
        V.GridSpec(-0.1, 0.1, 0.1, 0.1)
    with pytest.raises(V.ConfigError):
        V.DerivativeBounds(0.0, 1.0, 1.0, 1.0)


def test_lattice_includes_endpoints():
    axes, eff = V.lattice_axes(V.OMEGA, V.GridSpec(0.03, 0.1, 0.7, 0.05))
    assert [a[0] for a in axes] == [-0.1, -0.1, 0.8, 0.95]
    assert [a[-1] for a in axes] == [0.1, 0.1, 1.5, 1.1]
    assert [len(a) for a in axes] == [8, 3, 2, 4]
    assert all(e <= d * (1 + 1e-12) for e, d in zip(eff.deltas, (0.03, 0.1, 0.7, 0.05)))


def test_lattice_rejects_oversized_delta():
    with pytest.raises(V.ConfigError):
        V.lattice_axes(V.OMEGA, V.GridSpec(0.5, 0.1, 0.1, 0.1))
    with pytest.raises(V.ConfigError):
        V.lattice_axes(V.OMEGA, V.GridSpec(0.0, 0.1, 0.1, 0.1))


def test_contraction_single_point():
    rep = V.verify_contraction(V.DomainBox.point(0.0, 0.0, 1.0, 1.0), V.GridSpec(0, 0, 0, 0))
    assert rep.extremum == pytest.approx(0.7877, abs=1e-4)
    assert rep.slack == 0.0
    assert rep.passed and rep.points_evaluated == 1


def test_contraction_coarse_grid_is_honest():
    rep = V.verify_contraction(grid=V.GridSpec.per_axis(V.OMEGA_CONTRACTION, 20))
    assert rep.extremum <= 0.9912524171058772 + 1e-9
    assert rep.extremum == pytest.approx(0.9890262718393548, abs=1e-12)
    assert not rep.passed
    assert rep.inequality_holds() is False
    assert rep.arg_extremum in {(-0.1, -0.1, 0.8, 1.25), (0.1, 0.1, 0.8, 1.25)}


def test_report_round_trip():
    rep = V.verify_contraction(grid=V.GridSpec.per_axis(V.OMEGA_CONTRACTION, 6))
    back = V.VerificationReport.from_json(rep.to_json())
    assert back == rep
    assert back.to_dict()["wall_time_s"] == rep.wall_time_s
    assert set(rep.to_dict()) >= {"verdict", "extremum", "arg_extremum", "slack", "error_budget",
                                  "points_evaluated", "grid", "domain", "wall_time_s"}


def test_verdict_recomputable():
    for rep in (
        V.verify_contraction(grid=V.GridSpec.per_axis(V.OMEGA_CONTRACTION, 6)),
        V.verify_variance_increase(grid=V.GridSpec.per_axis(V.OMEGA1_MINUS, 6)),
    ):
        d = rep.to_dict()
        if d["sense"] == "below":
            holds = d["extremum"] + d["slack"] + d["error_budget"] < d["bound"]
        else:
            holds = d["extremum"] - d["slack"] - d["error_budget"] > d["bound"]
        assert (d["verdict"] == "pass") == holds


def test_worker_count_does_not_change_report():
    grid = V.GridSpec.per_axis(V.OMEGA_CONTRACTION, 12)
    a = V.verify_contraction(grid=grid, workers=1)
    b = V.verify_contraction(grid=grid, workers=2)
    assert a == b


def test_chunked_reduction_matches_single_chunk():
    axes, _ = V.lattice_axes(V.OMEGA, V.GridSpec.per_axis(V.OMEGA, 9))
    func = partial(V._s_field, lam=SELU_01.lam, alpha=SELU_01.alpha)
    small = V.lattice_extrema(func, axes, chunk_points=7)
    big = V.lattice_extrema(func, axes, chunk_points=1 << 22)
    assert small == big


def test_refinement_monotonicity():
    coarse = V.GridSpec.per_axis(V.OMEGA_CONTRACTION, 9)
    fine = V.GridSpec(*(d / 2 for d in coarse.deltas))
    a = V.verify_contraction(grid=coarse, refine=False)
    b = V.verify_contraction(grid=fine, refine=False)
    assert b.extremum >= a.extremum - a.slack


def test_domain_mapping_extrema_at_corners():
    rep = V.verify_domain_mapping(grid=V.GridSpec.per_axis(V.OMEGA, 11))
    d = rep.details
    assert d["mu_next_min"] == pytest.approx(-0.03106, abs=1e-6)
    assert d["mu_next_min"] > -0.03106 - 1e-6
    assert d["mu_next_argmin"] == [-0.1, 0.1, 0.8, 0.95]
    amax = d["xi_next_argmax"]
    assert (amax[0] * amax[1], amax[2], amax[3]) == pytest.approx((0.01, 1.5, 1.1))
    assert d["xi_next_max"] < 1.48617
    assert rep.passed
    assert not d["strictly_inside"]  # the quoted endpoint is rounded


def test_domain_mapping_dense_lattice_inside_image_domain():
    rep = V.verify_domain_mapping(grid=V.GridSpec.per_axis(V.OMEGA, 50))
    d = rep.details
    assert rep.points_evaluated == 3 * 50**4
    assert -0.1 <= d["mu_next_min"] and d["mu_next_max"] <= 0.1
    assert 0.8 <= d["nu_next_min"] and d["nu_next_max"] <= 1.5


def test_domain_mapping_rejects_wide_weight_box():
    with pytest.raises(V.ConfigError):
        V.verify_domain_mapping(w_box=((-0.2, 0.1), (0.95, 1.1)))


def test_variance_decrease():
    rep = V.verify_variance_decrease(grid=V.GridSpec.per_axis(V.OMEGA_PLUSPLUS, 9), samples=2000, seed=3)
    assert rep.passed
    assert rep.extremum == pytest.approx(-0.0180173, abs=1e-6)
    a = rep.arg_extremum
    assert (a[0] * a[1], a[2], a[3]) == pytest.approx((0.1, 3.0, 1.25))
    assert rep.details["sample_max"] < 0


@pytest.mark.parametrize("domain", [V.OMEGA1_MINUS, V.OMEGA2_MINUS])
def test_variance_increase(domain):
    rep = V.verify_variance_increase(domain, V.GridSpec.per_axis(domain, 9), samples=2000, seed=1)
    assert rep.passed and rep.extremum > 0
    assert rep.details["sample_min"] >= rep.extremum


def test_variance_increase_derivative_bounds():
    assert V.xi_nu_derivative_lower_bound((0.05, 0.16), 0.8) > 0.969231
    assert V.xi_nu_derivative_lower_bound((0.05, 0.24), 0.9) > 0.976952


def test_mu_squared_reduced_equals_full():
    grid = V.GridSpec.per_axis(V.OMEGA_MINUS, 9)
    a = V.verify_mu_squared_bound(grid=grid, method="reduced", refine=False)
    b = V.verify_mu_squared_bound(grid=grid, method="full", refine=False)
    assert a.extremum == b.extremum
    assert a.arg_extremum == b.arg_extremum or (
        a.arg_extremum[0] * a.arg_extremum[1] == b.arg_extremum[0] * b.arg_extremum[1]
    )


def test_mu_squared_fine_grid():
    rep = V.verify_mu_squared_bound()
    assert rep.extremum == pytest.approx(0.00451457, abs=1e-7)
    a = rep.arg_extremum
    assert a[2] * a[3] == pytest.approx(0.187342, abs=2e-3)
    assert rep.passed
    assert rep.extremum + rep.slack < 0.005


def test_mu_squared_local_maximum_in_variance():
    x = np.linspace(0.05, 0.4, 35001)
    vals = mean_next(0.1, -0.1, x, 1.0) ** 2
    assert x[np.argmax(vals)] == pytest.approx(0.187342, abs=1e-4)


def test_mu_squared_zero_slice():
    grid = V.GridSpec(0, 0, 0.01, 0.05)
    dom = V.DomainBox((0.0, 0.0), (0.0, 0.0), (0.05, 0.24), (0.8, 1.25))
    rep = V.verify_mu_squared_bound(dom, grid, refine=False)
    axes, _ = V.lattice_axes(dom, grid)
    nu, tau = np.meshgrid(axes[2], axes[3], indexing="ij")
    assert rep.extremum == np.max(mean_next(0.0, 0.0, nu, tau) ** 2)


def test_mu_squared_unknown_method():
    with pytest.raises(V.ConfigError):
        V.verify_mu_squared_bound(grid=V.GridSpec.per_axis(V.OMEGA_MINUS, 5), method="magic")


def test_recheck_derivative_bounds():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        numeric = V.recheck_derivative_bounds(n=8)
    assert all(numeric[k] <= b for k, b in zip(("mu", "omega", "nu", "tau"), V.S_DERIVATIVE_BOUNDS.values))
    with pytest.warns(RuntimeWarning):
        V.recheck_derivative_bounds(n=4, bounds=V.DerivativeBounds(1e-6, 1e-6, 1e-6, 1e-6))


def test_lattice_csv(tmp_path):
    path = tmp_path / "lattice.csv"
    rows = V.write_lattice_csv(path, V.OMEGA, V.GridSpec.per_axis(V.OMEGA, 3))
    assert rows == 81
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["mu", "omega", "nu", "tau", "S"]
    assert len(data) == 82


def test_sample_box_deterministic():
    a = V.sample_box(V.OMEGA, 100, 4)
    assert np.array_equal(a, V.sample_box(V.OMEGA, 100, 4))
    lo = np.array([iv[0] for iv in V.OMEGA.intervals])
    hi = np.array([iv[1] for iv in V.OMEGA.intervals])
    assert np.all((a >= lo) & (a <= hi))
