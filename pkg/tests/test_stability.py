import math
import os

import numpy as np
import pytest

from normalizer.birkhoff import remainder_bound
from normalizer.errors import DomainError
from normalizer.lie import hamiltonian_flow
from normalizer.models import load_model
from normalizer.series import Grading, PoissonSeries
from normalizer.stability import (StabilityQuery, escape_time, neighbourhood_radius, optimal_radius, plot_stability,
                                  stability_curve, stability_curves, stability_radius, stability_time, tau_tilde,
                                  tau_tilde_closed)

FACTORIAL_SQUARED = {r: float(math.factorial(r)) ** 2 for r in range(1, 13)}


def test_escape_time_closed_form():
    assert escape_time(0.1, 0.125, 3, 2.0) == pytest.approx(409.6, rel=1e-14)
    assert escape_time(0.1, 0.125, 3, 0.0) == math.inf


def test_escape_time_domain():
    with pytest.raises(DomainError):
        escape_time(0.1, 0.1, 3, 1.0)
    with pytest.raises(DomainError):
        escape_time(-0.1, 0.2, 3, 1.0)
    with pytest.raises(DomainError):
        escape_time(0.1, 0.2, 3, -1.0)


def test_optimal_radius_maximizes_the_escape_time():
    rng = np.random.default_rng(11)
    for _ in range(20):
        rho0 = 10 ** rng.uniform(-5, -1)
        r = int(rng.integers(1, 10))
        grid = np.linspace(1.0001 * rho0, 3 * rho0, 20001)
        values = [escape_time(rho0, rho, r, 1.0) for rho in grid]
        best = grid[int(np.argmax(values))]
        assert abs(best - optimal_radius(rho0, r)) <= grid[1] - grid[0]


def test_tau_tilde_homogeneity_and_closed_form():
    rng = np.random.default_rng(5)
    for _ in range(20):
        rho0 = 10 ** rng.uniform(-6, -1)
        r = int(rng.integers(1, 12))
        c = rng.uniform(0.1, 10.0)
        expected = c ** (-(r + 1)) * tau_tilde(rho0, r, 1.0)
        assert tau_tilde(c * rho0, r, 1.0) == pytest.approx(expected, rel=1e-13)
        assert tau_tilde_closed(rho0, r, 3.0) == pytest.approx(tau_tilde(rho0, r, 3.0), rel=1e-12)


def test_interior_optimal_order():
    estimate = stability_time(StabilityQuery(1e-2, FACTORIAL_SQUARED, 12))
    assert not estimate.at_boundary
    assert 1 < estimate.r_opt < 12


def test_small_radius_hits_the_maximal_order():
    estimate = stability_time(StabilityQuery(1e-3, FACTORIAL_SQUARED, 12))
    assert estimate.at_boundary
    assert estimate.r_opt == 12


def test_query_validation():
    with pytest.raises(DomainError):
        StabilityQuery(0.0, {1: 1.0})
    with pytest.raises(DomainError):
        StabilityQuery(1e-3, {})
    with pytest.raises(DomainError):
        StabilityQuery(1e-3, {1: -1.0})


def test_stability_curve_changes_slope():
    curve = stability_curve(np.geomspace(1e-6, 1e-1, 101), FACTORIAL_SQUARED, 12)
    assert len(curve) == 101
    assert np.all(np.diff(curve.T) <= 0)
    assert len(curve.slope_changes) >= 1
    assert np.all(np.diff(curve.r_opt) <= 0)
    np.testing.assert_allclose(curve.to_frame()["rho_opt"], curve.rho0 * (curve.r_opt + 2) / (curve.r_opt + 1))


def test_single_radius_gives_one_row(workspace):
    curve = stability_curve([1e-3], {1: 1.0, 2: 4.0})
    assert len(curve) == 1
    path = curve.save()
    assert os.path.exists(path)
    with open(path) as f:
        assert f.readline().startswith("# normalizer")


def test_stability_curve_grid_validation():
    with pytest.raises(DomainError):
        stability_curve([], FACTORIAL_SQUARED)
    with pytest.raises(DomainError):
        stability_curve([1e-2, 1e-3], FACTORIAL_SQUARED)


def test_curves_per_order_stay_below_their_order():
    curves = stability_curves(np.geomspace(1e-5, 1e-1, 21), FACTORIAL_SQUARED, [3, 6])
    assert set(curves) == {3, 6}
    assert curves[3].r_opt.max() <= 3
    assert np.all(curves[6].T >= curves[3].T)


def test_stability_radius():
    curve = stability_curve(np.geomspace(1e-6, 1e-1, 51), FACTORIAL_SQUARED, 12)
    target = 1e10
    radius = stability_radius(curve, target)
    reached = curve.rho0[curve.T >= target]
    assert reached.max() <= radius <= curve.rho0[curve.T < target].min()
    assert stability_radius(curve, 1e300) is None


def test_neighbourhood_radius():
    assert neighbourhood_radius({"xi1": 1.1e-5, "eta1": -2.8e-6}) == 1.1e-5
    with pytest.raises(DomainError):
        neighbourhood_radius({})


def test_neighbourhood_radius_ignores_the_angles():
    assert neighbourhood_radius(load_model("sjs").uncertainties) == 1.1e-5
    with pytest.raises(DomainError):
        neighbourhood_radius({"lambda1": 6.6e-5})


def test_plot_is_written(workspace):
    grid = np.geomspace(1e-6, 1e-1, 31)
    curves = [stability_curve(grid, FACTORIAL_SQUARED, 12)]
    path = plot_stability(curves, "stability/curve.svg", rho_marker=1e-5, T_target=1e10)
    assert os.path.exists(path)
    assert os.path.dirname(path) == str(workspace / "stability")


def test_scaling_the_remainders_keeps_the_optimal_order():
    rng = np.random.default_rng(11)
    for c in (1e-3, 0.5, 7.0, 1e3):
        for rho0 in 10 ** rng.uniform(-6, -1, size=10):
            base = stability_time(StabilityQuery(rho0, FACTORIAL_SQUARED))
            scaled = stability_time(StabilityQuery(rho0, {r: c * D for r, D in FACTORIAL_SQUARED.items()}))
            assert scaled.r_opt == base.r_opt
            assert scaled.T == pytest.approx(base.T / c, rel=1e-10)


def test_orbit_stays_in_the_box_until_the_escape_time():
    # <omega,p> + p1^2/2 + p1^2 p2 cos(q1 - q2): normal form up to order 1, remainder of grade 2
    H = PoissonSeries(2, [1.0, 0.61803398874989485, 0.5, 1.0], l=[[1, 0], [0, 1], [2, 0], [2, 1]],
                      k=[[0, 0], [0, 0], [0, 0], [1, -1]], K=4, grading=Grading.TORUS)
    D = remainder_bound(H.grade_part(2))
    assert D == 2.0
    rho0 = 0.1
    estimate = stability_time(StabilityQuery(rho0, {1: D}))
    rho_opt = optimal_radius(rho0, estimate.r_opt)
    t_final = estimate.T * (1 - 1e-6)
    for q0 in ([0.0, 0.0], [1.0, 2.5], [3.0, 0.3]):
        solution = hamiltonian_flow(H, q0, [rho0, rho0], t_final, t_eval=np.linspace(0.0, t_final, 2001))
        assert np.abs(solution.y[2:]).max() <= rho_opt
