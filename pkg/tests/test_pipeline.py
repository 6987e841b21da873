import numpy as np
import pytest

from normalizer import FileManager
from normalizer.errors import DimensionMismatch, NoConvergence, NotElliptic
from normalizer.pipeline import (SYNTHETIC_ACTIONS, SYNTHETIC_N_STAR, FastSlowHamiltonian, PlanetaryPipeline,
                                 WeightedCap, action_readout, default_drop_below, locate_fast_torus, normalize_torus,
                                 run_pipeline, secular_diagonalize, secular_quadratic, symplectic_matrix,
                                 synthetic_model, weighted_degree)
from normalizer.pipeline import pipeline as pipeline_module
from normalizer.series import PoissonSeries
from normalizer.stability import stability_curve


def slow_pair(a, b):
    """a/2 xi^2 + b/2 eta^2 on the second degree of freedom, xi in the action slot."""
    return PoissonSeries(2, [0.5 * a, 0.5 * b], l=[[0, 2], [0, 0]], m=[[0, 0], [0, 2]])


def test_synthetic_model_shape():
    H = synthetic_model()
    assert H.n_fast == 2 and H.n_slow == 2
    assert np.all(H.series.k[:, 2:] == 0)
    with pytest.raises(DimensionMismatch):
        FastSlowHamiltonian(5, [1.0] * 5, H.series, 1e-3, lambda_ref=[1.0] * 5)


def test_weighted_cap_counts_slow_pairs_as_half_degrees():
    series = PoissonSeries(3, [1.0, 1.0, 1.0], l=[[2, 0, 0], [1, 2, 0], [0, 0, 0]], m=[[0, 0, 0], [0, 0, 0],
                                                                                        [0, 3, 3]])
    np.testing.assert_allclose(sorted(weighted_degree(series, 1)), [2.0, 2.0, 3.0])
    assert len(WeightedCap(1, 2)(series)) == 2


def test_fast_torus_has_the_requested_frequencies():
    H = synthetic_model()
    Lambda_star = locate_fast_torus(H, SYNTHETIC_N_STAR)
    np.testing.assert_allclose(H.frequency(Lambda_star), SYNTHETIC_N_STAR, atol=1e-11)
    assert np.all(Lambda_star > 0)


def test_secular_diagonalization_of_a_circle():
    form = secular_diagonalize(slow_pair(-0.3, -0.3), 1)
    assert abs(form.nu[0]) == pytest.approx(0.3)
    M = form.linear_map
    J = symplectic_matrix(1)
    np.testing.assert_allclose(M.T @ J @ M, J, atol=1e-12)
    np.testing.assert_allclose(np.abs(np.diag(secular_quadratic(form.hamiltonian, 1))), [0.3, 0.3])


def test_hyperbolic_secular_part_is_not_elliptic():
    with pytest.raises(NotElliptic):
        secular_diagonalize(slow_pair(0.3, -0.3), 1)


def test_action_readout_of_a_square():
    # xi^2 averages to I over the torus
    readout = action_readout(PoissonSeries(2, [1.0], l=[[0, 2]]), 1)
    assert readout == {(1,): pytest.approx(1.0)}
    assert action_readout(PoissonSeries(2, [1.0], l=[[0, 1]]), 1) == {}


def test_synthetic_pipeline_end_to_end():
    result = run_pipeline(synthetic_model(), SYNTHETIC_N_STAR, secular_actions=SYNTHETIC_ACTIONS)
    kolmogorov_input = result.kolmogorov_input
    assert kolmogorov_input.n_dof == 4
    np.testing.assert_allclose(kolmogorov_input.omega.omega[:2], SYNTHETIC_N_STAR)
    np.testing.assert_allclose(kolmogorov_input.omega.omega[2:], result.g_star)
    assert np.all(result.g_star < 0)
    assert np.all(result.secular.nu < 0)
    assert FileManager.load_text("pipeline/step_5.psx")


def test_resumed_pipeline_matches_a_fresh_run():
    fresh = run_pipeline(synthetic_model(), SYNTHETIC_N_STAR, secular_actions=SYNTHETIC_ACTIONS)
    partial = PlanetaryPipeline(synthetic_model(), SYNTHETIC_N_STAR, secular_actions=SYNTHETIC_ACTIONS)
    assert partial.normalize(3) is None
    FileManager.loading_enabled = True
    resumed = PlanetaryPipeline(synthetic_model(), SYNTHETIC_N_STAR, secular_actions=SYNTHETIC_ACTIONS)
    assert resumed.order == 3
    result = resumed.normalize()
    expected = fresh.kolmogorov_input.hamiltonian()
    actual = result.kolmogorov_input.hamiltonian()
    np.testing.assert_array_equal(actual.coeffs, expected.coeffs)
    np.testing.assert_array_equal(actual.k, expected.k)
    np.testing.assert_array_equal(result.I_star, fresh.I_star)


def test_failed_step_is_tagged(monkeypatch):
    def diverging(hamiltonian, n_star):
        raise NoConvergence("Fast torus: residual 1.000e+00 after 50 iterations")

    monkeypatch.setattr(pipeline_module, "locate_fast_torus", diverging)
    with pytest.raises(NoConvergence) as error:
        run_pipeline(synthetic_model(), SYNTHETIC_N_STAR, secular_actions=SYNTHETIC_ACTIONS)
    assert error.value.step == "fast torus"
    assert error.value.to_dict()["step"] == "fast torus"


def test_pipeline_needs_exactly_one_secular_target():
    with pytest.raises(ValueError):
        PlanetaryPipeline(synthetic_model(), SYNTHETIC_N_STAR)


@pytest.mark.slow
def test_synthetic_pipeline_through_the_normal_forms():
    result = run_pipeline(synthetic_model(), SYNTHETIC_N_STAR, secular_actions=SYNTHETIC_ACTIONS)
    drop_below = default_drop_below(result.kolmogorov_input)
    assert drop_below == pytest.approx(1e-14 * result.kolmogorov_input.hamiltonian().norm())
    kolmogorov, birkhoff = normalize_torus(result, 6, 4)
    norms = [chi1 + chi2 for _, chi1, chi2 in kolmogorov.gen_norms if chi1 + chi2 > 0]
    assert len(norms) >= 2
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert kolmogorov.decay_ratio < 1
    assert sorted(birkhoff.D_table) == [1, 2, 3, 4]
    T = stability_curve(np.geomspace(1e-6, 1e-2, 41), birkhoff.D_table).T
    assert np.all(np.isfinite(T))
    assert np.log10(T.max() / T.min()) >= 8
