import numpy as np
import pytest

from normalizer.birkhoff import BirkhoffNormalizer, birkhoff_normalize, remainder_bound
from normalizer.errors import DimensionMismatch, SmallDivisor
from normalizer.kolmogorov import kolmogorov_normalize, reduce_to_torus_nf
from normalizer.lie import hamiltonian_flow
from normalizer.models import load_model
from normalizer.series import Grading, PoissonSeries, linear_form, quadratic_form

GOLDEN = np.array([1.0, 0.61803398874989485])


def torus(n_dof, coeffs, l, k=None, parity=None, K=4):
    return PoissonSeries(n_dof, coeffs, l=l, k=k, parity=parity, K=K, grading=Grading.TORUS)


def test_angle_free_hamiltonian_is_already_normal():
    H = linear_form(GOLDEN, grading=Grading.TORUS) + quadratic_form(np.eye(2), grading=Grading.TORUS)
    result = birkhoff_normalize(H, GOLDEN, 2)
    assert result.D_table == {1: 0.0, 2: 0.0}
    assert result.Z[0].norm() == pytest.approx(1.0)
    assert result.Z[1].is_zero
    assert [norm for _, norm in result.gen_norms] == [0.0, 0.0]


def test_oscillating_terms_are_removed():
    H = linear_form(GOLDEN, grading=Grading.TORUS) + torus(2, [1e-2, 1e-2, 0.5], l=[[2, 0], [1, 1], [0, 2]],
                                                          k=[[1, 0], [1, -1], [0, 0]])
    result = birkhoff_normalize(H, GOLDEN, 3)
    for Z in result.Z:
        assert Z.oscillating().is_zero
    assert result.Z[0].norm() == pytest.approx(0.5)
    assert all(D >= 0 for _, D in result.D)
    assert len(result.to_frame()) == 3


def test_remainder_bound():
    F = torus(1, [0.25], l=[[3]], k=[[2]])
    # 2 |dF/dq| = 2 * 2 * 0.25
    assert remainder_bound(F) == pytest.approx(1.0)
    assert remainder_bound(PoissonSeries(1, K=4, grading=Grading.TORUS)) == 0.0


def test_birkhoff_rejects_bad_inputs():
    H = linear_form(GOLDEN, grading=Grading.TORUS)
    with pytest.raises(DimensionMismatch):
        BirkhoffNormalizer(H, [1.0, 2.0, 3.0], 2)
    with pytest.raises(ValueError):
        BirkhoffNormalizer(linear_form(GOLDEN, grading=Grading.RAW), GOLDEN, 2)
    with pytest.raises(ValueError):
        BirkhoffNormalizer(H, GOLDEN, 2, resonance="ignore")


def test_resonant_frequencies_raise_or_are_flagged():
    omega = np.array([1.0, -1.0])
    H = linear_form(omega, grading=Grading.TORUS) + torus(2, [1e-2], l=[[1, 1]], k=[[1, 1]])
    with pytest.raises(SmallDivisor):
        birkhoff_normalize(H, omega, 1, floor=1e-8)
    with pytest.warns(UserWarning):
        result = birkhoff_normalize(H, omega, 1, floor=1e-8, resonance="keep")
    assert "RESONANT" in result.flags


def test_benchmark_birkhoff_purity():
    model = load_model("benchmark")
    kolmogorov = kolmogorov_normalize(model.kolmogorov_input(), 4)
    result = birkhoff_normalize(reduce_to_torus_nf(kolmogorov), model.omega, 3)
    assert sum(Z.oscillating().norm() for Z in result.Z) == 0.0
    assert result.coefficient_counts[-1][1] > 0


def test_actions_are_invariant_under_the_truncated_normal_form():
    model = load_model("benchmark")
    kolmogorov = kolmogorov_normalize(model.kolmogorov_input(), 3)
    result = birkhoff_normalize(reduce_to_torus_nf(kolmogorov), model.omega, 2)
    Z = result.truncated_hamiltonian()
    H = Z.with_terms(*Z.arrays(), grading=Grading.RAW, action_cap=None)
    p0 = np.array([1e-3, 2e-3])
    solution = hamiltonian_flow(H, [0.3, 1.1], p0, 100.0)
    assert np.abs(solution.y[2:, -1] - p0).max() <= 1e-10
