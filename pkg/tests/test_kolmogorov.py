import numpy as np
import pytest

from normalizer import FileManager
from normalizer.errors import DegenerateTwist
from normalizer.kolmogorov import (KolmogorovInput, KolmogorovNormalizer, certify_torus, kolmogorov_normalize,
                                   reduce_to_torus_nf)
from normalizer.models import load_model
from normalizer.series import Grading, read_psx


@pytest.fixture(scope="module")
def benchmark():
    return load_model("benchmark")


def test_input_splits_the_benchmark(benchmark):
    kolmogorov_input = benchmark.kolmogorov_input()
    assert kolmogorov_input.n_dof == 2
    assert kolmogorov_input.A.norm() == pytest.approx(2e-3)
    assert kolmogorov_input.B.is_zero
    assert kolmogorov_input.higher.is_zero
    np.testing.assert_allclose(kolmogorov_input.C, np.eye(2))


def test_degenerate_twist(benchmark):
    with pytest.raises(DegenerateTwist):
        KolmogorovInput.from_series(benchmark.series(), benchmark.omega, C=[[1.0, 1.0], [1.0, 1.0]])


def test_integrable_model_needs_no_generating_function():
    model = load_model("integrable")
    result = kolmogorov_normalize(model.kolmogorov_input(), 3)
    assert [chi1 + chi2 for _, chi1, chi2 in result.gen_norms] == [0.0, 0.0, 0.0]
    assert "DECAY_UNDEFINED" in result.flags
    result.save()
    frame = FileManager.load_csv("kolmogorov/norms.csv")
    assert list(frame["chi1_norm"]) == [0.0, 0.0, 0.0]


def test_benchmark_generating_functions_decay(benchmark):
    result = kolmogorov_normalize(benchmark.kolmogorov_input(), 4)
    norms = [chi1 + chi2 for _, chi1, chi2 in result.gen_norms]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert result.decay_ratio < 1
    assert not result.flags


def test_torus_normal_form_keeps_the_frequencies(benchmark):
    result = kolmogorov_normalize(benchmark.kolmogorov_input(), 3)
    torus = reduce_to_torus_nf(result)
    assert torus.grading == Grading.TORUS
    frequency = torus.grade_part(0)
    np.testing.assert_allclose(frequency.l.T @ frequency.coeffs, benchmark.omega)
    assert result.dropped_mass < 1e-6


def test_normal_form_is_saved_and_read_back(benchmark, workspace):
    result = kolmogorov_normalize(benchmark.kolmogorov_input(), 2)
    result.save("out")
    stored = read_psx(str(workspace / "out" / "normal_form.psx"))
    np.testing.assert_array_equal(stored.coeffs, result.normal_form.coeffs)


def test_checkpoint_restores_the_run(benchmark):
    first = kolmogorov_normalize(benchmark.kolmogorov_input(), 2)
    FileManager.loading_enabled = True
    resumed = KolmogorovNormalizer(benchmark.kolmogorov_input(), 2)
    assert resumed.order == 2
    assert resumed.result().gen_norms == first.gen_norms


@pytest.mark.slow
def test_benchmark_order_eight(benchmark):
    result = kolmogorov_normalize(benchmark.kolmogorov_input(), 8)
    norms = [chi1 + chi2 for _, chi1, chi2 in result.gen_norms]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert result.decay_ratio < 1


@pytest.mark.slow
def test_certified_torus(benchmark):
    kolmogorov_input = benchmark.kolmogorov_input()
    result = kolmogorov_normalize(kolmogorov_input, 8)
    reduce_to_torus_nf(result)
    report = certify_torus(kolmogorov_input, result, np.zeros(2), benchmark.certify_time,
                           threshold_floor=benchmark.torus_threshold)
    assert report.passed
