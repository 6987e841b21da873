import numpy as np
import pytest

from normalizer.errors import ResonantTermRetained, SmallDivisor
from normalizer.lie import (FrequencyVector, Kind, default_floor, diophantine_scan, homological_residual, lie_flow,
                            lie_transform, solve_homological, wave_vectors)
from normalizer.series import Grading, Parity, PoissonSeries, TrigMonomial, evaluate, random_series

GOLDEN = [1.0, 0.61803398874989485]


def raw(n_dof, *terms):
    return PoissonSeries.from_terms(n_dof, [TrigMonomial(*t) for t in terms], grading=Grading.RAW)


def test_wave_vectors_are_canonical_and_bounded():
    k = wave_vectors(2, 3)
    assert np.all(np.abs(k).sum(axis=1) <= 3)
    first = k[np.arange(k.shape[0]), np.argmax(k != 0, axis=1)]
    assert np.all(first > 0)
    # half of the 24 nonzero vectors of the l1 ball of radius 3
    assert k.shape[0] == 12


def test_diophantine_scan_finds_the_golden_resonance():
    report = diophantine_scan(GOLDEN, 5)
    assert report.offending_mode == (2, -3)
    assert report.smallest_divisor > 0
    assert default_floor(GOLDEN, 5) <= report.smallest_divisor


def test_frequency_vector_checks_the_exponent():
    with pytest.raises(ValueError):
        FrequencyVector([1.0, 0.5, 0.2], tau_dio=1.0)
    with pytest.raises(ValueError):
        FrequencyVector([1.0], gamma=0.0)


def test_homological_equation_is_solved_mode_by_mode():
    rhs = random_series(2, [1, 2], 10)
    chi, mean = solve_homological(GOLDEN, rhs, floor=1e-6)
    assert homological_residual(GOLDEN, chi, rhs, mean) <= 1e-12 * rhs.norm()
    assert np.all(np.any(chi.chi.k != 0, axis=1))
    assert np.all(~np.any(mean.k != 0, axis=1))


def test_homological_generating_function_kind():
    rhs = raw(2, (0.3, (0, 0), (1, 0), Parity.COS), (0.1, (0, 0), (1, -1), Parity.SIN))
    chi, mean = solve_homological(GOLDEN, rhs)
    assert chi.kind is Kind.ANGLE_ONLY
    assert mean.is_zero
    assert chi.divisors.smallest_divisor == pytest.approx(1.0 - GOLDEN[1])


def test_small_divisor_raises_or_is_kept():
    rhs = raw(2, (0.5, (0, 0), (1, 0), Parity.COS), (0.2, (0, 0), (1, 1), Parity.COS))
    with pytest.raises(SmallDivisor) as error:
        solve_homological([1.0, -1.0 + 1e-12], rhs, floor=1e-8)
    assert error.value.k == (1, 1)
    assert error.value.to_dict()["exit_code"] == 1
    with pytest.warns(ResonantTermRetained):
        chi, mean = solve_homological([1.0, -1.0 + 1e-12], rhs, floor=1e-8, resonance="keep")
    assert len(mean) == 1 and len(chi.chi) == 1


def test_lie_transform_closes_after_one_bracket():
    H = raw(1, (1.0, (1,), (0,), Parity.COS))
    chi = raw(1, (0.2, (0,), (1,), Parity.SIN))
    transformed = lie_transform(H, chi)
    expected = raw(1, (1.0, (1,), (0,), Parity.COS), (-0.2, (0,), (1,), Parity.COS))
    assert (transformed - expected).norm() <= 1e-15


def test_lie_flow_moves_the_actions_only():
    chi = raw(1, (0.2, (0,), (1,), Parity.SIN))
    q, p = lie_flow(chi, [0.4], [0.0])
    assert q[0] == pytest.approx(0.4)
    # p' = -dchi/dq = -0.2 cos(q)
    assert p[0] == pytest.approx(-0.2 * np.cos(0.4), rel=1e-10)


def test_lie_transform_is_inverted_by_the_opposite_generator():
    H = random_series(2, [0, 1, 2], 10)
    chi = random_series(2, [1], 6) / 100.0
    forward = lie_transform(H, chi, max_grade=4)
    back = lie_transform(forward, -chi, max_grade=4)
    assert (forward - H).norm() > 1e-6
    assert (back - H).norm() <= 1e-10 * H.norm()


def test_transformed_hamiltonian_keeps_the_energy_along_the_flow():
    H = raw(2, (1.0, (1, 0), (0, 0), Parity.COS), (0.6, (0, 1), (0, 0), Parity.COS),
            (0.5, (2, 0), (0, 0), Parity.COS), (0.1, (1, 0), (1, -1), Parity.COS),
            (0.05, (0, 0), (0, 1), Parity.SIN))
    chi = raw(2, (0.01, (0, 0), (1, 0), Parity.SIN), (0.02, (0, 0), (1, 1), Parity.COS))
    transformed = lie_transform(H, chi)
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.uniform(-0.1, 0.1, size=2)
        q = rng.uniform(0.0, 2 * np.pi, size=2)
        q_back, p_back = lie_flow(chi, q, p, -1.0)
        assert evaluate(transformed, p_back, q_back) == pytest.approx(evaluate(H, p, q), abs=1e-8)
