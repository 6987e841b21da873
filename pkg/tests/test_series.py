import numba
import numpy as np
import pytest

from normalizer import Parallel
from normalizer.errors import DimensionMismatch, DomainError
from normalizer.series import (Grading, Parity, PoissonSeries, TrigMonomial, complex_norm, derive, dumps, evaluate,
                               linear_form, loads, norm, poisson_bracket, random_series, truncate)

COS, SIN = Parity.COS, Parity.SIN


def raw(n_dof, *terms, **settings):
    return PoissonSeries.from_terms(n_dof, [TrigMonomial(*t) for t in terms], grading=Grading.RAW, **settings)


def only_term(f):
    assert len(f) == 1
    return next(f.monomials())


def test_norm_sums_absolute_coefficients():
    f = raw(2, (3.0, (1, 0), (1, 0), COS), (-4.0, (1, 0), (0, 2), SIN))
    assert norm(f, 1) == 7.0
    assert norm(PoissonSeries(2), 1) == 0.0
    g = raw(2, (0.5, (2, 0), (1, -1), COS), (0.25, (1, 1), (1, 0), SIN))
    assert norm(g, 2) == pytest.approx(0.75)
    assert norm(g, 3) == 0.0


def test_complex_norm_within_factor_of_real_norm():
    f = raw(1, (3.0, (1,), (1,), COS), (4.0, (1,), (1,), SIN))
    assert complex_norm(f) == pytest.approx(5.0)
    g = random_series(3, [1, 2], 20)
    assert complex_norm(g) <= norm(g) <= np.sqrt(2) * complex_norm(g) * (1 + 1e-14)


def test_canonical_sign_and_zero_terms():
    f = raw(2, (1.0, (0, 0), (-1, 2), SIN), (2.0, (1, 0), (0, 0), SIN), (0.0, (1, 0), (1, 0), COS))
    term = only_term(f)
    assert term.k == (1, -2)
    assert term.coeff == -1.0


def test_like_terms_are_merged():
    f = raw(1, (1.0, (1,), (1,), COS), (2.0, (1,), (-1,), COS))
    assert only_term(f).coeff == 3.0
    assert (f - f).is_zero


def test_bracket_examples():
    f = raw(2, (1.0, (2, 0), (0, 0), COS))
    g = raw(2, (1.0, (1, 0), (1, 0), COS))
    term = only_term(poisson_bracket(f, g))
    assert term == TrigMonomial(-2.0, (2, 0), (1, 0), SIN)

    omega = np.array([1.0, 0.5])
    h = poisson_bracket(linear_form(omega, grading=Grading.RAW), raw(2, (1.0, (0, 0), (1, 2), COS)))
    term = only_term(h)
    assert term.parity is SIN and term.k == (1, 2)
    assert term.coeff == pytest.approx(-2.0)


def test_bracket_grading_law():
    rng = np.random.default_rng(7)
    K = 4
    for _ in range(50):
        n = int(rng.integers(2, 5))
        r, s = (int(x) for x in rng.integers(1, 4, size=2))
        h = poisson_bracket(random_series(n, [r], 6, K, rng), random_series(n, [s], 6, K, rng))
        if h.is_zero:
            continue
        assert np.all(h.l.sum(axis=1) == r + s + 1)
        assert np.all(Grading.wave_norm(h.k) <= (r + s) * K)
        assert h.grade_values() == [r + s]


def test_bracket_antisymmetry_and_jacobi():
    f, g, h = (random_series(2, [1], 5) for _ in range(3))
    assert (poisson_bracket(f, g) + poisson_bracket(g, f)).norm() <= 1e-12
    assert poisson_bracket(f, f).norm() <= 1e-12
    jacobi = poisson_bracket(f, poisson_bracket(g, h)) + poisson_bracket(g, poisson_bracket(h, f)) \
        + poisson_bracket(h, poisson_bracket(f, g))
    assert jacobi.norm() <= 1e-10


def test_bracket_does_not_depend_on_the_thread_count():
    f = random_series(4, [1, 2, 3], 60)
    g = random_series(4, [1, 2], 60)
    results = []
    try:
        for threads in (1, numba.config.NUMBA_NUM_THREADS):
            Parallel.threads = threads
            Parallel.apply()
            results.append(poisson_bracket(f, g))
    finally:
        Parallel.threads = numba.config.NUMBA_NUM_THREADS
        Parallel.apply()
        Parallel.threads = None
    single, many = results
    assert len(single) > 0
    for a, b in zip(single.arrays(), many.arrays()):
        np.testing.assert_array_equal(a, b)


def test_bracket_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        poisson_bracket(random_series(2, [1]), random_series(3, [1]))


def test_derive_examples():
    f = raw(2, (1.0, (2, 0), (0, 1), COS))
    assert only_term(derive(f, action=0)) == TrigMonomial(2.0, (1, 0), (0, 1), COS)
    g = raw(1, (1.0, (0,), (2,), COS))
    assert only_term(derive(g, angle=0)) == TrigMonomial(-2.0, (0,), (2,), SIN)
    h = raw(2, (1.0, (0, 1), (1, 1), SIN))
    assert only_term(derive(h, angle=1)) == TrigMonomial(1.0, (0, 1), (1, 1), COS)
    with pytest.raises(ValueError):
        derive(h)


def test_truncate_trig_budget():
    f = PoissonSeries(1, [0.3, 0.7], l=[[2], [3]], k=[[5], [7]], K=5, grading=Grading.TORUS)
    assert len(f) == 2
    g = truncate(f, trig_policy=4)
    assert only_term(g) == TrigMonomial(0.7, (3,), (7,), COS)
    assert g.loss == pytest.approx(0.3)
    assert g.loss_by_grade == {1: pytest.approx(0.3)}
    # the loss already carried by the input survives a further truncation
    h = PoissonSeries(1, [0.25, 0.5], l=[[2], [2]], k=[[5], [1]], K=4, grading=Grading.TORUS)
    assert h.loss == 0.25
    assert truncate(h).loss == 0.25
    assert truncate(h, action_cap=5).loss_by_grade == {1: pytest.approx(0.25)}
    assert truncate(g, drop_below=1.0).loss == pytest.approx(1.0)


def test_truncate_is_idempotent_on_compliant_series():
    f = random_series(3, [1, 2], 10)
    g = truncate(f)
    np.testing.assert_array_equal(g.coeffs, f.coeffs)
    np.testing.assert_array_equal(g.k, f.k)
    assert g.loss == 0.0


def test_construction_drops_terms_over_the_budget():
    f = PoissonSeries(1, [0.25], l=[[2]], k=[[5]], K=4, grading=Grading.TORUS)
    assert f.is_zero
    assert f.loss == 0.25


def test_drop_below_prunes_small_coefficients():
    f = raw(1, (1e-12, (1,), (1,), COS), (1.0, (1,), (2,), COS))
    assert len(truncate(f, drop_below=1e-10)) == 1


def test_evaluate_examples():
    f = raw(2, (1.0, (1, 0), (1, 0), COS))
    assert evaluate(f, [2.0, 0.0], [0.0, 0.0]) == 2.0
    assert abs(f([0.1, 0.3], [1.2, 0.4])) <= 0.1
    with pytest.raises(DimensionMismatch):
        evaluate(f, [1.0], [0.0])


def test_norm_bound_on_the_polydisk():
    rng = np.random.default_rng(3)
    rho = 0.1
    for _ in range(20):
        n = int(rng.integers(2, 5))
        f = random_series(n, [1, 2, 3], 30, 4, rng)
        bound = sum(f.norm(s) * rho ** (s + 1) for s in f.grade_values())
        p = rng.uniform(-rho, rho, size=(50, n))
        q = rng.uniform(0.0, 2 * np.pi, size=(50, n))
        assert np.all(np.abs(evaluate(f, p, q)) <= bound + 1e-12)


def test_psx_text_keeps_every_coefficient():
    f = random_series(3, [1, 2], 10)
    g = loads(dumps(f))
    assert g.grading == Grading.TORUS and g.K == f.K
    np.testing.assert_array_equal(g.coeffs, f.coeffs)
    np.testing.assert_array_equal(g.l, f.l)
    np.testing.assert_array_equal(g.parity, f.parity)


def test_psx_rejects_malformed_text():
    with pytest.raises(DomainError):
        loads("K 4\n1 1 c 0\n")
    with pytest.raises(DomainError):
        loads("ndof 2\n1 1 0 c 0\n")
    with pytest.raises(ValueError):
        loads("ndof 1\n1 1 x 0\n")
