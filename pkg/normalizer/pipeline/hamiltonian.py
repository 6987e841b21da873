from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch
from ..series import Grading, Parity, PoissonSeries, derive, evaluate, translate_actions


def weighted_degree(series, n_fast):
    """Action degree with the slow Cartesian pairs counted as square roots of actions."""
    fast = series.l[:, :n_fast].sum(axis=1)
    slow = series.l[:, n_fast:].sum(axis=1) + series.m[:, n_fast:].sum(axis=1)
    return fast + 0.5 * slow


class WeightedCap:
    """Drops the terms above a weighted action degree; usable as a Lie series prune."""

    def __init__(self, n_fast, cap):
        self.n_fast = int(n_fast)
        self.cap = cap

    def __call__(self, series):
        if self.cap is None or series.is_zero:
            return series
        keep = weighted_degree(series, self.n_fast) <= self.cap
        if np.all(keep):
            return series
        dropped = float(np.abs(series.coeffs[~keep]).sum())
        return series.with_terms(series.coeffs[keep], series.l[keep], series.m[keep], series.k[keep],
                                 series.parity[keep], loss=series.loss + dropped)


def kepler_expansion(kappa, Lambda, degree, n_dof, K=4):
    """Taylor expansion of -sum kappa_j / (2 Lambda_j^2) around Lambda, constant dropped.

    The n-th coefficient is -kappa/2 (-1)^n (n+1) Lambda^(-2-n).
    """
    kappa = np.asarray(kappa, dtype=np.float64)
    Lambda = np.asarray(Lambda, dtype=np.float64)
    coeffs, exps = [], []
    for j in np.flatnonzero(kappa):
        for n in range(1, degree + 1):
            e = np.zeros(n_dof, dtype=np.int64)
            e[j] = n
            coeffs.append(-0.5 * kappa[j] * (-1) ** n * (n + 1) * Lambda[j] ** (-2 - n))
            exps.append(e)
    return PoissonSeries(n_dof, coeffs, l=exps if exps else None, K=K, grading=Grading.RAW)


@dataclass
class FastSlowHamiltonian:
    """H = -sum kappa_j / (2 Lambda_j^2) + mu F(Lambda - Lambda_ref, lambda, xi, eta).

    The first ``n_fast`` degrees of freedom are action-angle pairs
    (Lambda, lambda), the remaining ones Cartesian pairs with xi in the action
    slot and eta in the coordinate slot. ``series`` holds the perturbation
    already multiplied by mu, written in the deviations Lambda - Lambda_ref.
    """
    n_fast: int
    kappa: np.ndarray
    series: PoissonSeries
    mu: float
    lambda_ref: np.ndarray = None
    masses: tuple = None
    cap: float = 3
    name: str = "hamiltonian"
    uncertainties: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_fast = int(self.n_fast)
        self.kappa = np.asarray(self.kappa, dtype=np.float64).reshape(-1)
        if self.lambda_ref is None:
            self.lambda_ref = np.zeros(self.n_fast)
        self.lambda_ref = np.asarray(self.lambda_ref, dtype=np.float64).reshape(-1)
        if not 0 < self.n_fast <= self.series.n_dof:
            raise DimensionMismatch(f"n_fast = {self.n_fast} for a {self.series.n_dof}-dof series")
        if self.kappa.shape[0] != self.n_fast or self.lambda_ref.shape[0] != self.n_fast:
            raise DimensionMismatch(f"kappa and lambda_ref need {self.n_fast} entries")
        if np.any(self.kappa < 0):
            raise ValueError("The Kepler constants must be non negative")
        if np.any((self.kappa > 0) & (self.lambda_ref <= 0)):
            raise ValueError("lambda_ref must be positive where a Kepler term is present")
        if self.series.grading != Grading.RAW:
            raise ValueError(f"The fast/slow series must be raw graded, got '{self.series.grading}'")
        if np.any(self.series.k[:, self.n_fast:] != 0):
            raise ValueError("The slow degrees of freedom must be Cartesian (no wave vector entries)")
        if np.any(self.series.m[:, :self.n_fast] != 0):
            raise ValueError("The fast degrees of freedom must be in action-angle form")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.masses is not None:
            m0, *planets = self.masses
            expected = max(m / m0 for m in planets)
            if abs(expected - self.mu) > 1e-12 * expected:
                raise ValueError(f"mu = {self.mu} does not match max(m_j/m0) = {expected}")

    @property
    def n_dof(self):
        return self.series.n_dof

    @property
    def n_slow(self):
        return self.n_dof - self.n_fast

    @property
    def slow_dofs(self):
        return list(range(self.n_fast, self.n_dof))

    def averaged_fast(self):
        """Part of the series surviving the average over lambda at xi = eta = 0."""
        s = self.series
        mask = ~np.any(s.k != 0, axis=1) & (s.l[:, self.n_fast:].sum(axis=1) == 0) \
            & (s.m.sum(axis=1) == 0)
        return s.select(mask)

    def _point(self, Lambda):
        p = np.zeros(self.n_dof)
        p[:self.n_fast] = np.asarray(Lambda, dtype=np.float64) - self.lambda_ref
        return p, np.zeros(self.n_dof)

    def frequency(self, Lambda):
        """Gradient of the averaged Hamiltonian with respect to Lambda at xi = eta = 0."""
        Lambda = np.asarray(Lambda, dtype=np.float64)
        average = self.averaged_fast()
        p, q = self._point(Lambda)
        grad = self.kappa / Lambda ** 3
        for j in range(self.n_fast):
            grad[j] += evaluate(derive(average, action=j), p, q)
        return grad

    def frequency_jacobian(self, Lambda):
        Lambda = np.asarray(Lambda, dtype=np.float64)
        average = self.averaged_fast()
        p, q = self._point(Lambda)
        jacobian = np.diag(-3.0 * self.kappa / Lambda ** 4)
        for i in range(self.n_fast):
            first = derive(average, action=i)
            for j in range(self.n_fast):
                jacobian[i, j] += evaluate(derive(first, action=j), p, q)
        return jacobian

    def energy(self, p, q):
        """Value of H at p = (Lambda, xi), q = (lambda, eta)."""
        p = np.asarray(p, dtype=np.float64)
        Lambda = p[..., :self.n_fast]
        shifted = p.copy()
        shifted[..., :self.n_fast] -= self.lambda_ref
        kepler = -0.5 * np.sum(self.kappa / Lambda ** 2, axis=-1)
        return kepler + evaluate(self.series, shifted, q)

    def translated(self, Lambda_star):
        """Kepler part and perturbation written in Lambda - Lambda_star, constants dropped."""
        Lambda_star = np.asarray(Lambda_star, dtype=np.float64)
        degree = int(np.floor(self.cap)) if self.cap is not None else 4
        shift = np.zeros(self.n_dof)
        shift[:self.n_fast] = Lambda_star - self.lambda_ref
        moved = translate_actions(self.series, shift) if np.any(shift) else self.series
        moved = moved.with_terms(*moved.arrays(), action_cap=None, trig_cap=None)
        constant = ~np.any(moved.k != 0, axis=1) & (moved.l.sum(axis=1) == 0) & (moved.m.sum(axis=1) == 0)
        moved = moved.select(~constant)
        kepler = kepler_expansion(self.kappa, Lambda_star, degree, self.n_dof, K=self.series.K)
        return WeightedCap(self.n_fast, self.cap)(kepler + moved)


def _term(coeff, L=(0, 0), xi=(0, 0), eta=(0, 0), k=(0, 0), parity=Parity.COS):
    return coeff, tuple(L) + tuple(xi), tuple(k) + (0, 0), parity, (0, 0) + tuple(eta)


SYNTHETIC_N_STAR = np.array([0.52989041594442, 0.21345444291052])
SYNTHETIC_ACTIONS = np.array([1.0e-3, 2.0e-3])


def synthetic_model(mu=1e-3, K=4):
    """Four degree of freedom fast/slow model shaped like a two planet secular problem.

    Two Kepler terms, a Lagrange-Laplace quadratic block with retrograde
    frequencies of order mu, quartic and sextic secular terms and a few fast
    harmonics coupled to the eccentricity-like variables.
    """
    terms = [
        _term(0.01, L=(1, 0)),
        _term(-0.005, L=(0, 1)),
        _term(-0.075, xi=(2, 0)), _term(-0.075, eta=(2, 0)),
        _term(-0.13, xi=(0, 2)), _term(-0.13, eta=(0, 2)),
        _term(0.02, xi=(1, 1)), _term(0.02, eta=(1, 1)),
        # (xi1^2 + eta1^2)^2, (xi2^2 + eta2^2)^2 and their product
        _term(0.05, xi=(4, 0)), _term(0.1, xi=(2, 0), eta=(2, 0)), _term(0.05, eta=(4, 0)),
        _term(0.08, xi=(0, 4)), _term(0.16, xi=(0, 2), eta=(0, 2)), _term(0.08, eta=(0, 4)),
        _term(0.03, xi=(2, 2)), _term(0.03, xi=(2, 0), eta=(0, 2)),
        _term(0.03, xi=(0, 2), eta=(2, 0)), _term(0.03, eta=(2, 2)),
        # (xi1 xi2 + eta1 eta2)(xi1^2 + eta1^2)
        _term(0.02, xi=(3, 1)), _term(0.02, xi=(1, 1), eta=(2, 0)),
        _term(0.02, xi=(2, 0), eta=(1, 1)), _term(0.02, eta=(3, 1)),
        # (xi1^2 + eta1^2)^3
        _term(0.01, xi=(6, 0)), _term(0.03, xi=(4, 0), eta=(2, 0)),
        _term(0.03, xi=(2, 0), eta=(4, 0)), _term(0.01, eta=(6, 0)),
        _term(0.1, k=(1, -1)),
        _term(0.02, L=(1, 0), k=(1, -1)),
        _term(0.05, xi=(1, 0), k=(1, -2)), _term(0.05, eta=(1, 0), k=(1, -2), parity=Parity.SIN),
        _term(-0.03, xi=(0, 1), k=(1, -2)), _term(-0.03, eta=(0, 1), k=(1, -2), parity=Parity.SIN),
    ]
    c, L, Kv, P, M = zip(*terms)
    series = PoissonSeries(4, np.array(c) * mu, l=L, k=Kv, parity=[int(p) for p in P], m=M, K=K,
                           grading=Grading.RAW)
    return FastSlowHamiltonian(2, kappa=np.array([0.53, 0.2135]), series=series, mu=mu,
                               lambda_ref=np.array([1.0, 1.0]), name="synthetic_sjs")
