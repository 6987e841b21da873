import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom, comb

from ..errors import (DegenerateSpectrum, DimensionMismatch, DomainError, NegativeAction, NoConvergence,
                      NormalizerError, NotElliptic, NumericError, SingularJacobian, SmallDivisor)
from ..birkhoff import birkhoff_normalize
from ..kolmogorov import KolmogorovInput, kolmogorov_normalize, reduce_to_torus_nf
from ..lie import Expansion, FrequencyVector, default_floor, diophantine_scan, lie_transform, solve_homological
from ..normalizer import Normalizer
from ..series import Grading, Parity, PoissonSeries, derive, evaluate, linear_substitution, load_series, \
    multiply, save_series
from ..util import FileManager, Logger
from .hamiltonian import WeightedCap

MAX_ITERATIONS = 50
DAMPING = 0.5
MIN_DAMPING = 2.0 ** -20
DROP_RELATIVE = 1e-14


def newton(residual, jacobian, x0, tol=1e-12, max_iter=MAX_ITERATIONS, admissible=None, label="Newton"):
    """Damped Newton iteration on residual(x) = 0 in the max norm.

    The step is halved while it does not decrease the residual or leaves the
    ``admissible`` region.
    """
    x = np.array(x0, dtype=np.float64)
    r = residual(x)
    error = float(np.abs(r).max()) if r.size else 0.0
    for iteration in range(max_iter):
        if error <= tol:
            Logger.debug(f"{label} converged in {iteration} iterations, residual {error:.3e}")
            return x
        J = jacobian(x)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1.0 / np.finfo(np.float64).eps:
            raise SingularJacobian(f"{label}: singular Jacobian at x = {x}")
        step = -np.linalg.solve(J, r)
        damping = 1.0
        while True:
            candidate = x + damping * step
            if admissible is None or admissible(candidate):
                candidate_r = residual(candidate)
                candidate_error = float(np.abs(candidate_r).max())
                if candidate_error < error or damping <= MIN_DAMPING:
                    break
            elif damping <= MIN_DAMPING:
                raise NoConvergence(f"{label}: every damped step leaves the admissible region")
            damping *= DAMPING
        x, r, error = candidate, candidate_r, candidate_error
    if error <= tol:
        return x
    raise NoConvergence(f"{label}: residual {error:.3e} after {max_iter} iterations")


# step (i)

def locate_fast_torus(hamiltonian, n_star, seed=None, tol=1e-12, max_iter=MAX_ITERATIONS):
    """Lambda* where the lambda-averaged Hamiltonian at xi = eta = 0 has frequencies n*."""
    n_star = np.asarray(n_star, dtype=np.float64).reshape(-1)
    if n_star.shape[0] != hamiltonian.n_fast:
        raise DimensionMismatch(f"n* has {n_star.shape[0]} entries for {hamiltonian.n_fast} fast actions")
    kepler = hamiltonian.kappa > 0
    if seed is None:
        seed = hamiltonian.lambda_ref.copy()
        usable = kepler & (n_star > 0)
        seed[usable] = (hamiltonian.kappa[usable] / n_star[usable]) ** (1.0 / 3.0)
    Lambda_star = newton(lambda x: hamiltonian.frequency(x) - n_star, hamiltonian.frequency_jacobian, seed,
                         tol=tol, max_iter=max_iter, admissible=lambda x: bool(np.all(x[kepler] > 0)),
                         label="Fast torus")
    Logger.info(f"Fast torus at Lambda* = {Lambda_star}")
    return Lambda_star


def realized_frequency(series, n_fast):
    """Coefficients of the terms linear in one fast action and free of any other dependence."""
    omega = np.zeros(n_fast)
    mask = ~np.any(series.k != 0, axis=1) & (series.m.sum(axis=1) == 0) & (series.l.sum(axis=1) == 1) \
        & (series.l[:, :n_fast].sum(axis=1) == 1)
    for coeff, l in zip(series.coeffs[mask], series.l[mask]):
        omega[int(np.argmax(l))] += coeff
    return omega


def expand_and_translate(hamiltonian, Lambda_star):
    series = hamiltonian.translated(Lambda_star)
    Logger.info(f"Realized fast frequencies {realized_frequency(series, hamiltonian.n_fast)}")
    return series


# step (ii)

def _fast_degree(series, n_fast):
    return series.l[:, :n_fast].sum(axis=1)


def _depends_on_fast_angles(series):
    return np.any(series.k != 0, axis=1)


def fast_prenormalization(series, n_fast, cap=3, floor=None, residual_tolerance=1e-11):
    """Remove the fast-angle terms of order mu that are independent of or linear in the fast actions.

    The terms depending only on the fast actions are the integrable part (tag
    0); everything else carries one power of mu (tag 1). Two Lie transforms
    with generating functions g_1(lambda, xi, eta) and <Lambda, g_2> leave
    those terms at order mu^2.
    """
    n_dof = series.n_dof
    omega_fast = realized_frequency(series, n_fast)
    omega = FrequencyVector(np.concatenate([omega_fast, np.zeros(n_dof - n_fast)]))
    if floor is None:
        floor = default_floor(omega_fast, 2 * series.K)
    integrable = ~_depends_on_fast_angles(series) & (series.l[:, n_fast:].sum(axis=1) == 0) \
        & (series.m.sum(axis=1) == 0)
    expansion = Expansion({0: series.select(integrable), 1: series.select(~integrable)}, 2, K=series.K,
                          prune=WeightedCap(n_fast, cap))
    for degree, label in ((0, "g_1"), (1, "g_2")):
        def selector(s, degree=degree):
            return s.select(_depends_on_fast_angles(s) & (_fast_degree(s, n_fast) == degree))
        rhs = selector(expansion.part(1)) if 1 in expansion.parts else None
        if rhs is None or rhs.is_zero:
            continue
        chi, _ = solve_homological(omega, rhs, floor, order_tag=1)
        expansion = expansion.transform(chi, 1)
        remnant = selector(expansion.part(1)) if 1 in expansion.parts else None
        residual = 0.0 if remnant is None else remnant.norm()
        if residual > residual_tolerance * rhs.norm():
            raise NumericError(f"{label}: residual {residual:.3e} for |rhs| = {rhs.norm():.3e}")
        if remnant is not None and not remnant.is_zero:
            expansion = expansion.with_part(1, expansion.part(1) - remnant)
        Logger.info(f"Fast prenormalization {label}: |chi| = {chi.norm():.3e}, residual {residual:.3e}, "
                    f"mu^2 part {expansion.norms().get(2, 0.0):.3e}")
    result = expansion.total()
    if result is None:
        return series
    return result.with_terms(*result.arrays(), trig_cap=None)


# step (iii)

def symplectic_matrix(n):
    """J in the ordering (xi_1 .. xi_n, eta_1 .. eta_n), xi being the momenta."""
    identity = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -identity], [identity, zero]])


def _secular_part(series, n_fast, degree=None):
    mask = ~np.any(series.k != 0, axis=1) & (_fast_degree(series, n_fast) == 0)
    if degree is not None:
        mask &= (series.l[:, n_fast:].sum(axis=1) + series.m[:, n_fast:].sum(axis=1)) == degree
    return series.select(mask)


def secular_quadratic(series, n_fast):
    """Symmetric S of the quadratic secular part 1/2 z^T S z, z = (xi, eta)."""
    ns = series.n_dof - n_fast
    S = np.zeros((2 * ns, 2 * ns))
    part = _secular_part(series, n_fast, degree=2)
    exponents = np.hstack([part.l[:, n_fast:], part.m[:, n_fast:]])
    for coeff, e in zip(part.coeffs, exponents):
        indices = np.flatnonzero(e)
        if indices.shape[0] == 1:
            i = indices[0]
            S[i, i] += 2.0 * coeff
        else:
            i, j = indices
            S[i, j] += coeff
            S[j, i] += coeff
    return S


@dataclass
class SecularForm:
    """Diagonal secular frequencies, the symplectic map and the Birkhoff normal form in I."""
    nu: np.ndarray
    linear_map: np.ndarray
    h4: PoissonSeries = None
    h6: PoissonSeries = None
    residual: PoissonSeries = field(default=None, repr=False)
    hamiltonian: PoissonSeries = field(default=None, repr=False)
    n_fast: int = 0
    generators: list = field(default_factory=list, repr=False)

    @property
    def n_slow(self):
        return int(np.asarray(self.nu).shape[0])

    def nonlinear(self):
        """h4 + h6 as a series in the secular actions."""
        parts = [h for h in (self.h4, self.h6) if h is not None]
        if not parts:
            return PoissonSeries(max(self.n_slow, 1))
        total = parts[0]
        for part in parts[1:]:
            total = total + part
        return total

    def frequencies(self, I):
        """nu + grad(h4 + h6)(I)."""
        I = np.asarray(I, dtype=np.float64)
        h = self.nonlinear()
        zero = np.zeros(self.n_slow)
        return self.nu + np.array([evaluate(derive(h, action=j), I, zero) for j in range(self.n_slow)])

    def save(self, folder="pipeline"):
        FileManager.save_json({"nu": self.nu.tolist(), "linear_map": self.linear_map.tolist()},
                              f"{folder}/secular.json")
        for name in ("h4", "h6"):
            if getattr(self, name) is not None:
                save_series(getattr(self, name), f"{folder}/{name}.psx")


def secular_diagonalize(series, n_fast, tol=1e-10):
    """Symplectic change of the slow pairs making the quadratic secular part sum 1/2 nu_j (xi_j^2 + eta_j^2).

    For an eigenvalue i nu of J S with eigenvector a + i b, the new momentum
    column is b and the new coordinate column is a, scaled so that the pair
    is canonical; the conjugate pair is used (nu -> -nu) when the symplectic
    form has the wrong sign.
    """
    ns = series.n_dof - n_fast
    if ns == 0:
        return SecularForm(np.zeros(0), np.zeros((0, 0)), hamiltonian=series, n_fast=n_fast)
    S = secular_quadratic(series, n_fast)
    J = symplectic_matrix(ns)
    A = J @ S
    scale = max(float(np.abs(A).max()), np.finfo(np.float64).tiny)
    eigenvalues, vectors = np.linalg.eig(A)
    if np.any(np.abs(eigenvalues.real) > tol * scale):
        raise NotElliptic(f"Secular quadratic form has eigenvalues {eigenvalues}")
    upper = np.flatnonzero(eigenvalues.imag > tol * scale)
    if upper.shape[0] != ns:
        raise NotElliptic(f"Expected {ns} pairs of imaginary eigenvalues, got {eigenvalues}")
    frequencies = eigenvalues.imag[upper]
    if ns > 1 and np.min(np.diff(np.sort(frequencies))) <= tol * scale:
        raise DegenerateSpectrum(f"Secular frequencies {frequencies} are not pairwise distinct")
    momenta, coordinates, nu = [], [], []
    for index in upper[np.argsort(-frequencies)]:
        v = vectors[:, index]
        pivot = ns + int(np.argmax(np.abs(v[ns:])))
        v = v * np.conj(v[pivot]) / np.abs(v[pivot])
        c, d = v.imag.copy(), v.real.copy()
        frequency = float(eigenvalues[index].imag)
        form = float(c @ J @ d)
        if form > 0:
            c, form, frequency = -c, -form, -frequency
        factor = 1.0 / math.sqrt(-form)
        momenta.append(c * factor)
        coordinates.append(d * factor)
        nu.append(frequency)
    M = np.column_stack(momenta + coordinates)
    nu = np.array(nu)
    defect = float(np.abs(M.T @ J @ M - J).max())
    if defect > tol:
        raise NumericError(f"Secular map is not symplectic: |M^T J M - J| = {defect:.3e}")
    diagonal = M.T @ S @ M
    off = diagonal - np.diag(np.diag(diagonal))
    if np.abs(off).max() > tol * max(float(np.abs(S).max()), np.finfo(np.float64).tiny):
        raise NumericError(f"Diagonalized secular form keeps off-diagonal terms {np.abs(off).max():.3e}")
    transformed = linear_substitution(series, list(range(n_fast, series.n_dof)), M)
    Logger.info(f"Secular frequencies nu = {nu}")
    return SecularForm(nu, M, hamiltonian=transformed, n_fast=n_fast)


# step (iv)

def _double_factorial(n):
    return math.prod(range(n, 0, -2))


def _circle_average(a, b):
    """Average of cos^a(phi) sin^b(phi) over the circle."""
    if a % 2 or b % 2:
        return 0.0
    return _double_factorial(a - 1) * _double_factorial(b - 1) / _double_factorial(a + b)


def action_readout(part, n_fast):
    """Torus average of a secular polynomial expressed in I_j = (xi_j^2 + eta_j^2) / 2, as a dict."""
    ns = part.n_dof - n_fast
    readout = {}
    for coeff, l, m in zip(part.coeffs, part.l[:, n_fast:], part.m[:, n_fast:]):
        value = coeff
        for a, b in zip(l, m):
            value *= _circle_average(int(a), int(b)) * 2.0 ** ((a + b) / 2)
            if value == 0.0:
                break
        if value != 0.0:
            key = tuple(int((a + b) // 2) for a, b in zip(l, m))
            readout[key] = readout.get(key, 0.0) + value
    return {key: value for key, value in readout.items() if value != 0.0} if ns else {}


def _action_series(readout, ns, K):
    if not readout:
        return PoissonSeries(ns, K=K)
    keys = list(readout)
    return PoissonSeries(ns, [readout[key] for key in keys], l=keys, K=K)


def _cartesian_from_actions(readout, n_dof, n_fast, K):
    """Polynomial in (xi, eta) equal to sum c I^n with I_j = (xi_j^2 + eta_j^2) / 2."""
    ns = n_dof - n_fast
    terms = {}
    for powers, coeff in readout.items():
        choices = [[(i, comb(n, i, exact=True) * 2.0 ** (-n)) for i in range(n + 1)] for n in powers]
        for combination in itertools.product(*choices):
            exps = [0] * (2 * ns)
            value = coeff
            for j, ((i, weight), n) in enumerate(zip(combination, powers)):
                exps[j] = 2 * i
                exps[ns + j] = 2 * (n - i)
                value *= weight
            terms[tuple(exps)] = terms.get(tuple(exps), 0.0) + value
    return _slow_series(terms, n_dof, n_fast, K)


def _slow_series(terms, n_dof, n_fast, K):
    ns = n_dof - n_fast
    if not terms:
        return PoissonSeries(n_dof, K=K)
    keys = np.array(list(terms), dtype=np.int64).reshape(-1, 2 * ns)
    L = np.zeros((keys.shape[0], n_dof), dtype=np.int64)
    M = np.zeros((keys.shape[0], n_dof), dtype=np.int64)
    L[:, n_fast:] = keys[:, :ns]
    M[:, n_fast:] = keys[:, ns:]
    return PoissonSeries(n_dof, list(terms.values()), l=L, m=M, K=K)


def _homological_operator(basis, nu):
    """Matrix of chi -> {chi, 1/2 sum nu_j (xi_j^2 + eta_j^2)} on homogeneous monomials."""
    ns = nu.shape[0]
    index = {e: i for i, e in enumerate(basis)}
    L = np.zeros((len(basis), len(basis)))
    for column, e in enumerate(basis):
        for j in range(ns):
            a, b = e[j], e[ns + j]
            if a > 0:
                target = list(e)
                target[j] -= 1
                target[ns + j] += 1
                L[index[tuple(target)], column] += nu[j] * a
            if b > 0:
                target = list(e)
                target[j] += 1
                target[ns + j] -= 1
                L[index[tuple(target)], column] -= nu[j] * b
    return L


def _monomial_basis(ns, degree):
    basis = []
    for combination in itertools.combinations_with_replacement(range(2 * ns), degree):
        e = [0] * (2 * ns)
        for i in combination:
            e[i] += 1
        basis.append(tuple(e))
    return basis


def secular_birkhoff(secular, cap=3, floor=None, degrees=(4, 6), residual_tolerance=1e-10):
    """Birkhoff normalization of the secular part in Cartesian variables, then read out in the actions.

    At each even degree d the torus average Z_d of the degree-d secular part
    is kept and the rest is removed by chi_d solving {chi_d, H_2} = Z_d - H_d;
    chi_d is then applied to the whole Hamiltonian.
    """
    n_fast = secular.n_fast
    ns = secular.n_slow
    H = secular.hamiltonian
    if ns == 0:
        return SecularForm(secular.nu, secular.linear_map, PoissonSeries(1), PoissonSeries(1), H, H, n_fast)
    nu = np.asarray(secular.nu, dtype=np.float64)
    kmax = max(degrees)
    report = diophantine_scan(nu, kmax)
    floor = default_floor(nu, kmax) if floor is None else float(floor)
    if report.smallest_divisor < floor:
        raise SmallDivisor(report.offending_mode, report.smallest_divisor, floor)
    prune = WeightedCap(n_fast, cap)
    readouts = {}
    generators = []
    for degree in degrees:
        part = _secular_part(H, n_fast, degree)
        readout = action_readout(part, n_fast)
        readouts[degree] = readout
        if part.is_zero:
            continue
        Z = _cartesian_from_actions(readout, H.n_dof, n_fast, H.K)
        basis = _monomial_basis(ns, degree)
        position = {e: i for i, e in enumerate(basis)}
        target = np.zeros(len(basis))
        difference = Z - part
        for coeff, l, m in zip(difference.coeffs, difference.l[:, n_fast:], difference.m[:, n_fast:]):
            target[position[tuple(l) + tuple(m)]] += coeff
        operator = _homological_operator(basis, nu)
        solution = np.linalg.lstsq(operator, target, rcond=None)[0]
        misfit = float(np.abs(operator @ solution - target).max())
        if misfit > residual_tolerance * max(float(np.abs(target).max()), np.finfo(np.float64).tiny):
            raise NumericError(f"Secular degree {degree}: homological misfit {misfit:.3e}")
        chi = _slow_series({e: c for e, c in zip(basis, solution) if c != 0.0}, H.n_dof, n_fast, H.K)
        H = lie_transform(H, chi, prune=prune)
        remnant = _secular_part(H, n_fast, degree) - Z
        if remnant.norm() > residual_tolerance * part.norm():
            raise NumericError(f"Secular degree {degree}: residual {remnant.norm():.3e}")
        H = H - remnant
        generators.append(chi)
        Logger.info(f"Secular Birkhoff degree {degree}: |chi| = {chi.norm():.3e}, |Z| = {Z.norm():.3e}")
    h4 = _action_series(readouts.get(4, {}), ns, H.K)
    h6 = _action_series(readouts.get(6, {}), ns, H.K)
    normal = _cartesian_from_actions({**readouts.get(4, {}), **readouts.get(6, {})}, H.n_dof, n_fast, H.K)
    normal = normal + _secular_part(H, n_fast, 2)
    residual = H - normal
    Logger.info(f"Secular residual |F| = {residual.norm():.3e} over {len(residual)} terms")
    return SecularForm(nu, secular.linear_map, h4, h6, residual, H, n_fast, generators)


# step (v)

def locate_secular_torus(secular, g_star, tol=1e-12, max_iter=MAX_ITERATIONS):
    """I* >= 0 with nu + grad(h4 + h6)(I*) = g*."""
    g_star = np.asarray(g_star, dtype=np.float64).reshape(-1)
    ns = secular.n_slow
    if g_star.shape[0] != ns:
        raise DimensionMismatch(f"g* has {g_star.shape[0]} entries for {ns} secular frequencies")
    if ns == 0:
        return np.zeros(0)
    h = secular.nonlinear()
    zero = np.zeros(ns)
    gradient = [derive(h, action=j) for j in range(ns)]
    hessian = [[derive(g, action=i) for i in range(ns)] for g in gradient]
    target = g_star - secular.nu

    def residual(I):
        return np.array([evaluate(g, I, zero) for g in gradient]) - target

    def jacobian(I):
        return np.array([[evaluate(d, I, zero) for d in row] for row in hessian])

    I_star = newton(residual, jacobian, zero, tol=tol, max_iter=max_iter, label="Secular torus")
    if np.any(I_star < 0):
        raise NegativeAction(f"Secular actions I* = {I_star} are not all non negative")
    Logger.info(f"Secular torus at I* = {I_star}")
    return I_star


# assembly

def _radial_factor(power, center, degree):
    """(center + J)^power expanded to J^degree."""
    if center == 0.0:
        if power != int(power):
            raise DomainError("A half-integer power of a vanishing secular action cannot be expanded")
        return {int(power): 1.0} if power <= degree else {}
    return {n: float(binom(power, n)) * center ** (power - n) for n in range(degree + 1)
            if n <= power or power != int(power)}


def _angular_factor(a, b):
    """Fourier coefficients {(harmonic, parity): value} of cos^a(phi) sin^b(phi)."""
    laurent = np.array([1.0 + 0.0j])
    for _ in range(a):
        laurent = np.convolve(laurent, np.array([0.5, 0.0, 0.5]))
    for _ in range(b):
        laurent = np.convolve(laurent, np.array([0.5j, 0.0, -0.5j]))
    degree = a + b
    terms = {}
    for harmonic in range(degree + 1):
        value = laurent[degree + harmonic]
        if harmonic == 0:
            if abs(value.real) > 1e-15:
                terms[(0, Parity.COS)] = value.real
            continue
        if abs(value.real) > 1e-15:
            terms[(harmonic, Parity.COS)] = 2.0 * value.real
        if abs(value.imag) > 1e-15:
            terms[(harmonic, Parity.SIN)] = -2.0 * value.imag
    return terms


def _pair_series(j, a, b, center, degree, n_dof, K):
    """sqrt(2 (center + J))^(a + b) cos^a(phi) sin^b(phi) on degree of freedom j."""
    radial = _radial_factor((a + b) / 2.0, center, degree)
    coeffs, L, Kv, P = [], [], [], []
    for power, weight in radial.items():
        for (harmonic, parity), value in _angular_factor(a, b).items():
            l = np.zeros(n_dof, dtype=np.int64)
            k = np.zeros(n_dof, dtype=np.int64)
            l[j] = power
            k[j] = harmonic
            coeffs.append(2.0 ** ((a + b) / 2.0) * weight * value)
            L.append(l)
            Kv.append(k)
            P.append(int(parity))
    if not coeffs:
        return PoissonSeries(n_dof, K=K)
    return PoissonSeries(n_dof, coeffs, l=L, k=Kv, parity=P, K=K)


def to_action_angle(series, n_fast, I_star, cap=3):
    """Rewrite the slow Cartesian pairs as xi = sqrt(2(I* + J)) cos(phi), eta = sqrt(2(I* + J)) sin(phi)."""
    n_dof = series.n_dof
    ns = n_dof - n_fast
    I_star = np.asarray(I_star, dtype=np.float64).reshape(-1)
    if I_star.shape[0] != ns:
        raise DimensionMismatch(f"I* has {I_star.shape[0]} entries for {ns} slow degrees of freedom")
    if ns == 0 or series.is_zero:
        return series
    degree = int(math.floor(cap))
    c, L, M, Kv, P = series.arrays()
    patterns = np.hstack([L[:, n_fast:], M[:, n_fast:]])
    unique, inverse = np.unique(patterns, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    settings = dict(K=series.K, grading=Grading.RAW)
    cache = {}
    result = PoissonSeries(n_dof, **settings)
    for u, pattern in enumerate(unique):
        rows = np.flatnonzero(inverse == u)
        Lr = L[rows].copy()
        Lr[:, n_fast:] = 0
        Mr = np.zeros_like(M[rows])
        rest = PoissonSeries(n_dof, c[rows], l=Lr, k=Kv[rows], parity=P[rows], m=Mr, **settings)
        for j in range(ns):
            a, b = int(pattern[j]), int(pattern[ns + j])
            if a == 0 and b == 0:
                continue
            key = (j, a, b)
            if key not in cache:
                cache[key] = _pair_series(n_fast + j, a, b, float(I_star[j]), degree, n_dof, series.K)
            rest = multiply(rest, cache[key])
            rest = rest.select(rest.l.sum(axis=1) <= degree)
        result = result + rest
    Logger.debug(f"Action-angle form around I* = {I_star}: {len(result)} terms")
    return result


def assemble_kolmogorov_input(series, n_fast, n_star, g_star, I_star, cap=3):
    """KolmogorovInput with omega = (n*, g*) from the transformed Hamiltonian."""
    H = to_action_angle(series, n_fast, I_star, cap)
    constant = ~np.any(H.k != 0, axis=1) & (H.l.sum(axis=1) == 0) & (H.m.sum(axis=1) == 0)
    H = H.select(~constant)
    omega = np.concatenate([np.asarray(n_star, dtype=np.float64), np.asarray(g_star, dtype=np.float64)])
    kolmogorov_input = KolmogorovInput.from_series(H, omega)
    Logger.info(f"Kolmogorov input: |A| = {kolmogorov_input.A.norm():.3e}, |B| = {kolmogorov_input.B.norm():.3e}")
    return kolmogorov_input


@dataclass
class PipelineResult:
    kolmogorov_input: KolmogorovInput
    Lambda_star: np.ndarray
    secular: SecularForm
    I_star: np.ndarray
    n_star: np.ndarray
    g_star: np.ndarray

    def to_dict(self):
        return {"Lambda_star": self.Lambda_star.tolist(), "nu": np.asarray(self.secular.nu).tolist(),
                "I_star": self.I_star.tolist(), "n_star": self.n_star.tolist(), "g_star": self.g_star.tolist(),
                "A_norm": self.kolmogorov_input.A.norm(), "B_norm": self.kolmogorov_input.B.norm()}

    def save(self, folder="pipeline"):
        FileManager.save_json(self.to_dict(), f"{folder}/summary.json")
        self.secular.save(folder)
        save_series(self.kolmogorov_input.hamiltonian(), f"{folder}/kolmogorov_input.psx")


class PlanetaryPipeline(Normalizer):
    """Steps (i) to (v) taking a fast/slow Hamiltonian to the Kolmogorov input.

    ``order`` counts the completed steps; every step is checkpointed so that
    a run can resume after any of them.
    """
    STEPS = ("fast torus", "fast prenormalization", "secular diagonalization", "secular Birkhoff",
             "secular torus")

    def __init__(self, hamiltonian, n_star, g_star=None, secular_actions=None, fast_floor=None,
                 secular_floor=None):
        super().__init__()
        if (g_star is None) == (secular_actions is None):
            raise ValueError("Exactly one of g_star and secular_actions must be given")
        self.hamiltonian = hamiltonian
        self.n_star = np.asarray(n_star, dtype=np.float64)
        self.g_star = None if g_star is None else np.asarray(g_star, dtype=np.float64)
        self.secular_actions = None if secular_actions is None else np.asarray(secular_actions, dtype=np.float64)
        self.fast_floor = fast_floor
        self.secular_floor = secular_floor
        self.H = None
        self.Lambda_star = None
        self.secular = None
        self.I_star = None
        if FileManager.loading_enabled:
            try:
                self.load_checkpoint()
                return
            except FileNotFoundError:
                Logger.warning("Checkpoint not found. Fallback to standard construction.")
        else:
            Logger.debug("Loading disabled. Starting standard construction.")

    @property
    def cap(self):
        return self.hamiltonian.cap

    def step(self):
        index = self.order
        if index >= len(self.STEPS):
            raise ValueError("Every pipeline step is already done")
        Logger.info(f"Pipeline step {index + 1}: {self.STEPS[index]}")
        try:
            self._run_step(index)
        except NormalizerError as e:
            e.step = self.STEPS[index]
            Logger.error(f"Pipeline step {index + 1} ({self.STEPS[index]}) failed: {e}")
            raise
        self.order = index + 1
        save_series(self.H, f"pipeline/step_{self.order}.psx")

    def _run_step(self, index):
        n_fast = self.hamiltonian.n_fast
        if index == 0:
            self.Lambda_star = locate_fast_torus(self.hamiltonian, self.n_star)
            self.H = expand_and_translate(self.hamiltonian, self.Lambda_star)
        elif index == 1:
            self.H = fast_prenormalization(self.H, n_fast, self.cap, self.fast_floor)
        elif index == 2:
            self.secular = secular_diagonalize(self.H, n_fast)
            self.H = self.secular.hamiltonian
        elif index == 3:
            self.secular = secular_birkhoff(self.secular, self.cap, self.secular_floor)
            self.H = self.secular.hamiltonian
        else:
            if self.g_star is None:
                self.I_star = self.secular_actions
                self.g_star = self.secular.frequencies(self.I_star)
                Logger.info(f"Secular frequencies g* = {self.g_star} at the prescribed actions")
            else:
                self.I_star = locate_secular_torus(self.secular, self.g_star)

    def normalize(self, order=None):
        order = len(self.STEPS) if order is None else min(order, len(self.STEPS))
        while self.order < order:
            self.step()
            self.save_attributes()
            self.save_state()
        if self.order < len(self.STEPS):
            return None
        return self.result()

    def result(self):
        kolmogorov_input = assemble_kolmogorov_input(self.H, self.hamiltonian.n_fast, self.n_star, self.g_star,
                                                     self.I_star, self.cap)
        return PipelineResult(kolmogorov_input, self.Lambda_star, self.secular, self.I_star, self.n_star,
                              self.g_star)

    def save_attributes(self):
        Logger.debug("Saving pipeline attributes")
        secular = self.secular
        attributes = {
            'order': self.order,
            'n_star': self.n_star.tolist(),
            'g_star': None if self.g_star is None else self.g_star.tolist(),
            'Lambda_star': None if self.Lambda_star is None else self.Lambda_star.tolist(),
            'nu': None if secular is None else np.asarray(secular.nu).tolist(),
            'linear_map': None if secular is None else np.asarray(secular.linear_map).tolist(),
            'I_star': None if self.I_star is None else self.I_star.tolist()
        }
        FileManager.save_json(attributes, "checkpoint/pipeline_attributes.json")

    def save_state(self):
        Logger.debug("Saving pipeline state")
        save_series(self.H, "checkpoint/pipeline/hamiltonian.psx")
        if self.secular is not None:
            for name in ("h4", "h6", "residual"):
                if getattr(self.secular, name) is not None:
                    save_series(getattr(self.secular, name), f"checkpoint/pipeline/{name}.psx")

    def load_checkpoint(self):
        Logger.debug("Loading checkpoint")
        attributes = FileManager.load_json("checkpoint/pipeline_attributes.json")
        self.H = load_series("checkpoint/pipeline/hamiltonian.psx")
        self.order = attributes['order']
        self.n_star = np.array(attributes['n_star'])
        if attributes['g_star'] is not None:
            self.g_star = np.array(attributes['g_star'])
        if attributes['Lambda_star'] is not None:
            self.Lambda_star = np.array(attributes['Lambda_star'])
        if attributes['I_star'] is not None:
            self.I_star = np.array(attributes['I_star'])
        if attributes['nu'] is not None:
            self.secular = SecularForm(np.array(attributes['nu']), np.array(attributes['linear_map']),
                                       hamiltonian=self.H, n_fast=self.hamiltonian.n_fast)
            if self.order >= 4:
                self.secular.h4 = load_series("checkpoint/pipeline/h4.psx")
                self.secular.h6 = load_series("checkpoint/pipeline/h6.psx")
                self.secular.residual = load_series("checkpoint/pipeline/residual.psx")


def run_pipeline(hamiltonian, n_star, g_star=None, secular_actions=None, **options):
    return PlanetaryPipeline(hamiltonian, n_star, g_star, secular_actions, **options).normalize()


def default_drop_below(kolmogorov_input, relative=DROP_RELATIVE):
    """Absolute coefficient floor: ``relative`` times the norm of the assembled Hamiltonian."""
    return relative * kolmogorov_input.hamiltonian().norm()


def normalize_torus(result, kolmogorov_order=6, birkhoff_order=None, K=None, drop_below=None):
    """Kolmogorov, then optionally Birkhoff, normalization of the pipeline output.

    Coefficients below ``drop_below`` are discarded in every Lie series; by
    default the floor is ``default_drop_below`` of the assembled input and
    0 keeps every coefficient. Returns the pair (kolmogorov, birkhoff), the
    second None without ``birkhoff_order``.
    """
    kolmogorov_input = result.kolmogorov_input
    if drop_below is None:
        drop_below = default_drop_below(kolmogorov_input)
    Logger.info(f"Normalizing the torus with coefficients below {drop_below:.3e} discarded")
    kolmogorov = kolmogorov_normalize(kolmogorov_input, kolmogorov_order, drop_below=drop_below)
    if birkhoff_order is None:
        return kolmogorov, None
    torus = reduce_to_torus_nf(kolmogorov, K)
    birkhoff = birkhoff_normalize(torus, kolmogorov_input.omega, birkhoff_order, drop_below=drop_below)
    return kolmogorov, birkhoff
