import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import DomainError, DimensionMismatch, ResonantTermRetained, SmallDivisor
from ..series import Grading, Parity, PoissonSeries, linear_form, poisson_bracket
from ..util import Logger


@dataclass
class FrequencyVector:
    """Torus frequencies with the Diophantine constants |<k,omega>| >= gamma |k|^-tau_dio."""
    omega: np.ndarray
    gamma: float = 1.0
    tau_dio: float = None

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64).reshape(-1)
        if self.tau_dio is None:
            self.tau_dio = float(max(self.n_dof - 1, 0))
        if self.gamma <= 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if self.tau_dio < self.n_dof - 1:
            raise DomainError(f"tau_dio must be at least n_dof - 1 = {self.n_dof - 1}, got {self.tau_dio}")

    @property
    def n_dof(self):
        return int(self.omega.shape[0])

    def divisors(self, k):
        return np.asarray(k, dtype=np.float64) @ self.omega


def as_frequency(omega):
    return omega if isinstance(omega, FrequencyVector) else FrequencyVector(omega)


class Kind(Enum):
    ANGLE_ONLY = "angle_only"
    LINEAR_IN_ACTIONS = "linear_in_actions"
    GENERAL = "general"


@dataclass
class DivisorReport:
    smallest_divisor: float
    offending_mode: tuple
    diophantine_margin: float

    def to_dict(self):
        return {"smallest_divisor": self.smallest_divisor,
                "offending_mode": list(self.offending_mode),
                "diophantine_margin": self.diophantine_margin}


@dataclass
class GeneratingFunction:
    chi: PoissonSeries
    order_tag: int = 0
    kind: Kind = Kind.GENERAL
    divisors: DivisorReport = field(default=None, repr=False)

    def __post_init__(self):
        degree = self.chi.action_degree()
        if self.kind is Kind.ANGLE_ONLY and np.any(degree != 0):
            raise ValueError("An angle-only generating function must not depend on the actions")
        if self.kind is Kind.LINEAR_IN_ACTIONS and np.any(degree != 1):
            raise ValueError("A linear-in-actions generating function must have action degree 1")

    def norm(self):
        return self.chi.norm()

    @property
    def is_zero(self):
        return self.chi.is_zero


def wave_vectors(n_dof, kmax):
    """All nonzero wave vectors with |k| <= kmax and first nonzero entry positive."""
    values = np.arange(-kmax, kmax + 1, dtype=np.int64)
    rows = np.zeros((1, 0), dtype=np.int64)
    used = np.zeros(1, dtype=np.int64)
    linf = Grading.k_norm_code() == 1
    for _ in range(n_dof):
        rows = np.hstack([np.repeat(rows, values.shape[0], axis=0), np.tile(values, rows.shape[0])[:, None]])
        used = np.repeat(used, values.shape[0]) + (0 if linf else np.abs(rows[:, -1]))
        keep = used <= kmax
        rows, used = rows[keep], used[keep]
    nonzero = np.any(rows != 0, axis=1)
    rows = rows[nonzero]
    first = rows[np.arange(rows.shape[0]), np.argmax(rows != 0, axis=1)]
    return rows[first > 0]


def diophantine_scan(omega, Kmax):
    """Smallest divisor over 0 < |k| <= Kmax and the empirical Diophantine constant."""
    omega = as_frequency(omega)
    if Kmax < 1:
        raise DomainError(f"Kmax must be at least 1, got {Kmax}")
    k = wave_vectors(omega.n_dof, int(Kmax))
    divisors = np.abs(omega.divisors(k))
    index = int(np.argmin(divisors))
    margin = float(np.min(divisors * Grading.wave_norm(k).astype(np.float64) ** omega.tau_dio))
    report = DivisorReport(float(divisors[index]), tuple(int(x) for x in k[index]), margin)
    Logger.debug(f"Diophantine scan up to |k| = {Kmax}: {report}")
    return report


def default_floor(omega, Kmax):
    """Half the divisor bound gamma_emp * Kmax^-tau_dio guaranteed by the scan."""
    omega = as_frequency(omega)
    report = diophantine_scan(omega, Kmax)
    floor = 0.5 * report.diophantine_margin * float(Kmax) ** (-omega.tau_dio)
    if floor <= 0.0:
        floor = np.finfo(np.float64).eps * float(np.abs(omega.omega).sum())
    return floor


def solve_homological(omega, rhs, floor=None, order_tag=0, kind=None, resonance="raise"):
    """Solve {chi, <omega,p>} + rhs = mean mode by mode.

    Every term of ``rhs`` with k != 0 is divided by <k,omega> with the
    cos/sin roles swapped; k = 0 terms go to ``mean``. A mode whose divisor is
    below ``floor`` raises SmallDivisor, or with ``resonance='keep'`` is left
    in ``mean`` with a ResonantTermRetained warning.

    Returns
    -------
    (GeneratingFunction, PoissonSeries)
    """
    VALID_RESONANCE = {"raise", "keep"}
    if resonance not in VALID_RESONANCE:
        raise ValueError(f"resonance must be one of {VALID_RESONANCE}, got '{resonance}'")
    omega = as_frequency(omega)
    if omega.n_dof != rhs.n_dof:
        raise DimensionMismatch(f"Frequency vector of length {omega.n_dof} for a {rhs.n_dof}-dof series")
    floor = 0.0 if floor is None else float(floor)

    c, L, M, Kv, P = rhs.arrays()
    oscillating = np.any(Kv != 0, axis=1)
    divisors = omega.divisors(Kv)
    small = oscillating & (np.abs(divisors) < floor)
    if np.any(small):
        worst = int(np.flatnonzero(small)[np.argmin(np.abs(divisors[small]))])
        if resonance == "raise":
            raise SmallDivisor(Kv[worst], divisors[worst], floor)
        for i in np.flatnonzero(small):
            warning = ResonantTermRetained(Kv[i], divisors[i])
            Logger.warning(str(warning))
            warnings.warn(warning)
    solved = oscillating & ~small

    d = divisors[solved]
    coeffs = np.where(P[solved] == Parity.COS, c[solved] / d, -c[solved] / d)
    chi = rhs.with_terms(coeffs, L[solved], M[solved], Kv[solved], 1 - P[solved])
    mean = rhs.select(~solved)

    report = None
    if np.any(solved):
        index = int(np.argmin(np.abs(d)))
        knorm = Grading.wave_norm(Kv[solved]).astype(np.float64)
        tau = omega.tau_dio
        report = DivisorReport(float(abs(d[index])), tuple(int(x) for x in Kv[solved][index]),
                               float(np.min(np.abs(d) * knorm ** tau)))
    if kind is None:
        degree = chi.action_degree()
        if degree.size and np.all(degree == 0):
            kind = Kind.ANGLE_ONLY
        elif degree.size and np.all(degree == 1):
            kind = Kind.LINEAR_IN_ACTIONS
        else:
            kind = Kind.GENERAL
    return GeneratingFunction(chi, order_tag, kind, report), mean


def homological_residual(omega, chi, rhs, mean):
    """Norm of {chi, <omega,p>} + rhs - mean."""
    omega = as_frequency(omega)
    frequency = linear_form(omega.omega, **rhs.settings(action_cap=None))
    chi_series = chi.chi if isinstance(chi, GeneratingFunction) else chi
    if chi_series.is_zero:
        return (rhs - mean).norm()
    if rhs.grading == Grading.TORUS:
        chi_series = chi_series.with_terms(*chi_series.arrays(), **rhs.settings(action_cap=None))
    return (poisson_bracket(chi_series, frequency) + rhs - mean).norm()
