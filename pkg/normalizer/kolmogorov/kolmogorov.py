import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
import pandas as pd
from sklearn.linear_model import LinearRegression

from ..errors import DegenerateTwist, DimensionMismatch, NumericError
from ..lie import Expansion, FrequencyVector, Kind, as_frequency, default_floor, hamiltonian_flow, lie_flow, \
    solve_homological
from ..normalizer import Normalizer
from ..series import Grading, PoissonSeries, linear_form, load_series, quadratic_form, save_series, truncate
from ..util import FileManager, Logger

NORM_COLUMNS = ["order", "chi1_norm", "chi2_norm", "A_norm", "B_norm"]


def _action_degree(series):
    return series.l.sum(axis=1) + series.m.sum(axis=1)


def _oscillating(series):
    return np.any(series.k != 0, axis=1)


def angle_part(series):
    """Terms independent of the actions, constants excluded."""
    return series.select(lambda s: (_action_degree(s) == 0) & _oscillating(s))


def linear_part(series):
    return series.select(lambda s: _action_degree(s) == 1)


def linear_coefficients(series):
    """Coefficients b of the angle independent linear part <b, p>."""
    b = np.zeros(series.n_dof)
    mask = (_action_degree(series) == 1) & ~_oscillating(series) & (series.m.sum(axis=1) == 0)
    rows = np.flatnonzero(mask)
    b[np.argmax(series.l[rows], axis=1)] = series.coeffs[rows]
    return b


def twist_matrix(series):
    """Symmetric C of the angle independent quadratic part 1/2 <C p, p>."""
    n = series.n_dof
    C = np.zeros((n, n))
    mask = (series.l.sum(axis=1) == 2) & (series.m.sum(axis=1) == 0) & ~_oscillating(series)
    for coeff, l in zip(series.coeffs[mask], series.l[mask]):
        indices = np.flatnonzero(l)
        if indices.shape[0] == 1:
            i = indices[0]
            C[i, i] += 2.0 * coeff
        else:
            i, j = indices
            C[i, j] += coeff
            C[j, i] += coeff
    return C


@dataclass
class KolmogorovInput:
    """H = <omega,p> + A(q) + <B(q),p> + 1/2 <C p,p> + higher(p,q).

    ``A`` and ``B`` carry the small parameter; ``higher`` collects the terms
    of action degree >= 2 other than the quadratic twist.
    """
    omega: FrequencyVector
    A: PoissonSeries
    B: PoissonSeries
    C: np.ndarray
    higher: PoissonSeries
    epsilon_tag: float = 1.0

    def __post_init__(self):
        self.omega = as_frequency(self.omega)
        self.C = np.asarray(self.C, dtype=np.float64)
        n = self.omega.n_dof
        for name in ("A", "B", "higher"):
            if getattr(self, name).n_dof != n:
                raise DimensionMismatch(f"{name} has {getattr(self, name).n_dof} degrees of freedom, expected {n}")
        if self.C.shape != (n, n):
            raise DimensionMismatch(f"C must be {n}x{n}, got {self.C.shape}")
        scale = max(np.abs(self.C).max(), 1.0)
        if np.abs(self.C - self.C.T).max() > 1e-12 * scale:
            raise ValueError("The twist matrix C must be symmetric")
        self.C = 0.5 * (self.C + self.C.T)
        if abs(np.linalg.det(self.C)) <= 1e-12 * scale ** n:
            raise DegenerateTwist(f"det C = {np.linalg.det(self.C):.3e} vanishes")
        if np.any(_action_degree(self.A) != 0):
            raise ValueError("A must not depend on the actions")
        if np.any(_action_degree(self.B) != 1):
            raise ValueError("B must be linear in the actions")

    @property
    def n_dof(self):
        return self.omega.n_dof

    @property
    def K(self):
        return self.A.K

    @classmethod
    def from_series(cls, H, omega, C=None, epsilon_tag=1.0):
        """Split a raw series around <omega,p> into the Kolmogorov input pieces."""
        omega = as_frequency(omega)
        H = H.with_terms(*H.arrays(), grading=Grading.RAW, action_cap=None, trig_cap=None)
        degree = _action_degree(H)
        osc = _oscillating(H)
        A = H.select((degree == 0) & osc)
        linear = H.select(degree == 1)
        B = linear - linear_form(omega.omega, **linear.settings())
        twist = twist_matrix(H) if C is None else np.asarray(C, dtype=np.float64)
        quadratic_average = (degree == 2) & ~osc & (H.m.sum(axis=1) == 0)
        higher = H.select((degree >= 2) & ~quadratic_average)
        if C is not None:
            higher = higher + H.select(quadratic_average) - quadratic_form(twist, **higher.settings())
        return cls(omega, A, B, twist, higher, epsilon_tag)

    def hamiltonian(self):
        settings = dict(K=self.K, grading=Grading.RAW)
        H = linear_form(self.omega.omega, **settings) + quadratic_form(self.C, **settings)
        for part in (self.A, self.B, self.higher):
            H = H + part.with_terms(*part.arrays(), **settings)
        return H

    def expansion(self, max_tag, action_cap=3, prune=None):
        """Order-tagged form: tag 0 holds the integrable part, tag 1 the perturbation.

        ``prune`` is applied to every part, the initial ones included.
        """
        settings = dict(K=self.K, grading=Grading.RAW)
        higher = self.higher.with_terms(*self.higher.arrays(), **settings)
        unperturbed = linear_form(self.omega.omega, **settings) + quadratic_form(self.C, **settings) \
            + higher.average()
        perturbation = self.A.with_terms(*self.A.arrays(), **settings) \
            + self.B.with_terms(*self.B.arrays(), **settings) + higher.oscillating()
        return Expansion({0: unperturbed, 1: perturbation}, max_tag, K=self.K, action_cap=action_cap,
                         prune=prune)


@dataclass
class KolmogorovResult:
    normal_form: PoissonSeries
    gen_norms: list
    residual_norms: list
    decay_ratio: float
    omega: FrequencyVector = None
    K: int = 4
    flags: set = field(default_factory=set)
    transforms: list = field(default_factory=list, repr=False)
    dropped_mass: float = 0.0

    @property
    def order(self):
        return len(self.gen_norms)

    def to_frame(self):
        rows = [[j, chi1, chi2, a, b] for (j, chi1, chi2), (_, a, b) in zip(self.gen_norms, self.residual_norms)]
        return pd.DataFrame(rows, columns=NORM_COLUMNS)

    def save(self, folder="kolmogorov"):
        FileManager.save_csv(self.to_frame(), f"{folder}/norms.csv")
        save_series(self.normal_form, f"{folder}/normal_form.psx")


def decay_ratio(gen_norms):
    """Geometric ratio of the generating norms by least squares on their logarithms."""
    orders = np.array([j for j, chi1, chi2 in gen_norms if chi1 + chi2 > 0], dtype=np.float64)
    norms = np.array([chi1 + chi2 for j, chi1, chi2 in gen_norms if chi1 + chi2 > 0])
    if orders.shape[0] < 2:
        return math.nan
    fit = LinearRegression().fit(orders.reshape(-1, 1), np.log(norms))
    return float(np.exp(fit.coef_[0]))


class KolmogorovNormalizer(Normalizer):
    """Order-by-order Kolmogorov normalization in powers of the perturbation tag.

    Step j removes, at tag j, the angle-only terms (generating function
    chi1), the average of the linear terms (translation of the actions) and
    the oscillating linear terms (generating function chi2).
    """

    def __init__(self, kolmogorov_input, max_order, action_cap=3, floor=None, kmax_scan=None,
                 residual_tolerance=1e-11, drop_below=0.0):
        super().__init__()
        self.input = kolmogorov_input
        self.omega = kolmogorov_input.omega
        self.residual_tolerance = residual_tolerance
        if FileManager.loading_enabled:
            try:
                self.load_checkpoint()
                return
            except FileNotFoundError:
                Logger.warning("Checkpoint not found. Fallback to standard construction.")
        else:
            Logger.debug("Loading disabled. Starting standard construction.")
        if max_order < 1:
            raise ValueError(f"The normalization order must be at least 1, got {max_order}")
        self.max_order = int(max_order)
        self.action_cap = action_cap
        self.drop_below = float(drop_below)
        if floor is None:
            kmax = kmax_scan or kolmogorov_input.K * (self.max_order + 1)
            floor = default_floor(self.omega, kmax)
        self.floor = float(floor)
        self.C = kolmogorov_input.C
        self.expansion = kolmogorov_input.expansion(self.max_order + 1, action_cap, self._prune())
        self.gen_norms = []
        self.residual_norms = []
        self.transforms = []

    def _prune(self):
        """Coefficient floor applied to every new term, None when disabled."""
        if self.drop_below <= 0.0:
            return None
        return partial(truncate, drop_below=self.drop_below)

    def _kill(self, selector, kind, tag, label):
        rhs = selector(self.expansion.part(tag)) if tag in self.expansion.parts else None
        if rhs is None or rhs.is_zero:
            return PoissonSeries(self.omega.n_dof, K=self.input.K), 0.0
        chi, mean = solve_homological(self.omega, rhs, self.floor, order_tag=tag, kind=kind)
        self.expansion = self.expansion.transform(chi, tag)
        remnant = selector(self.expansion.part(tag)) if tag in self.expansion.parts else None
        if remnant is not None and not remnant.is_zero:
            self._project(tag, remnant, rhs.norm(), label)
        self.transforms.append(("lie", chi.chi))
        if chi.divisors is not None:
            Logger.debug(f"{label} at order {tag}: smallest divisor {chi.divisors.smallest_divisor:.3e} "
                         f"at k = {chi.divisors.offending_mode}")
        return chi.chi, chi.chi.norm()

    def _project(self, tag, remnant, reference, label):
        residual = remnant.norm()
        if residual > self.residual_tolerance * max(reference, np.finfo(np.float64).tiny):
            raise NumericError(f"{label} at order {tag}: residual {residual:.3e} above "
                               f"{self.residual_tolerance:.1e} x {reference:.3e}")
        Logger.debug(f"{label} at order {tag}: residual {residual:.3e} projected out")
        self.expansion = self.expansion.with_part(tag, self.expansion.part(tag) - remnant)

    def _translate(self, tag):
        part = self.expansion.part(tag) if tag in self.expansion.parts else None
        if part is None:
            return np.zeros(self.omega.n_dof)
        b = linear_coefficients(part)
        if not np.any(b):
            return np.zeros(self.omega.n_dof)
        try:
            shift = -np.linalg.solve(self.C, b)
        except np.linalg.LinAlgError as e:
            raise DegenerateTwist(f"Cannot solve C s = -<B> at order {tag}: {e}") from e
        self.expansion = self.expansion.translate(shift, tag).drop_constants()
        remnant = self.expansion.part(tag).select(
            lambda s: (_action_degree(s) == 1) & ~_oscillating(s)) if tag in self.expansion.parts else None
        if remnant is not None and not remnant.is_zero:
            self._project(tag, remnant, float(np.abs(b).sum()), "translation")
        self.transforms.append(("shift", shift))
        return shift

    def step(self):
        j = self.order + 1
        Logger.debug(f"Kolmogorov step {j}")
        chi1, chi1_norm = self._kill(angle_part, Kind.ANGLE_ONLY, j, "chi1")
        shift = self._translate(j)
        chi2, chi2_norm = self._kill(lambda s: linear_part(s).oscillating(), Kind.LINEAR_IN_ACTIONS, j, "chi2")
        self.expansion = self.expansion.drop_constants()
        self.order = j
        self.gen_norms.append((j, chi1_norm, chi2_norm))
        self.residual_norms.append((j, *self.remainder_norms()))
        Logger.debug(f"Order {j}: |chi1| = {chi1_norm:.3e}, |chi2| = {chi2_norm:.3e}, "
                     f"|shift| = {np.abs(shift).max():.3e}, |A| = {self.residual_norms[-1][1]:.3e}, "
                     f"|B| = {self.residual_norms[-1][2]:.3e}")
        return chi1, shift, chi2

    def remainder_norms(self):
        """Norms of the remaining angle-only and linear (frequency excluded) content."""
        A = 0.0
        B = 0.0
        for tag, part in self.expansion.parts.items():
            A += angle_part(part).norm()
            if tag > 0:
                B += linear_part(part).norm()
        return A, B

    def normalize(self, order=None):
        order = self.max_order if order is None else min(order, self.max_order)
        Logger.info(f"Starting Kolmogorov normalization up to order {order}")
        result = super().normalize(order)
        Logger.info("Kolmogorov normalization finished")
        return result

    def result(self):
        ratio = decay_ratio(self.gen_norms)
        flags = set()
        if math.isnan(ratio):
            flags.add("DECAY_UNDEFINED")
        elif ratio >= 1.0:
            flags.add("NON_CONVERGENT")
            Logger.warning(f"Generating functions do not decay (ratio {ratio:.3f})")
        normal_form = self.expansion.total()
        if normal_form is None:
            normal_form = PoissonSeries(self.omega.n_dof, K=self.input.K)
        return KolmogorovResult(normal_form, list(self.gen_norms), list(self.residual_norms), ratio,
                                self.omega, self.input.K, flags, list(self.transforms))

    def save_attributes(self):
        Logger.debug("Saving Kolmogorov attributes")
        attributes = {
            'max_order': self.max_order,
            'order': self.order,
            'action_cap': self.action_cap,
            'drop_below': self.drop_below,
            'floor': self.floor,
            'max_tag': self.expansion.max_tag,
            'tags': self.expansion.tags,
            'loss': self.expansion.loss,
            'gen_norms': self.gen_norms,
            'residual_norms': self.residual_norms,
            'transforms': [[kind, value.tolist() if kind == "shift" else None] for kind, value in self.transforms]
        }
        FileManager.save_json(attributes, "checkpoint/kolmogorov_attributes.json")

    def save_state(self):
        Logger.debug("Saving Kolmogorov state")
        for tag, part in self.expansion.parts.items():
            save_series(part, f"checkpoint/kolmogorov/tag_{tag}.psx")
        for index, (kind, value) in enumerate(self.transforms):
            if kind == "lie":
                save_series(value, f"checkpoint/kolmogorov/transform_{index}.psx")

    def load_checkpoint(self):
        Logger.debug("Loading checkpoint")
        attributes = FileManager.load_json("checkpoint/kolmogorov_attributes.json")
        self.max_order = attributes['max_order']
        self.order = attributes['order']
        self.action_cap = attributes['action_cap']
        self.drop_below = attributes['drop_below']
        self.floor = attributes['floor']
        self.C = self.input.C
        self.gen_norms = [tuple(row) for row in attributes['gen_norms']]
        self.residual_norms = [tuple(row) for row in attributes['residual_norms']]
        parts = {tag: load_series(f"checkpoint/kolmogorov/tag_{tag}.psx") for tag in attributes['tags']}
        self.expansion = Expansion(parts, attributes['max_tag'], K=self.input.K, action_cap=self.action_cap,
                                   loss=attributes['loss'], prune=self._prune())
        self.transforms = []
        for index, (kind, value) in enumerate(attributes['transforms']):
            if kind == "shift":
                self.transforms.append((kind, np.array(value)))
            else:
                self.transforms.append((kind, load_series(f"checkpoint/kolmogorov/transform_{index}.psx")))


def kolmogorov_step(normalizer):
    """One normalization step on a running normalizer; returns (chi1, shift, chi2, normalizer)."""
    chi1, shift, chi2 = normalizer.step()
    return chi1, shift, chi2, normalizer


def kolmogorov_normalize(kolmogorov_input, r, **options):
    if r < 1:
        raise ValueError(f"The normalization order must be at least 1, got {r}")
    return KolmogorovNormalizer(kolmogorov_input, r, **options).normalize(r)


def reduce_to_torus_nf(result, K=None):
    """Drop the residual angle-only and linear terms and regrade to the torus grading.

    The frequency term <omega,p> is kept; the dropped mass is stored in
    ``result.dropped_mass`` and added to the loss of the returned series.
    """
    H = result.normal_form
    omega = result.omega.omega
    degree = _action_degree(H)
    dropped = H.select(degree == 0).norm()
    linear = H.select(degree == 1)
    deviation = linear - linear_form(omega, **linear.settings())
    dropped += deviation.norm()
    kept = H.select(degree >= 2) + linear_form(omega, **H.settings())
    torus = PoissonSeries(H.n_dof, kept.coeffs, l=kept.l, k=kept.k, parity=kept.parity, m=kept.m,
                          K=result.K if K is None else K, grading=Grading.TORUS,
                          loss=dropped)
    result.dropped_mass = dropped
    Logger.info(f"Torus normal form: dropped mass {dropped:.3e}, regrading loss {torus.loss - dropped:.3e}")
    return torus


@dataclass
class CertificationReport:
    max_deviation: float
    threshold: float
    torus_point: np.ndarray
    times: np.ndarray

    @property
    def passed(self):
        return self.max_deviation <= self.threshold

    def to_dict(self):
        return {"max_deviation": self.max_deviation, "threshold": self.threshold, "passed": self.passed,
                "torus_point": self.torus_point.tolist()}


def to_original(transforms, q, p):
    """Map normalized coordinates back to the original ones."""
    q, p = np.asarray(q, dtype=np.float64), np.asarray(p, dtype=np.float64)
    for kind, value in reversed(transforms):
        if kind == "shift":
            p = p + value
        else:
            q, p = lie_flow(value, q, p, 1.0)
    return q, p


def to_normalized(transforms, q, p):
    q, p = np.asarray(q, dtype=np.float64), np.asarray(p, dtype=np.float64)
    for kind, value in transforms:
        if kind == "shift":
            p = p - value
        else:
            q, p = lie_flow(value, q, p, -1.0)
    return q, p


def certify_torus(kolmogorov_input, result, q0, t_final, samples=10, threshold_floor=1e-8, rtol=1e-11):
    """Integrate the original Hamiltonian from the constructed torus point.

    The orbit is mapped to the normalized coordinates at ``samples``
    instants, where the actions must stay at zero; the largest deviation is
    compared to max(threshold_floor, 10 sqrt(dropped mass)).
    """
    n = kolmogorov_input.n_dof
    q0 = np.asarray(q0, dtype=np.float64)
    q_start, p_start = to_original(result.transforms, q0, np.zeros(n))
    times = np.linspace(0.0, float(t_final), samples + 1)
    Logger.info(f"Certifying the torus over {t_final:g} time units")
    solution = hamiltonian_flow(kolmogorov_input.hamiltonian(), q_start, p_start, t_final, t_eval=times,
                                rtol=rtol, atol=rtol * 1e-2)
    deviation = 0.0
    for column in range(solution.y.shape[1]):
        _, p = to_normalized(result.transforms, solution.y[:n, column], solution.y[n:, column])
        deviation = max(deviation, float(np.abs(p).max()))
    threshold = max(threshold_floor, 10.0 * math.sqrt(result.dropped_mass))
    Logger.info(f"Torus certification: max action deviation {deviation:.3e} (threshold {threshold:.3e})")
    return CertificationReport(deviation, threshold, np.concatenate([q_start, p_start]), times)
