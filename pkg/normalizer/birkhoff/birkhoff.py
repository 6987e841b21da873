from dataclasses import dataclass, field
from functools import partial

import numpy as np
import pandas as pd

from ..errors import DimensionMismatch, NumericError
from ..lie import as_frequency, default_floor, lie_transform, solve_homological
from ..normalizer import Normalizer
from ..series import Grading, PoissonSeries, derive, load_series, save_series, truncate
from ..util import FileManager, Logger

NORM_COLUMNS = ["order", "gen_norm", "Z_norm", "Dr", "n_coeffs"]


def remainder_bound(F):
    """2 max_j ||dF/dq_j||, the majorized norm of {p, F}."""
    if F.is_zero:
        return 0.0
    return 2.0 * max(derive(F, angle=j).norm() for j in range(F.n_dof))


@dataclass
class BirkhoffResult:
    Z: list
    remainder_head: PoissonSeries
    D: list
    gen_norms: list = field(default_factory=list)
    coefficient_counts: list = field(default_factory=list)
    flags: set = field(default_factory=set)
    normal_form: PoissonSeries = field(default=None, repr=False)

    @property
    def order(self):
        return len(self.Z)

    @property
    def D_table(self):
        return {r: value for r, value in self.D}

    def truncated_hamiltonian(self):
        """<omega,p> + Z_1 + ... + Z_r."""
        return self.normal_form.select(lambda s: s.grade <= self.order)

    def to_frame(self):
        rows = []
        for (s, gen), Z, (_, D), (_, count) in zip(self.gen_norms, self.Z, self.D, self.coefficient_counts):
            rows.append([s, gen, Z.norm(), D, count])
        return pd.DataFrame(rows, columns=NORM_COLUMNS)

    def save(self, folder="birkhoff"):
        FileManager.save_csv(self.to_frame(), f"{folder}/norms.csv")
        save_series(self.remainder_head, f"{folder}/remainder_head.psx")
        if self.normal_form is not None:
            save_series(self.normal_form, f"{folder}/normal_form.psx")


class BirkhoffNormalizer(Normalizer):
    """Birkhoff normalization of a torus-graded Hamiltonian <omega,p> + H_1 + H_2 + ...

    Step s removes the angle dependence of grade s. The grade s+1 part left
    after step s is the remainder head used for D_s.
    """
    VALID_RESONANCE = {"raise", "keep"}

    def __init__(self, H, omega, max_order, floor=None, resonance="raise", drop_below=0.0):
        super().__init__()
        self.omega = as_frequency(omega)
        if FileManager.loading_enabled:
            try:
                self.load_checkpoint()
                return
            except FileNotFoundError:
                Logger.warning("Checkpoint not found. Fallback to standard construction.")
        else:
            Logger.debug("Loading disabled. Starting standard construction.")
        if H.grading != Grading.TORUS:
            raise ValueError(f"Birkhoff normalization needs a torus-graded Hamiltonian, got '{H.grading}'")
        if H.n_dof != self.omega.n_dof:
            raise DimensionMismatch(f"Frequency vector of length {self.omega.n_dof} for a {H.n_dof}-dof series")
        if resonance not in self.VALID_RESONANCE:
            raise ValueError(f"resonance must be one of {self.VALID_RESONANCE}, got '{resonance}'")
        if max_order < 1:
            raise ValueError(f"The normalization order must be at least 1, got {max_order}")
        self.max_order = int(max_order)
        self.resonance = resonance
        self.drop_below = float(drop_below)
        self.floor = float(floor) if floor is not None else default_floor(self.omega, H.K * (self.max_order + 1))
        self.H = truncate(H, action_cap=self.max_order + 2, drop_below=self.drop_below)
        self.Z = []
        self.D = []
        self.gen_norms = []
        self.coefficient_counts = []
        self.flags = set()

    def _prune(self):
        if self.drop_below <= 0.0:
            return None
        return partial(truncate, drop_below=self.drop_below)

    def step(self):
        s = self.order + 1
        Logger.debug(f"Birkhoff step {s}")
        rhs = self.H.grade_part(s)
        chi, mean = solve_homological(self.omega, rhs, self.floor, order_tag=s, resonance=self.resonance)
        if not mean.oscillating().is_zero:
            self.flags.add("RESONANT")
        if not chi.is_zero:
            self.H = lie_transform(self.H, chi, max_grade=self.max_order + 1, prune=self._prune())
            remnant = self.H.grade_part(s) - mean
            residual = remnant.norm()
            if residual > 1e-11 * max(rhs.norm(), np.finfo(np.float64).tiny):
                raise NumericError(f"Birkhoff order {s}: residual {residual:.3e} for |rhs| = {rhs.norm():.3e}")
            self.H = self.H - remnant
        if self.drop_below > 0.0:
            self.H = truncate(self.H, drop_below=self.drop_below)
        Z = self.H.grade_part(s)
        F = self.H.grade_part(s + 1)
        D = remainder_bound(F)
        self.order = s
        self.Z.append(Z)
        self.D.append((s, D))
        self.gen_norms.append((s, chi.norm()))
        self.coefficient_counts.append((s, len(self.H)))
        Logger.debug(f"Order {s}: |chi| = {chi.norm():.3e}, |Z| = {Z.norm():.3e}, D = {D:.3e}, "
                     f"{len(self.H)} coefficients ({len(F)} in the remainder head)")
        return chi

    def normalize(self, order=None):
        order = self.max_order if order is None else min(order, self.max_order)
        Logger.info(f"Starting Birkhoff normalization up to order {order}")
        result = super().normalize(order)
        Logger.info("Birkhoff normalization finished")
        if len(self.D) >= 2 and self.D[-2][1] > 0:
            Logger.info(f"Remainder head ratio D_{self.order}/D_{self.order - 1} = "
                        f"{self.D[-1][1] / self.D[-2][1]:.3e}")
        return result

    def result(self):
        head = self.H.grade_part(self.order + 1)
        return BirkhoffResult(list(self.Z), head, list(self.D), list(self.gen_norms), list(self.coefficient_counts),
                              set(self.flags), self.H)

    def save_attributes(self):
        Logger.debug("Saving Birkhoff attributes")
        attributes = {
            'max_order': self.max_order,
            'order': self.order,
            'resonance': self.resonance,
            'drop_below': self.drop_below,
            'floor': self.floor,
            'D': self.D,
            'gen_norms': self.gen_norms,
            'coefficient_counts': self.coefficient_counts,
            'flags': sorted(self.flags)
        }
        FileManager.save_json(attributes, "checkpoint/birkhoff_attributes.json")

    def save_state(self):
        Logger.debug("Saving Birkhoff state")
        save_series(self.H, "checkpoint/birkhoff/hamiltonian.psx")

    def load_checkpoint(self):
        Logger.debug("Loading checkpoint")
        attributes = FileManager.load_json("checkpoint/birkhoff_attributes.json")
        self.H = load_series("checkpoint/birkhoff/hamiltonian.psx")
        self.max_order = attributes['max_order']
        self.order = attributes['order']
        self.resonance = attributes['resonance']
        self.drop_below = attributes['drop_below']
        self.floor = attributes['floor']
        self.D = [tuple(row) for row in attributes['D']]
        self.gen_norms = [tuple(row) for row in attributes['gen_norms']]
        self.coefficient_counts = [tuple(row) for row in attributes['coefficient_counts']]
        self.flags = set(attributes['flags'])
        self.Z = [self.H.grade_part(s) for s in range(1, self.order + 1)]


def birkhoff_normalize(H, omega, r, **options):
    return BirkhoffNormalizer(H, omega, r, **options).normalize(r)


def remainder_norm(result):
    """D_r of the last computed order."""
    return remainder_bound(result.remainder_head)
