import math
import re
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DomainError, NumericError
from ..util import FileManager, Logger

CURVE_COLUMNS = ["rho0", "r_opt", "rho_opt", "T"]
ACTION_LIKE = re.compile(r"^(Lambda|xi|eta)\d*$")


def escape_time(rho0, rho, r, D):
    """(rho - rho0) / (D rho^(r+2)), the time needed to leave the box of radius rho."""
    if rho0 <= 0:
        raise DomainError(f"rho0 must be positive, got {rho0}")
    if rho <= rho0:
        raise DomainError(f"rho must exceed rho0, got rho = {rho} <= rho0 = {rho0}")
    if D < 0:
        raise DomainError(f"D_r must be non negative, got {D}")
    if D == 0:
        return math.inf
    return (rho - rho0) / (D * rho ** (r + 2))


def optimal_radius(rho0, r):
    if r < 0:
        raise DomainError(f"r must be non negative, got {r}")
    return rho0 * (r + 2) / (r + 1)


def log_tau_tilde(rho0, r, D):
    """Logarithm of the escape time at the optimal radius."""
    if rho0 <= 0:
        raise DomainError(f"rho0 must be positive, got {rho0}")
    if D < 0:
        raise DomainError(f"D_r must be non negative, got {D}")
    if D == 0:
        return math.inf
    return (math.log(rho0 / (r + 1)) + (r + 2) * math.log((r + 1) / (r + 2))
            - (r + 2) * math.log(rho0) - math.log(D))


def tau_tilde(rho0, r, D):
    return escape_time(rho0, optimal_radius(rho0, r), r, D)


def tau_tilde_closed(rho0, r, D):
    if D == 0:
        return math.inf
    return (rho0 / (r + 1)) * ((r + 1) / (r + 2)) ** (r + 2) * rho0 ** (-(r + 2)) / D


@dataclass
class StabilityQuery:
    rho0: float
    D_table: dict
    r_max: int = None

    def __post_init__(self):
        if self.rho0 <= 0:
            raise DomainError(f"rho0 must be positive, got {self.rho0}")
        if not self.D_table:
            raise DomainError("The D table is empty")
        self.D_table = {int(r): float(D) for r, D in self.D_table.items()}
        if any(D < 0 for D in self.D_table.values()):
            raise DomainError("D_r must be non negative")
        if self.r_max is None:
            self.r_max = max(self.D_table)
        if self.r_max < 1:
            raise DomainError(f"r_max must be at least 1, got {self.r_max}")

    def orders(self):
        return sorted(r for r in self.D_table if r <= self.r_max)


@dataclass
class StabilityTime:
    T: float
    r_opt: int
    flags: set = field(default_factory=set)

    @property
    def at_boundary(self):
        return "MAX_AT_BOUNDARY" in self.flags

    def __iter__(self):
        return iter((self.T, self.r_opt))


def stability_time(query):
    """T = max_r tau_tilde(rho0, r, D_r) scanning every available order."""
    orders = query.orders()
    if not orders:
        raise DomainError(f"No order of the D table is below r_max = {query.r_max}")
    best_r = orders[0]
    best = -math.inf
    for r in orders:
        value = log_tau_tilde(query.rho0, r, query.D_table[r])
        if value > best:
            best, best_r = value, r
    flags = set()
    if best_r == query.r_max:
        flags.add("MAX_AT_BOUNDARY")
    T = math.exp(best) if best < 709.0 else math.inf
    return StabilityTime(T, best_r, flags)


class StabilityCurve:
    """Sampled stability time T(rho0) with the optimal orders."""

    def __init__(self, frame, r_max, label=None):
        self.frame = frame
        self.r_max = r_max
        self.label = label

    def __len__(self):
        return len(self.frame)

    @property
    def rho0(self):
        return self.frame["rho0"].to_numpy()

    @property
    def T(self):
        return self.frame["T"].to_numpy()

    @property
    def r_opt(self):
        return self.frame["r_opt"].to_numpy()

    @property
    def slope_changes(self):
        """rho0 values where the optimal order changes between neighbouring samples."""
        r = self.r_opt
        changes = np.flatnonzero(r[1:] != r[:-1])
        return [float(np.sqrt(self.rho0[i] * self.rho0[i + 1])) for i in changes]

    @property
    def at_boundary(self):
        return self.frame.loc[self.frame["r_opt"] == self.r_max, "rho0"].to_list()

    def log_slopes(self):
        return np.diff(np.log(self.T)) / np.diff(np.log(self.rho0))

    def to_frame(self):
        return self.frame.copy()

    def save(self, filename="stability/curve.csv"):
        return FileManager.save_csv(self.frame, filename)


def stability_curve(rho0_grid, D_table, r_max=None, label=None):
    grid = np.asarray(rho0_grid, dtype=np.float64).reshape(-1)
    if grid.shape[0] == 0:
        raise DomainError("The rho0 grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("The rho0 grid must be strictly increasing")
    rows = []
    query = None
    for rho0 in grid:
        query = StabilityQuery(float(rho0), D_table, r_max)
        estimate = stability_time(query)
        rows.append([float(rho0), estimate.r_opt, optimal_radius(float(rho0), estimate.r_opt), estimate.T])
    frame = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    T = frame["T"].to_numpy()
    finite = np.isfinite(T)
    if np.any(T[1:][finite[1:] & finite[:-1]] > T[:-1][finite[1:] & finite[:-1]] * (1 + 1e-13)):
        raise NumericError("Stability time increases with rho0")
    curve = StabilityCurve(frame, query.r_max, label)
    Logger.debug(f"Stability curve over {len(grid)} radii, slope changes at {curve.slope_changes}")
    return curve


def stability_curves(rho0_grid, D_table, orders):
    """One curve per truncation order, each using the D_r up to that order."""
    return {int(r): stability_curve(rho0_grid, {s: D for s, D in D_table.items() if s <= r}, r_max=int(r),
                                    label=f"r = {r}")
            for r in orders}


def stability_radius(curve, T_target):
    """Largest rho0 with T(rho0) >= T_target, log-log interpolated; None if never reached."""
    rho0, T = curve.rho0, curve.T
    reached = T >= T_target
    if not np.any(reached):
        return None
    last = int(np.flatnonzero(reached)[-1])
    if last == len(T) - 1 or not np.isfinite(T[last]):
        return float(rho0[last])
    x0, x1 = np.log(rho0[last]), np.log(rho0[last + 1])
    y0, y1 = np.log(T[last]), np.log(T[last + 1])
    if y0 == y1:
        return float(rho0[last])
    x = x0 + (np.log(T_target) - y0) * (x1 - x0) / (y1 - y0)
    return float(np.exp(x))


def neighbourhood_radius(uncertainties):
    """Radius of the box containing the uncertainty of every action-like variable.

    A dict is filtered on its keys (Lambda, xi and eta entries); the angle
    uncertainties do not enter the radius.
    """
    if isinstance(uncertainties, dict):
        uncertainties = [value for name, value in uncertainties.items() if ACTION_LIKE.match(name)]
    values = np.abs(np.asarray(uncertainties, dtype=np.float64))
    if values.size == 0:
        raise DomainError("No uncertainty given")
    return float(values.max())
