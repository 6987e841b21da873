import numpy as np
import pandas as pd

from ..errors import GridMismatch
from ..util import FileManager, Logger
from .elements import STAR_MASS

ELEMENT_COLUMNS = ["t", "body", "a", "e", "i", "M", "omega", "Omega", "lambda"]
DISCREPANCY_COLUMNS = ["a", "lambda", "e", "omega"]


def kepler_orbit(elements, times, star_mass=STAR_MASS):
    """Unperturbed elements of every planet: only the mean anomaly moves, M(t) = M0 + n t."""
    times = np.asarray(times, dtype=np.float64)
    frames = []
    for index, el in enumerate(elements):
        M = np.mod(el.M + el.mean_motion(star_mass) * times, 2 * np.pi)
        frame = pd.DataFrame({"t": times, "body": el.name or f"body{index + 1}", "a": el.a, "e": el.e, "i": el.i,
                              "M": M, "omega": el.omega_peri, "Omega": el.Omega_node})
        frame["lambda"] = np.mod(M + el.omega_peri + el.Omega_node, 2 * np.pi)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)[ELEMENT_COLUMNS]


def _wrapped(delta):
    return np.abs(np.angle(np.exp(1j * delta)))


def _relative(delta, reference):
    scale = np.abs(reference)
    return np.divide(np.abs(delta), scale, out=np.where(delta == 0, 0.0, np.abs(delta)), where=scale > 0)


def torus_discrepancy(torus_orbit, numeric_orbit, rtol=1e-9):
    """Maximal discrepancies between two sampled orbits, one row per body.

    Columns: |da/a|, |dlambda| (wrapped), |de/e| and |domega| (wrapped). The
    numeric orbit is the reference for the relative columns.
    """
    missing = [c for c in ["t", "body", "a", "e", "lambda", "omega"]
               if c not in torus_orbit.columns or c not in numeric_orbit.columns]
    if missing:
        raise GridMismatch(f"Missing element columns {missing}")
    bodies = list(dict.fromkeys(numeric_orbit["body"]))
    if set(torus_orbit["body"]) != set(bodies):
        raise GridMismatch(f"Bodies {sorted(set(torus_orbit['body']))} and {sorted(bodies)} differ")
    rows = []
    for body in bodies:
        reference = numeric_orbit[numeric_orbit["body"] == body].sort_values("t")
        candidate = torus_orbit[torus_orbit["body"] == body].sort_values("t")
        if len(reference) != len(candidate):
            raise GridMismatch(f"{len(candidate)} and {len(reference)} samples for '{body}'")
        t_ref, t_can = reference["t"].to_numpy(), candidate["t"].to_numpy()
        scale = max(1.0, float(np.max(np.abs(t_ref))) if len(t_ref) else 1.0)
        if np.any(np.abs(t_ref - t_can) > rtol * scale):
            raise GridMismatch(f"Sampling times of '{body}' are not aligned")
        diff = {column: candidate[column].to_numpy() - reference[column].to_numpy()
                for column in DISCREPANCY_COLUMNS}
        rows.append({
            "body": body,
            "a": float(np.max(_relative(diff["a"], reference["a"].to_numpy()), initial=0.0)),
            "lambda": float(np.max(_wrapped(diff["lambda"]), initial=0.0)),
            "e": float(np.max(_relative(diff["e"], reference["e"].to_numpy()), initial=0.0)),
            "omega": float(np.max(_wrapped(diff["omega"]), initial=0.0)),
        })
    report = pd.DataFrame(rows, columns=["body"] + DISCREPANCY_COLUMNS).set_index("body")
    Logger.debug(f"Maximal discrepancies:\n{report}")
    return report


def save_discrepancy(report, filename="dynamics/discrepancy.csv"):
    return FileManager.save_csv(report.reset_index(), filename)
