"""Invariant suites run by the ``check`` command."""
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..birkhoff import birkhoff_normalize
from ..dynamics import cartesian_to_elements, elements_to_cartesian, frequency_analysis, solve_kepler
from ..kolmogorov import kolmogorov_normalize, reduce_to_torus_nf
from ..models import load_model
from ..pipeline import normalize_torus, run_pipeline
from ..series import Grading, evaluate, poisson_bracket, random_series
from ..stability import StabilityQuery, escape_time, stability_curve, stability_time, tau_tilde
from ..util import FileManager, Logger


@dataclass
class CheckResult:
    suite: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"suite": self.suite, "passed": self.passed, **self.details}


def bracket_grading(rng, samples, K=4):
    violations = 0
    for _ in range(samples):
        n = int(rng.integers(2, 5))
        r, s = (int(x) for x in rng.integers(1, 4, size=2))
        h = poisson_bracket(random_series(n, [r], 4, K, rng), random_series(n, [s], 4, K, rng))
        if h.is_zero:
            continue
        violations += int(np.sum(h.l.sum(axis=1) != r + s + 1))
        violations += int(np.sum(Grading.wave_norm(h.k) > (r + s) * K))
    return CheckResult("bracket_grading", violations == 0, {"violations": violations})


def norm_bound(rng, samples, points=1000, rho=0.1):
    worst = -math.inf
    for _ in range(samples):
        n = int(rng.integers(2, 5))
        f = random_series(n, [1, 2, 3], 4, 4, rng)
        bound = sum(f.norm(s) * rho ** (s + 1) for s in f.grade_values())
        for _ in range(points // 100):
            p = rng.uniform(-rho, rho, size=n)
            q = rng.uniform(0.0, 2 * np.pi, size=n)
            worst = max(worst, abs(evaluate(f, p, q)) - bound)
    return CheckResult("norm_bound", worst <= 1e-12, {"worst_excess": worst})


def estimator(rng, samples):
    value = escape_time(0.1, 0.125, 3, 2.0)
    closed = abs(value - 409.6) <= 1e-14 * 409.6
    homogeneity = 0.0
    for _ in range(samples):
        rho0 = 10 ** rng.uniform(-6, -1)
        r = int(rng.integers(1, 12))
        c = rng.uniform(0.1, 10.0)
        expected = c ** (-(r + 1)) * tau_tilde(rho0, r, 1.0)
        homogeneity = max(homogeneity, abs(tau_tilde(c * rho0, r, 1.0) - expected) / expected)
    return CheckResult("estimator", closed and homogeneity <= 1e-13,
                       {"escape_time": value, "homogeneity_error": homogeneity})


def factorial_table(r_max):
    return {r: float(math.factorial(r)) ** 2 for r in range(1, r_max + 1)}


def interior_order(rng, samples, rho0=1e-2, r_max=12):
    table = factorial_table(r_max)
    estimate = stability_time(StabilityQuery(rho0, table, r_max))
    curve = stability_curve(np.geomspace(1e-6, 1e-1, 101), table, r_max)
    passed = not estimate.at_boundary and len(curve.slope_changes) >= 1
    return CheckResult("interior_order", passed, {"r_opt": estimate.r_opt, "T": estimate.T,
                                                  "slope_changes": len(curve.slope_changes)})


def kolmogorov_decay(rng, samples, model=None, order=8):
    model = model or load_model("benchmark")
    result = kolmogorov_normalize(model.kolmogorov_input(), order)
    norms = [chi1 + chi2 for _, chi1, chi2 in result.gen_norms]
    decreasing = all(b < a for a, b in zip(norms, norms[1:]))
    return CheckResult("kolmogorov_decay", decreasing and result.decay_ratio < 1,
                       {"decay_ratio": result.decay_ratio, "gen_norms": norms})


def birkhoff_purity(rng, samples, model=None, kolmogorov_order=8, order=5):
    model = model or load_model("benchmark")
    result = kolmogorov_normalize(model.kolmogorov_input(), kolmogorov_order)
    torus = reduce_to_torus_nf(result)
    birkhoff = birkhoff_normalize(torus, model.omega, order)
    oscillating = sum(Z.oscillating().norm() for Z in birkhoff.Z)
    return CheckResult("birkhoff_purity", oscillating == 0.0, {"oscillating_norm": oscillating,
                                                               "D": birkhoff.D_table})


def pipeline_chain(rng, samples, kolmogorov_order=6, birkhoff_order=4, decades=8.0):
    """Synthetic fast/slow model through the pipeline, both normal forms and the estimator."""
    model = load_model("synthetic_sjs")
    result = run_pipeline(model.hamiltonian(), model.n_star, model.g_star, model.secular_actions)
    kolmogorov, birkhoff = normalize_torus(result, kolmogorov_order, birkhoff_order)
    norms = [chi1 + chi2 for _, chi1, chi2 in kolmogorov.gen_norms if chi1 + chi2 > 0]
    decaying = len(norms) >= 2 and all(b < a for a, b in zip(norms, norms[1:]))
    T = stability_curve(np.geomspace(1e-6, 1e-2, 41), birkhoff.D_table).T
    span = float(np.log10(T.max() / T.min())) if np.all(np.isfinite(T)) else math.nan
    return CheckResult("pipeline_chain", decaying and span >= decades,
                       {"gen_norms": norms, "D": birkhoff.D_table, "T_decades": span})


def kepler(rng, samples):
    model = load_model("sjs")
    residual = 0.0
    for el in model.elements():
        E = solve_kepler(el.M, el.e)
        residual = max(residual, abs(E - el.e * math.sin(E) - el.M))
    state = model.state()
    back = elements_to_cartesian(cartesian_to_elements(state, model.convention), model.star_mass,
                                 model.convention)
    scale = np.abs(state.positions).max()
    round_trip = float(np.abs(back.positions - state.positions).max() / scale)
    return CheckResult("kepler", residual <= 1e-14 and round_trip <= 1e-12,
                       {"kepler_residual": residual, "round_trip": round_trip})


def naff(rng, samples):
    t_step = 0.1
    signal = np.exp(1j * 0.3 * t_step * np.arange(2048))
    estimate = frequency_analysis(signal, t_step, 1)[0]
    error = abs(estimate.freq - 0.3)
    return CheckResult("naff", error <= 1e-10, {"freq": estimate.freq, "error": error})


SUITES = {
    "bracket_grading": bracket_grading,
    "norm_bound": norm_bound,
    "estimator": estimator,
    "interior_order": interior_order,
    "kolmogorov_decay": kolmogorov_decay,
    "birkhoff_purity": birkhoff_purity,
    "pipeline_chain": pipeline_chain,
    "kepler": kepler,
    "naff": naff,
}


def run_checks(suites, seed=0, samples=100, filename="check/report.csv"):
    rng = np.random.default_rng(seed)
    results = []
    for name in suites:
        Logger.info(f"Running check '{name}'")
        result = SUITES[name](rng, samples)
        level = Logger.info if result.passed else Logger.error
        level(f"Check '{name}' {'passed' if result.passed else 'FAILED'}: {result.details}")
        results.append(result)
    frame = pd.DataFrame([{"suite": r.suite, "passed": r.passed, "details": repr(r.details)} for r in results])
    FileManager.save_csv(frame, filename)
    return results
