"""One function per CLI command.

Every command takes its validated manifest and the set of output formats,
writes its artifacts through ``FileManager`` and returns a summary dict that
is also saved as ``<command>/summary.json``.
"""
import math

import numpy as np
import pandas as pd

from ..birkhoff import birkhoff_normalize
from ..dynamics import frequency_analysis, frequency_report, integrate
from ..errors import ManifestError, NoConvergence, NumericError
from ..kolmogorov import certify_torus, kolmogorov_normalize, reduce_to_torus_nf
from ..models import FastSlowModel, SignalModel, ThreeBodyModel, TorusModel, load_model
from ..pipeline import normalize_torus, run_pipeline
from ..series import read_psx, save_series
from ..stability import neighbourhood_radius, plot_stability, stability_curve, stability_curves, stability_radius
from ..util import FileManager, Logger
from .checks import factorial_table, run_checks

OUTPUT_FORMATS = ("csv", "svg", "psx")


def _model(manifest, *kinds):
    model = load_model(manifest.model_reference(manifest.model))
    if not isinstance(model, kinds):
        accepted = sorted(kind.model_fields["kind"].annotation.__args__[0] for kind in kinds)
        raise ManifestError(f"Model '{model.name}' is of kind '{model.kind}', the command accepts {accepted}")
    return model


def _finite(value):
    return None if value is None or not math.isfinite(value) else float(value)


def _save_summary(summary, folder):
    FileManager.save_json(summary, f"{folder}/summary.json")
    return summary


def _kolmogorov_outputs(result, formats, folder):
    if "csv" in formats:
        FileManager.save_csv(result.to_frame(), f"{folder}/norms.csv")
    if "psx" in formats:
        save_series(result.normal_form, f"{folder}/normal_form.psx")
    return {"order": result.order, "decay_ratio": _finite(result.decay_ratio), "flags": sorted(result.flags),
            "dropped_mass": result.dropped_mass}


def _birkhoff_outputs(result, formats, folder):
    if "csv" in formats:
        FileManager.save_csv(result.to_frame(), f"{folder}/norms.csv")
    if "psx" in formats:
        save_series(result.remainder_head, f"{folder}/remainder_head.psx")
        if result.normal_form is not None:
            save_series(result.normal_form, f"{folder}/normal_form.psx")
    return {"order": result.order, "D": {str(r): D for r, D in result.D}, "flags": sorted(result.flags),
            "coefficients": {str(r): count for r, count in result.coefficient_counts}}


def _stability_outputs(settings, D_table, formats, folder, rho_marker=None):
    grid = settings.grid()
    curve = stability_curve(grid, D_table, settings.r_max, label="optimal r")
    curves = [curve]
    if settings.orders:
        for r, order_curve in stability_curves(grid, D_table, settings.orders).items():
            curves.append(order_curve)
            if "csv" in formats:
                order_curve.save(f"{folder}/curve_r{r}.csv")
    if "csv" in formats:
        curve.save(f"{folder}/curve.csv")
    if "svg" in formats:
        plot_stability(curves, f"{folder}/curve.svg", rho_marker, settings.T_target, settings.time_unit)
    summary = {"rows": len(curve), "r_max": curve.r_max, "slope_changes": curve.slope_changes,
               "at_boundary": curve.at_boundary}
    if rho_marker is not None:
        summary["rho_uncertainty"] = rho_marker
    if settings.T_target is not None:
        summary["radius"] = stability_radius(curve, settings.T_target)
        Logger.info(f"Stability radius for T = {settings.T_target:g} {settings.time_unit}: {summary['radius']}")
    return summary


def _uncertainty_radius(model):
    if model is None or not model.uncertainties:
        return None
    return neighbourhood_radius(model.uncertainties)


def cmd_kolmogorov(manifest, formats=OUTPUT_FORMATS):
    model = _model(manifest, TorusModel)
    kolmogorov_input = model.kolmogorov_input()
    result = kolmogorov_normalize(kolmogorov_input, manifest.order, action_cap=manifest.action_cap,
                                  floor=manifest.floor, drop_below=manifest.drop_below)
    summary = {"model": model.name, **_kolmogorov_outputs(result, formats, "kolmogorov")}
    if manifest.certify:
        q0 = np.zeros(kolmogorov_input.n_dof) if manifest.q0 is None else np.asarray(manifest.q0)
        t_final = manifest.certify_time or model.certify_time
        report = certify_torus(kolmogorov_input, result, q0, t_final, threshold_floor=model.torus_threshold)
        summary["certification"] = report.to_dict()
        if not report.passed:
            _save_summary(summary, "kolmogorov")
            raise NoConvergence(f"Torus certification failed: deviation {report.max_deviation:.3e} "
                                f"above {report.threshold:.3e}")
    return _save_summary(summary, "kolmogorov")


def cmd_birkhoff(manifest, formats=OUTPUT_FORMATS):
    model = None
    summary = {}
    if manifest.model is not None:
        model = _model(manifest, TorusModel)
        kolmogorov = kolmogorov_normalize(model.kolmogorov_input(), manifest.kolmogorov_order,
                                          drop_below=manifest.drop_below)
        summary["kolmogorov"] = _kolmogorov_outputs(kolmogorov, formats, "birkhoff/kolmogorov")
        H, omega = reduce_to_torus_nf(kolmogorov, manifest.K), model.omega
    else:
        H, omega = read_psx(manifest.resolve(manifest.hamiltonian)), manifest.omega
    result = birkhoff_normalize(H, omega, manifest.order, floor=manifest.floor, resonance=manifest.resonance,
                                drop_below=manifest.drop_below)
    summary.update(_birkhoff_outputs(result, formats, "birkhoff"))
    if manifest.stability is not None:
        summary["stability"] = _stability_outputs(manifest.stability, result.D_table, formats, "birkhoff/stability",
                                                  _uncertainty_radius(model))
    return _save_summary(summary, "birkhoff")


def _D_table(manifest):
    if manifest.D is not None:
        return {int(r): float(D) for r, D in manifest.D.items()}
    if manifest.synthetic is not None:
        return factorial_table(manifest.synthetic_orders)
    frame = pd.read_csv(manifest.resolve(manifest.D_csv), comment='#')
    column = "Dr" if "Dr" in frame.columns else "D"
    if "order" not in frame.columns or column not in frame.columns:
        raise ManifestError(f"'{manifest.D_csv}' needs an 'order' and a 'Dr' (or 'D') column")
    return {int(r): float(D) for r, D in zip(frame["order"], frame[column])}


def cmd_stability(manifest, formats=OUTPUT_FORMATS):
    model = None if manifest.model is None else load_model(manifest.model_reference(manifest.model))
    summary = _stability_outputs(manifest, _D_table(manifest), formats, "stability", _uncertainty_radius(model))
    return _save_summary(summary, "stability")


def cmd_pipeline(manifest, formats=OUTPUT_FORMATS):
    model = _model(manifest, FastSlowModel)
    result = run_pipeline(model.hamiltonian(), model.n_star, model.g_star, model.secular_actions,
                          fast_floor=manifest.fast_floor, secular_floor=manifest.secular_floor)
    if "psx" in formats:
        result.save("pipeline")
    summary = {"model": model.name, **result.to_dict()}
    if manifest.kolmogorov_order is not None:
        kolmogorov, birkhoff = normalize_torus(result, manifest.kolmogorov_order, manifest.birkhoff_order,
                                               manifest.K, manifest.drop_below)
        summary["kolmogorov"] = _kolmogorov_outputs(kolmogorov, formats, "pipeline/kolmogorov")
        if birkhoff is not None:
            summary["birkhoff"] = _birkhoff_outputs(birkhoff, formats, "pipeline/birkhoff")
            if manifest.stability is not None:
                summary["stability"] = _stability_outputs(manifest.stability, birkhoff.D_table, formats,
                                                          "pipeline/stability", _uncertainty_radius(model))
    return _save_summary(summary, "pipeline")


def _trajectory(model, settings):
    convention = settings.convention or model.convention
    return integrate(model.state(), settings.t_span, settings.dt, settings.scheme, settings.stride,
                     settings.min_distance), convention


def cmd_integrate(manifest, formats=OUTPUT_FORMATS):
    model = _model(manifest, ThreeBodyModel)
    trajectory, convention = _trajectory(model, manifest)
    if "csv" in formats:
        trajectory.save("integrate/trajectory.csv", with_elements=manifest.elements)
        if manifest.elements:
            FileManager.save_csv(trajectory.elements(convention), "integrate/elements.csv")
    drift = trajectory.conservation()
    Logger.info(f"Conservation over {manifest.t_span:g}: {drift}")
    summary = {"model": model.name, "samples": len(trajectory), "scheme": manifest.scheme, "dt": manifest.dt,
               "drift": drift}
    return _save_summary(summary, "integrate")


def cmd_frequencies(manifest, formats=OUTPUT_FORMATS):
    model = _model(manifest, ThreeBodyModel, SignalModel)
    estimates = {}
    if isinstance(model, SignalModel):
        n_freqs = max(spec.n_freqs for spec in manifest.signals)
        estimates["signal"] = frequency_analysis(model.signal(), model.t_step, n_freqs, model.t0,
                                                 manifest.noise_floor)
    else:
        if manifest.integration is None:
            raise ManifestError("A three-body model needs an [integration] table")
        trajectory, convention = _trajectory(model, manifest.integration)
        for spec in manifest.signals:
            bodies = trajectory.names[1:] if spec.body is None else [spec.body]
            for body in bodies:
                signal = trajectory.signal(body, spec.kind, convention)
                estimates[f"{body}:{spec.kind}"] = frequency_analysis(signal, trajectory.sample_step, spec.n_freqs,
                                                                      trajectory.times[0], manifest.noise_floor)
    if "csv" in formats:
        frequency_report(estimates, "frequencies/frequencies.csv")
    summary = {"model": model.name, "signals": {name: [e.freq for e in found] for name, found in estimates.items()}}
    if isinstance(model, ThreeBodyModel):
        summary["reference"] = _reference_errors(model, estimates)
    return _save_summary(summary, "frequencies")


def _reference_errors(model, estimates):
    """Relative distance of the leading tones from the model's n* and g*."""
    errors = {}
    for kind, reference in (("mean_longitude", model.n_star), ("eccentricity", model.g_star)):
        if reference is None:
            continue
        for body, value in zip(model.bodies, reference):
            found = estimates.get(f"{body.name}:{kind}")
            if found:
                errors[f"{body.name}:{kind}"] = abs(found[0].freq - value) / abs(value)
    return errors


def cmd_check(manifest, formats=OUTPUT_FORMATS):
    results = run_checks(manifest.suites, manifest.seed, manifest.samples)
    summary = {result.suite: result.to_dict() for result in results}
    _save_summary(summary, "check")
    failed = [result.suite for result in results if not result.passed]
    if failed:
        raise NumericError(f"Failed checks: {failed}")
    return summary


COMMANDS = {
    "kolmogorov": cmd_kolmogorov,
    "birkhoff": cmd_birkhoff,
    "stability": cmd_stability,
    "pipeline": cmd_pipeline,
    "integrate": cmd_integrate,
    "frequencies": cmd_frequencies,
    "check": cmd_check,
}
