import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..util import FileManager, Logger


def plot_stability(curves, filename="stability/curve.svg", rho_marker=None, T_target=None, time_unit="yr"):
    """Log-log plot of T(rho0); dotted verticals mark the changes of optimal order."""
    if not isinstance(curves, (list, tuple)):
        curves = [curves]
    figure, axis = plt.subplots(figsize=(6, 4.5))
    styles = ["-", "--", ":", "-."]
    markers = ["", "x", "", "+"]
    for index, curve in enumerate(curves):
        axis.loglog(curve.rho0, curve.T, linestyle=styles[index % len(styles)],
                    marker=markers[index % len(markers)], color="black",
                    label=curve.label or f"r <= {curve.r_max}")
        for rho in curve.slope_changes:
            axis.axvline(rho, color="grey", linestyle=":", linewidth=0.8)
            axis.annotate("slope change", xy=(rho, axis.get_ylim()[0]), rotation=90, fontsize=7,
                          color="grey", va="bottom")
    if rho_marker is not None:
        axis.axvline(rho_marker, color="red", linewidth=0.8, label="data uncertainty")
    if T_target is not None:
        axis.axhline(T_target, color="blue", linewidth=0.8, label=f"T = {T_target:.0e} {time_unit}")
    axis.set_xlabel("rho0")
    axis.set_ylabel(f"T ({time_unit})")
    axis.legend(fontsize=8)
    figure.tight_layout()
    path = FileManager.save_figure(figure, filename)
    plt.close(figure)
    Logger.debug(f"Stability plot written to {path}")
    return path
