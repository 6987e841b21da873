from .estimator import (CURVE_COLUMNS, StabilityCurve, StabilityQuery, StabilityTime, escape_time, log_tau_tilde,
                        neighbourhood_radius, optimal_radius, stability_curve, stability_curves, stability_radius,
                        stability_time, tau_tilde, tau_tilde_closed)
from .plot import plot_stability
