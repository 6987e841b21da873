from .elements import (G, STAR_MASS, VALID_CONVENTIONS, CartesianState, OrbitalElements, cartesian_to_elements,
                       elements_to_cartesian, kepler_to_relative, relative_elements, relative_motion,
                       relative_to_kepler, solve_kepler)
from .integrator import SCHEME_ORDER, SCHEMES, VALID_SCHEMES, VALID_SIGNALS, Trajectory, integrate
from .naff import MIN_SAMPLES, NAFF, FrequencyEstimate, frequency_analysis, frequency_report, hanning
from .discrepancy import ELEMENT_COLUMNS, kepler_orbit, save_discrepancy, torus_discrepancy
