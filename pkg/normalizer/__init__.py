"""normalizer
Kolmogorov and Birkhoff normal forms of near-integrable Hamiltonians, Nekhoroshev-type
stability time estimates, and a three-body dynamics lab to measure torus frequencies.
"""
from .util import FileManager, Logger, Parallel, Randomizer, __version__
from .errors import NormalizerError
from .normalizer import Normalizer
from .series import Grading, Parity, PoissonSeries, poisson_bracket, read_psx, write_psx
from .kolmogorov import KolmogorovInput, KolmogorovNormalizer, certify_torus, kolmogorov_normalize
from .birkhoff import BirkhoffNormalizer, birkhoff_normalize
from .stability import escape_time, plot_stability, stability_curve, stability_time
from .pipeline import PlanetaryPipeline, run_pipeline
from .dynamics import frequency_analysis, integrate, torus_discrepancy
from .models import load_model
