from .hamiltonian import FastSlowHamiltonian, SYNTHETIC_ACTIONS, SYNTHETIC_N_STAR, WeightedCap, kepler_expansion, \
    synthetic_model, weighted_degree
from .pipeline import PipelineResult, PlanetaryPipeline, SecularForm, action_readout, assemble_kolmogorov_input, \
    default_drop_below, expand_and_translate, fast_prenormalization, locate_fast_torus, locate_secular_torus, \
    newton, normalize_torus, realized_frequency, run_pipeline, secular_birkhoff, secular_diagonalize, \
    secular_quadratic, symplectic_matrix, to_action_angle
