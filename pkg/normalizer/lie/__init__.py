from .homological import (DivisorReport, FrequencyVector, GeneratingFunction, Kind, as_frequency, default_floor,
                          diophantine_scan, homological_residual, solve_homological, wave_vectors)
from .transform import Expansion, hamiltonian_flow, hamiltonian_vector_field, lie_flow, lie_transform
