from .monomial import Grading, Parity, TrigMonomial
from .series import (PoissonSeries, complex_norm, derive, evaluate, linear_form, linear_substitution, multiply,
                     norm, poisson_bracket, quadratic_form, random_series, regrade, translate_actions, truncate)
from .psx import dumps, load_series, loads, read_psx, save_series, write_psx
