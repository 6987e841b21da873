from .kolmogorov import (CertificationReport, KolmogorovInput, KolmogorovNormalizer, KolmogorovResult, angle_part,
                         certify_torus, decay_ratio, kolmogorov_normalize, kolmogorov_step, linear_coefficients,
                         linear_part, reduce_to_torus_nf, to_normalized, to_original, twist_matrix)
