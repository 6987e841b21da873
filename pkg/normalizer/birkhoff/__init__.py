from .birkhoff import BirkhoffNormalizer, BirkhoffResult, birkhoff_normalize, remainder_bound, remainder_norm
