from dataclasses import dataclass, field
from enum import IntEnum
import numpy as np


class Parity(IntEnum):
    COS = 0
    SIN = 1

    @property
    def symbol(self):
        return 'c' if self is Parity.COS else 's'

    @classmethod
    def from_symbol(cls, symbol):
        VALID_SYMBOLS = {'c': cls.COS, 's': cls.SIN}
        if symbol not in VALID_SYMBOLS:
            raise ValueError(f"Parity symbol must be one of {set(VALID_SYMBOLS)}, got '{symbol}'")
        return VALID_SYMBOLS[symbol]


class Grading:
    """Grading policy shared by all series.

    In ``torus`` grading grade s holds the monomials with |l| = s + 1 and
    |k| <= s*K. In ``raw`` grading the grade is the polynomial degree
    |l| + |m| and the trigonometric budget is a flat ``trig_cap``.
    ``k_norm`` selects the norm used for |k| in every budget check.
    """
    TORUS = "torus"
    RAW = "raw"
    VALID_GRADINGS = {TORUS, RAW}
    VALID_K_NORMS = {"l1", "linf"}
    k_norm = "l1"

    @classmethod
    def check(cls, grading):
        if grading not in cls.VALID_GRADINGS:
            raise ValueError(f"grading must be one of {cls.VALID_GRADINGS}, got '{grading}'")
        return grading

    @classmethod
    def k_norm_code(cls):
        if cls.k_norm not in cls.VALID_K_NORMS:
            raise ValueError(f"Grading.k_norm must be one of {cls.VALID_K_NORMS}, got '{cls.k_norm}'")
        return 0 if cls.k_norm == "l1" else 1

    @classmethod
    def wave_norm(cls, k):
        k = np.abs(np.asarray(k, dtype=np.int64))
        if cls.k_norm_code() == 0:
            return k.sum(axis=-1)
        return k.max(axis=-1, initial=0)

    @classmethod
    def grade_of(cls, grading, l, m):
        l = np.asarray(l, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        if grading == cls.TORUS:
            return l.sum(axis=-1) - 1
        return l.sum(axis=-1) + m.sum(axis=-1)


@dataclass(frozen=True)
class TrigMonomial:
    """coeff * p^l * x^m * {cos,sin}(<k,q>).

    ``m`` holds the exponents of the polynomial coordinate of Cartesian
    degrees of freedom and is zero for action-angle ones.
    """
    coeff: float
    l: tuple
    k: tuple
    parity: Parity = Parity.COS
    m: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, 'l', tuple(int(x) for x in self.l))
        object.__setattr__(self, 'k', tuple(int(x) for x in self.k))
        object.__setattr__(self, 'parity', Parity(self.parity))
        m = (0,) * len(self.l) if self.m is None else tuple(int(x) for x in self.m)
        object.__setattr__(self, 'm', m)
        if not (len(self.l) == len(self.k) == len(self.m)):
            raise ValueError(f"Exponent and wave vectors differ in length: l={self.l}, m={self.m}, k={self.k}")
        if any(x < 0 for x in self.l) or any(x < 0 for x in self.m):
            raise ValueError(f"Exponents must be non negative: l={self.l}, m={self.m}")

    @property
    def n_dof(self):
        return len(self.l)

    def canonical(self):
        """Same function with the first nonzero entry of k positive, or None if identically zero."""
        if self.coeff == 0.0:
            return None
        nonzero = [x for x in self.k if x != 0]
        if not nonzero:
            if self.parity is Parity.SIN:
                return None
            return self
        if nonzero[0] > 0:
            return self
        sign = -1.0 if self.parity is Parity.SIN else 1.0
        return TrigMonomial(sign * self.coeff, self.l, tuple(-x for x in self.k), self.parity, self.m)
