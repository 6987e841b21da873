import numpy as np
from scipy.special import comb

from ..errors import DimensionMismatch
from ..util import Logger, Randomizer
from .monomial import Grading, Parity, TrigMonomial
from . import kernels

CHUNK_TERMS = 1 << 22


def _int_matrix(values, size, n):
    if values is None:
        return np.zeros((size, n), dtype=np.int64)
    matrix = np.asarray(values, dtype=np.int64)
    if matrix.size != size * n:
        raise DimensionMismatch(f"Expected {size} rows of {n} integers, got shape {matrix.shape}")
    return matrix.reshape(size, n)


def _canonical_sign(c, Kv, P):
    if c.shape[0] == 0:
        return c, Kv
    first_index = np.argmax(Kv != 0, axis=1)
    first = Kv[np.arange(Kv.shape[0]), first_index]
    flip = first < 0
    if np.any(flip):
        Kv = Kv.copy()
        c = c.copy()
        Kv[flip] = -Kv[flip]
        c[flip & (P == Parity.SIN)] *= -1.0
    return c, Kv


def _combine(grade, c, L, M, Kv, P):
    """Sort by (grade, l, m, k, parity) and merge equal keys."""
    if c.shape[0] == 0:
        return grade, c, L, M, Kv, P
    keys = np.column_stack([grade, L, M, Kv, P])
    order = np.lexsort(keys.T[::-1])
    keys = keys[order]
    c = c[order]
    boundary = np.ones(keys.shape[0], dtype=bool)
    boundary[1:] = np.any(keys[1:] != keys[:-1], axis=1)
    starts = np.flatnonzero(boundary)
    c = np.add.reduceat(c, starts)
    keys = keys[starts]
    keep = c != 0.0
    keys = keys[keep]
    c = c[keep]
    n = L.shape[1]
    return (keys[:, 0], c, keys[:, 1:1 + n], keys[:, 1 + n:1 + 2 * n],
            keys[:, 1 + 2 * n:1 + 3 * n], keys[:, -1])


class PoissonSeries:
    """Immutable truncated Poisson series.

    Terms are stored as flat arrays sorted by (grade, l, m, k, parity): one
    coefficient, action exponents ``l``, polynomial-coordinate exponents
    ``m``, wave vector ``k`` and ``parity`` per monomial. Terms violating the
    grading caps are discarded on construction and their absolute mass is
    accumulated in ``loss`` (per grade in ``loss_by_grade``).

    Parameters
    ----------
    n_dof : int
        Number of degrees of freedom.
    coeffs, l, k, parity, m : array_like
        Term data; ``l``, ``k`` and ``m`` have one row per term.
    K : int
        Trigonometric budget per grade (torus grading).
    grading : {'torus', 'raw'}
    action_cap : int or None
        Maximal retained |l| (torus) or |l| + |m| (raw).
    trig_cap : int or None
        Flat trigonometric budget of the raw grading.
    """

    def __init__(self, n_dof, coeffs=(), l=None, k=None, parity=None, m=None, K=4, grading=Grading.RAW,
                 action_cap=None, trig_cap=None, loss=0.0, drop_below=0.0):
        n = int(n_dof)
        if n < 1:
            raise ValueError(f"n_dof must be positive, got {n_dof}")
        if int(K) < 1:
            raise ValueError(f"K must be positive, got {K}")
        self.n_dof = n
        self.K = int(K)
        self.grading = Grading.check(grading)
        self.action_cap = None if action_cap is None else int(action_cap)
        self.trig_cap = None if trig_cap is None or grading == Grading.TORUS else int(trig_cap)

        c = np.asarray(coeffs, dtype=np.float64).reshape(-1)
        size = c.shape[0]
        L = _int_matrix(l, size, n)
        M = _int_matrix(m, size, n)
        Kv = _int_matrix(k, size, n)
        P = np.zeros(size, dtype=np.int64) if parity is None else np.asarray(parity, dtype=np.int64).reshape(size)
        if np.any(L < 0) or np.any(M < 0):
            raise ValueError("Exponents must be non negative")

        c, Kv = _canonical_sign(c, Kv, P)
        alive = (c != 0.0) & ~((P == Parity.SIN) & ~np.any(Kv != 0, axis=1))
        grade = Grading.grade_of(self.grading, L, M)
        violating = self._violations(grade, L, M, Kv, c, drop_below) & alive

        self.loss_by_grade = {}
        for s in np.unique(grade[violating]):
            self.loss_by_grade[int(s)] = float(np.abs(c[violating & (grade == s)]).sum())
        self.loss = float(loss) + float(sum(self.loss_by_grade.values()))

        keep = alive & ~violating
        arrays = _combine(grade[keep], c[keep], L[keep], M[keep], Kv[keep], P[keep])
        for array in arrays:
            array.flags.writeable = False
        self.grade, self.coeffs, self.l, self.m, self.k, self.parity = arrays

    def _violations(self, grade, L, M, Kv, c, drop_below):
        knorm = Grading.wave_norm(Kv) if Kv.shape[0] else np.zeros(0, dtype=np.int64)
        bad = np.zeros(c.shape[0], dtype=bool)
        if self.grading == Grading.TORUS:
            bad |= grade < 0
            bad |= np.any(M != 0, axis=1)
            bad |= knorm > np.maximum(grade, 0) * self.K
            if self.action_cap is not None:
                bad |= L.sum(axis=1) > self.action_cap
        else:
            if self.action_cap is not None:
                bad |= grade > self.action_cap
            if self.trig_cap is not None:
                bad |= knorm > self.trig_cap
        if drop_below > 0.0:
            bad |= np.abs(c) < drop_below
        return bad

    # construction helpers

    @classmethod
    def from_terms(cls, n_dof, terms, **settings):
        monomials = [t if isinstance(t, TrigMonomial) else TrigMonomial(*t) for t in terms]
        for t in monomials:
            if t.n_dof != n_dof:
                raise DimensionMismatch(f"Monomial with {t.n_dof} degrees of freedom in a {n_dof}-dof series")
        return cls(n_dof,
                   [t.coeff for t in monomials],
                   l=[t.l for t in monomials],
                   k=[t.k for t in monomials],
                   parity=[int(t.parity) for t in monomials],
                   m=[t.m for t in monomials],
                   **settings)

    @classmethod
    def zero(cls, n_dof, **settings):
        return cls(n_dof, **settings)

    def settings(self, **overrides):
        current = dict(K=self.K, grading=self.grading, action_cap=self.action_cap, trig_cap=self.trig_cap)
        current.update(overrides)
        return current

    def with_terms(self, c, L, M, Kv, P, loss=0.0, **overrides):
        return PoissonSeries(self.n_dof, c, l=L, k=Kv, parity=P, m=M, loss=loss, **self.settings(**overrides))

    def select(self, mask):
        """Sub-series of the terms where ``mask`` (boolean array or callable on the series) holds."""
        if callable(mask):
            mask = mask(self)
        mask = np.asarray(mask, dtype=bool)
        return self.with_terms(self.coeffs[mask], self.l[mask], self.m[mask], self.k[mask], self.parity[mask])

    # views

    def __len__(self):
        return int(self.coeffs.shape[0])

    def __repr__(self):
        return (f"PoissonSeries(n_dof={self.n_dof}, terms={len(self)}, grading='{self.grading}', "
                f"K={self.K}, action_cap={self.action_cap})")

    @property
    def is_zero(self):
        return len(self) == 0

    @property
    def has_coords(self):
        return bool(np.any(self.m != 0))

    def grade_values(self):
        return [int(s) for s in np.unique(self.grade)]

    def _bounds(self, grade):
        begin = int(np.searchsorted(self.grade, grade, side='left'))
        end = int(np.searchsorted(self.grade, grade, side='right'))
        return begin, end

    def arrays(self, grade=None):
        if grade is None:
            return self.coeffs, self.l, self.m, self.k, self.parity
        begin, end = self._bounds(grade)
        return (self.coeffs[begin:end], self.l[begin:end], self.m[begin:end],
                self.k[begin:end], self.parity[begin:end])

    def grade_part(self, grade):
        return self.with_terms(*self.arrays(grade))

    @property
    def grades(self):
        return {s: list(self.monomials(s)) for s in self.grade_values()}

    def monomials(self, grade=None):
        c, L, M, Kv, P = self.arrays(grade)
        for i in range(c.shape[0]):
            yield TrigMonomial(float(c[i]), tuple(L[i]), tuple(Kv[i]), Parity(int(P[i])), tuple(M[i]))

    def norm(self, grade=None):
        c = self.arrays(grade)[0]
        return float(np.abs(c).sum())

    def count(self, grade=None):
        return int(self.arrays(grade)[0].shape[0])

    def average(self):
        """Angle average: the k = 0 part."""
        return self.select(~np.any(self.k != 0, axis=1))

    def oscillating(self):
        return self.select(np.any(self.k != 0, axis=1))

    def action_degree(self):
        return self.l.sum(axis=1)

    # arithmetic

    def _check_compatible(self, other):
        if not isinstance(other, PoissonSeries):
            raise TypeError(f"Cannot combine PoissonSeries with {type(other).__name__}")
        if other.n_dof != self.n_dof:
            raise DimensionMismatch(f"n_dof mismatch: {self.n_dof} vs {other.n_dof}")
        if other.grading != self.grading:
            raise DimensionMismatch(f"grading mismatch: '{self.grading}' vs '{other.grading}'")
        if self.grading == Grading.TORUS and other.K != self.K:
            raise DimensionMismatch(f"K mismatch: {self.K} vs {other.K}")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_terms(np.concatenate([self.coeffs, other.coeffs]),
                               np.vstack([self.l, other.l]),
                               np.vstack([self.m, other.m]),
                               np.vstack([self.k, other.k]),
                               np.concatenate([self.parity, other.parity]),
                               loss=self.loss + other.loss)

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, PoissonSeries):
            return multiply(self, scalar)
        return self.with_terms(self.coeffs * float(scalar), self.l, self.m, self.k, self.parity,
                               loss=self.loss * abs(float(scalar)))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __call__(self, p, q):
        return evaluate(self, p, q)


def norm(f, grade=None):
    """Sum of the absolute values of the coefficients of ``grade`` (of all grades if None)."""
    return f.norm(grade)


def complex_norm(f, grade=None):
    """Norm of the same function written with complex exponentials.

    A pair a*cos(<k,q>) + b*sin(<k,q>) becomes two exponentials of modulus
    sqrt(a^2 + b^2)/2 each, hence norm(f) / complex_norm(f) lies in [1, sqrt(2)].
    """
    c, L, M, Kv, P = f.arrays(grade)
    if c.shape[0] == 0:
        return 0.0
    keys = np.column_stack([L, M, Kv])
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cos_part = np.zeros(inverse.max() + 1)
    sin_part = np.zeros(inverse.max() + 1)
    np.add.at(cos_part, inverse[P == Parity.COS], c[P == Parity.COS])
    np.add.at(sin_part, inverse[P == Parity.SIN], c[P == Parity.SIN])
    return float(np.hypot(cos_part, sin_part).sum())


def _pair_terms(kind, f_arrays, g_arrays, grading_code, K, action_cap, trig_cap):
    c1 = f_arrays[0]
    c2 = g_arrays[0]
    n = f_arrays[1].shape[1]
    empty = (np.zeros(0), np.zeros((0, n), np.int64), np.zeros((0, n), np.int64),
             np.zeros((0, n), np.int64), np.zeros(0, np.int64))
    if c1.shape[0] == 0 or c2.shape[0] == 0:
        return [empty], 0.0
    f_args = [np.ascontiguousarray(a) for a in f_arrays]
    g_args = [np.ascontiguousarray(a) for a in g_arrays]
    caps = (grading_code, K, action_cap, trig_cap, Grading.k_norm_code())
    counts, losses = kernels.pair_count(kind, *f_args, *g_args, *caps)
    loss = float(losses.sum())
    blocks = []
    begin = 0
    rows = counts.shape[0]
    while begin < rows:
        end = begin
        total = 0
        while end < rows and (total == 0 or total + counts[end] <= CHUNK_TERMS):
            total += int(counts[end])
            end += 1
        offsets = np.zeros(rows, dtype=np.int64)
        offsets[begin:end] = np.cumsum(counts[begin:end]) - counts[begin:end]
        if total:
            blocks.append(kernels.pair_fill(kind, *f_args, *g_args, *caps, begin, end, offsets, total))
        begin = end
    if not blocks:
        return [empty], loss
    return blocks, loss


def _merge_blocks(blocks, n_dof, settings, loss):
    c = np.concatenate([b[0] for b in blocks])
    L = np.vstack([b[1] for b in blocks])
    M = np.vstack([b[2] for b in blocks])
    Kv = np.vstack([b[3] for b in blocks])
    P = np.concatenate([b[4] for b in blocks])
    return PoissonSeries(n_dof, c, l=L, k=Kv, parity=P, m=M, loss=loss, **settings)


def _result_settings(f, g, action_cap, raw_for_torus=False):
    cap = action_cap
    if cap is None:
        caps = [x for x in (f.action_cap, g.action_cap) if x is not None]
        cap = min(caps) if caps else None
    if f.grading == Grading.TORUS and not raw_for_torus:
        return dict(K=f.K, grading=Grading.TORUS, action_cap=cap, trig_cap=None)
    if f.grading == Grading.TORUS:
        return dict(K=f.K, grading=Grading.RAW, action_cap=None, trig_cap=None)
    trig_cap = None if f.trig_cap is None or g.trig_cap is None else f.trig_cap + g.trig_cap
    return dict(K=f.K, grading=Grading.RAW, action_cap=cap, trig_cap=trig_cap)


def poisson_bracket(f, g, action_cap=None, max_grade=None):
    """{f, g} = sum_j (df/dp_j dg/dq_j - df/dq_j dg/dp_j).

    Grade pairs are processed in increasing order and combined in that
    order. With torus grading, pairs whose product grade exceeds
    ``max_grade`` are not computed at all; every other discarded term is
    accumulated in the ``loss`` of the result.
    """
    f._check_compatible(g)
    settings = _result_settings(f, g, action_cap)
    torus = f.grading == Grading.TORUS
    code = 0 if torus else 1
    cap = -1 if settings['action_cap'] is None else settings['action_cap']
    trig = -1 if settings['trig_cap'] is None else settings['trig_cap']
    blocks = []
    loss = 0.0
    for gf in f.grade_values():
        for gg in g.grade_values():
            if torus and max_grade is not None and gf + gg > max_grade:
                continue
            if not torus and cap >= 0 and gf + gg - 2 > cap:
                continue
            part, part_loss = _pair_terms(kernels.BRACKET, f.arrays(gf), g.arrays(gg), code, f.K, cap, trig)
            blocks.extend(part)
            loss += part_loss
    if not blocks:
        return PoissonSeries(f.n_dof, **settings)
    if loss:
        Logger.debug(f"Bracket truncation loss {loss:.3e}")
    return _merge_blocks(blocks, f.n_dof, settings, loss)


def multiply(f, g, action_cap=None):
    """Pointwise product of two series, returned in raw grading."""
    if f.n_dof != g.n_dof:
        raise DimensionMismatch(f"n_dof mismatch: {f.n_dof} vs {g.n_dof}")
    settings = _result_settings(f, g, action_cap, raw_for_torus=True)
    if f.grading != g.grading:
        settings = dict(K=f.K, grading=Grading.RAW, action_cap=settings['action_cap'], trig_cap=None)
    cap = -1 if settings['action_cap'] is None else settings['action_cap']
    trig = -1 if settings['trig_cap'] is None else settings['trig_cap']
    blocks, loss = _pair_terms(kernels.PRODUCT, f.arrays(), g.arrays(), 1, f.K, cap, trig)
    return _merge_blocks(blocks, f.n_dof, settings, loss)


def evaluate(f, p, q):
    """Numeric value of ``f`` at (p, q); rows of 2-d inputs are separate points."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape[-1] != f.n_dof or q.shape[-1] != f.n_dof:
        raise DimensionMismatch(f"Point dimension {p.shape[-1]}/{q.shape[-1]} for a {f.n_dof}-dof series")
    if f.is_zero:
        return np.zeros(p.shape[:-1]) if p.ndim > 1 else 0.0
    monomial = np.prod(p[..., None, :] ** f.l, axis=-1)
    if f.has_coords:
        monomial = monomial * np.prod(q[..., None, :] ** f.m, axis=-1)
    phase = q @ f.k.T
    trig = np.where(f.parity == Parity.COS, np.cos(phase), np.sin(phase))
    value = (monomial * trig) @ f.coeffs
    return float(value) if np.ndim(value) == 0 else value


def derive(f, action=None, angle=None):
    """Partial derivative with respect to the action p_j or the angle q_j.

    The angle derivative also differentiates the polynomial coordinate of a
    Cartesian degree of freedom. Action derivatives leave the torus grading
    and are returned in raw grading.
    """
    if (action is None) == (angle is None):
        raise ValueError("Exactly one of 'action' and 'angle' must be given")
    j = action if action is not None else angle
    if not 0 <= j < f.n_dof:
        raise DimensionMismatch(f"Variable index {j} out of range for {f.n_dof} degrees of freedom")
    c, L, M, Kv, P = f.arrays()
    if action is not None:
        keep = L[:, j] > 0
        L2 = L[keep].copy()
        c2 = c[keep] * L2[:, j]
        L2[:, j] -= 1
        return PoissonSeries(f.n_dof, c2, l=L2, k=Kv[keep], parity=P[keep], m=M[keep],
                             K=f.K, grading=Grading.RAW)
    # angle part: cos -> -k sin, sin -> k cos
    sign = np.where(P == Parity.COS, -1.0, 1.0)
    trig_c = c * Kv[:, j] * sign
    trig_P = 1 - P
    keep = M[:, j] > 0
    M2 = M[keep].copy()
    poly_c = c[keep] * M2[:, j]
    M2[:, j] -= 1
    return f.with_terms(np.concatenate([trig_c, poly_c]),
                        np.vstack([L, L[keep]]),
                        np.vstack([M, M2]),
                        np.vstack([Kv, Kv[keep]]),
                        np.concatenate([trig_P, P[keep]]))


def truncate(f, action_cap=None, trig_policy=None, drop_below=0.0):
    """Remove the monomials violating the caps.

    ``trig_policy`` is either an integer (the per-grade budget K in torus
    grading, the flat budget in raw grading), a callable mapping a grade to
    its maximal |k|, or None for the series' own policy. The discarded mass
    per grade is returned in ``loss_by_grade`` of the result.
    """
    c, L, M, Kv, P = f.arrays()
    knorm = Grading.wave_norm(Kv) if len(f) else np.zeros(0, dtype=np.int64)
    settings = f.settings()
    bad = np.zeros(len(f), dtype=bool)
    if callable(trig_policy):
        budget = np.array([trig_policy(int(s)) for s in f.grade], dtype=np.int64)
        bad |= knorm > budget
    elif trig_policy is not None:
        if f.grading == Grading.TORUS:
            settings['K'] = int(trig_policy)
        else:
            settings['trig_cap'] = int(trig_policy)
    if action_cap is not None:
        settings['action_cap'] = int(action_cap)
    loss_by_grade = {}
    for s in np.unique(f.grade[bad]):
        loss_by_grade[int(s)] = float(np.abs(c[bad & (f.grade == s)]).sum())
    result = PoissonSeries(f.n_dof, c[~bad], l=L[~bad], k=Kv[~bad], parity=P[~bad], m=M[~bad],
                           drop_below=drop_below, loss=f.loss, **settings)
    result.loss += sum(loss_by_grade.values())
    for s, mass in f.loss_by_grade.items():
        loss_by_grade[s] = loss_by_grade.get(s, 0.0) + mass
    for s, mass in loss_by_grade.items():
        result.loss_by_grade[s] = result.loss_by_grade.get(s, 0.0) + mass
    return result


def regrade(f, grading, K=None, action_cap=None, trig_cap=None):
    """Re-express ``f`` in another grading; terms the new policy forbids are dropped as loss."""
    return PoissonSeries(f.n_dof, f.coeffs, l=f.l, k=f.k, parity=f.parity, m=f.m,
                         K=f.K if K is None else K, grading=grading, action_cap=action_cap, trig_cap=trig_cap)


def translate_actions(f, shift, action_cap=None, split=False):
    """Exact recentring p -> p + shift (binomial expansion), in raw grading.

    With ``split`` the result is a dict mapping the total power of the shift
    carried by each term to the corresponding part.
    """
    shift = np.asarray(shift, dtype=np.float64).reshape(-1)
    if shift.shape[0] != f.n_dof:
        raise DimensionMismatch(f"Shift of length {shift.shape[0]} for {f.n_dof} degrees of freedom")
    c, L, M, Kv, P = (np.array(a) for a in f.arrays())
    power = np.zeros(c.shape[0], dtype=np.int64)
    for j in np.flatnonzero(shift):
        exps = L[:, j]
        pieces = []
        for i in range(int(exps.max(initial=0)) + 1):
            rows = exps >= i
            factor = comb(exps[rows], i) * shift[j] ** (exps[rows] - i)
            Li = L[rows].copy()
            Li[:, j] = i
            pieces.append((c[rows] * factor, Li, M[rows], Kv[rows], P[rows], power[rows] + exps[rows] - i))
        c = np.concatenate([p[0] for p in pieces])
        L = np.vstack([p[1] for p in pieces])
        M = np.vstack([p[2] for p in pieces])
        Kv = np.vstack([p[3] for p in pieces])
        P = np.concatenate([p[4] for p in pieces])
        power = np.concatenate([p[5] for p in pieces])
    settings = dict(K=f.K, grading=Grading.RAW,
                    action_cap=f.action_cap if action_cap is None else action_cap,
                    trig_cap=f.trig_cap if f.grading == Grading.RAW else None)
    if not split:
        return PoissonSeries(f.n_dof, c, l=L, k=Kv, parity=P, m=M, **settings)
    return {int(e): PoissonSeries(f.n_dof, c[power == e], l=L[power == e], k=Kv[power == e],
                                  parity=P[power == e], m=M[power == e], **settings)
            for e in np.unique(power)}


def _linear_power(row, power, cache, key):
    """Expansion of (row . w)^power as a dict exponent-tuple -> coefficient."""
    if (key, power) in cache:
        return cache[(key, power)]
    if power == 0:
        result = {(0,) * len(row): 1.0}
    else:
        previous = _linear_power(row, power - 1, cache, key)
        result = {}
        for exps, coef in previous.items():
            for index, weight in enumerate(row):
                if weight == 0.0:
                    continue
                new = exps[:index] + (exps[index] + 1,) + exps[index + 1:]
                result[new] = result.get(new, 0.0) + coef * weight
    cache[(key, power)] = result
    return result


def linear_substitution(f, dofs, matrix):
    """Substitute z = matrix @ w in the Cartesian variables of ``dofs``.

    z and w are ordered (p-slots of dofs, then m-slots of dofs); the angle
    content of ``dofs`` must be absent.
    """
    dofs = [int(d) for d in dofs]
    nd = len(dofs)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (2 * nd, 2 * nd):
        raise DimensionMismatch(f"Substitution matrix must be {2 * nd}x{2 * nd}, got {matrix.shape}")
    c, L, M, Kv, P = f.arrays()
    if np.any(Kv[:, dofs] != 0):
        raise ValueError("Linear substitution acts on Cartesian degrees of freedom only")
    exponents = np.hstack([L[:, dofs], M[:, dofs]])
    unique, inverse = np.unique(exponents, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cache = {}
    pieces = []
    for u, exps in enumerate(unique):
        expansion = {(0,) * (2 * nd): 1.0}
        for i, power in enumerate(exps):
            if power == 0:
                continue
            factor = _linear_power(tuple(matrix[i]), int(power), cache, i)
            product = {}
            for e1, c1 in expansion.items():
                for e2, c2 in factor.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    product[e] = product.get(e, 0.0) + c1 * c2
            expansion = product
        rows = np.flatnonzero(inverse == u)
        new_exps = np.array(list(expansion.keys()), dtype=np.int64)
        weights = np.array(list(expansion.values()))
        nr, ne = rows.shape[0], weights.shape[0]
        Lr = np.repeat(L[rows], ne, axis=0)
        Mr = np.repeat(M[rows], ne, axis=0)
        Lr[:, dofs] = np.tile(new_exps[:, :nd], (nr, 1))
        Mr[:, dofs] = np.tile(new_exps[:, nd:], (nr, 1))
        pieces.append((np.repeat(c[rows], ne) * np.tile(weights, nr), Lr, Mr,
                       np.repeat(Kv[rows], ne, axis=0), np.repeat(P[rows], ne)))
    if not pieces:
        return f
    return f.with_terms(np.concatenate([p[0] for p in pieces]),
                        np.vstack([p[1] for p in pieces]),
                        np.vstack([p[2] for p in pieces]),
                        np.vstack([p[3] for p in pieces]),
                        np.concatenate([p[4] for p in pieces]))


def linear_form(omega, **settings):
    """<omega, p>."""
    omega = np.asarray(omega, dtype=np.float64)
    n = omega.shape[0]
    return PoissonSeries(n, omega, l=np.eye(n, dtype=np.int64), **settings)


def quadratic_form(C, **settings):
    """1/2 <C p, p> for a symmetric matrix C."""
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    coeffs, exps = [], []
    for i in range(n):
        for j in range(i, n):
            value = 0.5 * C[i, i] if i == j else 0.5 * (C[i, j] + C[j, i])
            e = np.zeros(n, dtype=np.int64)
            e[i] += 1
            e[j] += 1
            coeffs.append(value)
            exps.append(e)
    return PoissonSeries(n, coeffs, l=exps, **settings)


def random_series(n_dof, grades, n_terms=8, K=4, rng=None):
    """Torus-graded series with ``n_terms`` random monomials in each of the given grades."""
    rng = Randomizer.rng if rng is None else rng
    coeffs, exps, waves, parities = [], [], [], []
    for s in grades:
        budget = int(s) * int(K)
        for _ in range(n_terms):
            l = rng.multinomial(int(s) + 1, np.full(n_dof, 1.0 / n_dof))
            while True:
                k = rng.integers(-budget, budget + 1, size=n_dof)
                if Grading.wave_norm(k) <= budget:
                    break
            coeffs.append(rng.uniform(-1.0, 1.0))
            exps.append(l)
            waves.append(k)
            parities.append(int(rng.integers(0, 2)) if np.any(k != 0) else int(Parity.COS))
    return PoissonSeries(n_dof, coeffs, l=exps, k=waves, parity=parities, K=K, grading=Grading.TORUS)
