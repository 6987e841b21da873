import numpy as np
from scipy.integrate import solve_ivp

from ..errors import DimensionMismatch, NoConvergence
from ..series import Grading, PoissonSeries, derive, evaluate, poisson_bracket, translate_actions
from ..util import Logger
from .homological import GeneratingFunction


def _series(chi):
    return chi.chi if isinstance(chi, GeneratingFunction) else chi


def lie_transform(H, chi, action_cap=None, max_grade=None, tol=None, max_terms=100, prune=None):
    """exp(L_chi) H = sum_j L_chi^j H / j!  with  L_chi = {chi, .}.

    The sum stops when a new term vanishes under the grading caps (and the
    optional ``prune`` callable applied to every new term) or its norm
    falls below ``tol`` times the norm of H (machine epsilon by default).
    The truncation loss of every bracket is accumulated in the result.
    """
    generator = _series(chi)
    if generator.n_dof != H.n_dof:
        raise DimensionMismatch(f"n_dof mismatch: {generator.n_dof} vs {H.n_dof}")
    if generator.is_zero or H.is_zero:
        return H
    tol = np.finfo(np.float64).eps if tol is None else tol
    reference = H.norm()
    result = H
    term = H
    for j in range(1, max_terms + 1):
        term = poisson_bracket(generator, term, action_cap=action_cap, max_grade=max_grade) / j
        if prune is not None:
            term = prune(term)
        if term.is_zero:
            break
        result = result + term
        if term.norm() <= tol * reference:
            break
    else:
        raise NoConvergence(f"Lie series did not reach relative size {tol:.1e} in {max_terms} terms")
    Logger.debug(f"Lie series summed with {j} brackets, loss {result.loss - H.loss:.3e}")
    return result


class Expansion:
    """A Hamiltonian split by perturbative order tag.

    ``parts`` maps the tag (power of the small parameter) to a raw-graded
    series. Tags above ``max_tag`` are discarded; the part of tag t keeps
    Fourier modes up to |k| <= t*K when ``K`` is set.
    """

    def __init__(self, parts, max_tag, K=None, action_cap=None, loss=0.0, prune=None):
        self.max_tag = int(max_tag)
        self.K = K
        self.action_cap = action_cap
        self.prune = prune
        self.loss = float(loss)
        self.parts = {}
        for tag in sorted(parts):
            if tag > self.max_tag or parts[tag].is_zero:
                continue
            self.parts[int(tag)] = self._fit(parts[tag], tag)

    @property
    def n_dof(self):
        return next(iter(self.parts.values())).n_dof if self.parts else 0

    @property
    def tags(self):
        return sorted(self.parts)

    def settings(self, tag):
        trig_cap = None if self.K is None else int(tag) * int(self.K)
        return dict(K=self.K or 4, grading=Grading.RAW, action_cap=self.action_cap, trig_cap=trig_cap)

    def _fit(self, series, tag):
        if self.prune is not None:
            pruned = self.prune(series)
            self.loss += pruned.loss - series.loss
            series = pruned
        settings = self.settings(tag)
        if (series.grading == Grading.RAW and series.trig_cap == settings["trig_cap"]
                and series.action_cap == settings["action_cap"] and series.K == settings["K"]):
            return series
        fitted = series.with_terms(*series.arrays(), **self.settings(tag))
        self.loss += fitted.loss
        return fitted

    def part(self, tag):
        if tag in self.parts:
            return self.parts[tag]
        return PoissonSeries(self._n_dof_hint(), **self.settings(tag))

    def _n_dof_hint(self):
        if not self.parts:
            raise ValueError("Empty expansion has no dimension")
        return self.n_dof

    def copy(self, parts=None):
        return Expansion(self.parts if parts is None else parts, self.max_tag, self.K, self.action_cap, self.loss,
                         self.prune)

    def total(self):
        total = None
        for tag in self.tags:
            part = self.parts[tag].with_terms(*self.parts[tag].arrays(), trig_cap=None)
            total = part if total is None else total + part
        return total

    def norms(self):
        return {tag: part.norm() for tag, part in self.parts.items()}

    def map(self, function):
        return self.copy({tag: function(part) for tag, part in self.parts.items()})

    def with_part(self, tag, series):
        parts = dict(self.parts)
        parts[tag] = series
        return self.copy(parts)

    def _accumulate(self, parts, tag, series):
        if tag > self.max_tag or series.is_zero:
            return
        fitted = self._fit(series, tag)
        parts[tag] = parts[tag] + fitted if tag in parts else fitted

    def transform(self, chi, chi_tag):
        """Apply exp(L_chi) with chi of order ``chi_tag``; brackets raise the tag by chi_tag."""
        generator = _series(chi)
        if generator.is_zero:
            return self.copy()
        if chi_tag < 1:
            raise ValueError(f"The generating function must carry a positive order tag, got {chi_tag}")
        generator = generator.with_terms(*generator.arrays(), **self.settings(self.max_tag))
        result = self.copy()
        parts = dict(result.parts)
        for tag in self.tags:
            term = self.parts[tag]
            j = 1
            while tag + j * chi_tag <= self.max_tag:
                target = tag + j * chi_tag
                term = result._fit(poisson_bracket(generator, term, action_cap=self.action_cap) / j, target)
                if term.is_zero:
                    break
                parts[target] = parts[target] + term if target in parts else term
                j += 1
        result.parts = {tag: parts[tag] for tag in sorted(parts) if not parts[tag].is_zero}
        return result

    def translate(self, shift, shift_tag):
        """Exact p -> p + shift with the shift of order ``shift_tag``."""
        result = self.copy()
        parts = {}
        for tag in self.tags:
            pieces = translate_actions(self.parts[tag], shift, split=True)
            for power, piece in pieces.items():
                result._accumulate(parts, tag + power * shift_tag, piece)
        result.parts = {tag: parts[tag] for tag in sorted(parts) if not parts[tag].is_zero}
        return result

    def drop_constants(self):
        def without_constant(series):
            constant = ~np.any(series.k != 0, axis=1) & (series.l.sum(axis=1) == 0) & (series.m.sum(axis=1) == 0)
            return series.select(~constant)
        return self.map(without_constant)


def hamiltonian_vector_field(H):
    """Right-hand side (q, p) -> (dH/dp, -dH/dq) for solve_ivp."""
    n = H.n_dof
    dp = [derive(H, action=j) for j in range(n)]
    dq = [derive(H, angle=j) for j in range(n)]

    def field(t, z):
        q, p = z[:n], z[n:]
        return np.concatenate([[evaluate(s, p, q) for s in dp], [-evaluate(s, p, q) for s in dq]])

    return field


def hamiltonian_flow(H, q0, p0, t_final, t_eval=None, rtol=1e-12, atol=1e-13):
    """Numerical flow of H from (q0, p0); returns the solve_ivp solution (rows q then p)."""
    z0 = np.concatenate([np.asarray(q0, dtype=np.float64), np.asarray(p0, dtype=np.float64)])
    if z0.shape[0] != 2 * H.n_dof:
        raise DimensionMismatch(f"State of length {z0.shape[0]} for a {H.n_dof}-dof Hamiltonian")
    solution = solve_ivp(hamiltonian_vector_field(H), (0.0, float(t_final)), z0, method='DOP853',
                         t_eval=t_eval, rtol=rtol, atol=atol)
    if not solution.success:
        raise NoConvergence(f"Numerical flow failed: {solution.message}")
    return solution


def lie_flow(chi, q, p, time=1.0, rtol=1e-13, atol=1e-15):
    """Point transformation of the time-``time`` flow generated by chi."""
    generator = _series(chi)
    n = generator.n_dof
    if generator.is_zero or time == 0:
        return np.asarray(q, dtype=np.float64), np.asarray(p, dtype=np.float64)
    solution = hamiltonian_flow(generator, q, p, time, rtol=rtol, atol=atol)
    z = solution.y[:, -1]
    return z[:n], z[n:]
