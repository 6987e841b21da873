import math

import numpy as np
import pandas as pd
from numba import njit

from ..errors import CloseEncounter, DomainError
from ..util import FileManager, Logger
from .elements import G, CartesianState, relative_elements, relative_motion

_CUBE_ROOT_TWO = 2.0 ** (1.0 / 3.0)
_Y4_OUTER = 1.0 / (2.0 - _CUBE_ROOT_TWO)
_Y4_INNER = -_CUBE_ROOT_TWO / (2.0 - _CUBE_ROOT_TWO)
_Y6 = (0.784513610477560, 0.235573213359357, -1.17767998417887)
_Y6_CENTRE = 1.0 - 2.0 * sum(_Y6)

# weights of the leapfrog sub-steps of each composition scheme
SCHEMES = {
    "symplectic4": np.array([_Y4_OUTER, _Y4_INNER, _Y4_OUTER]),
    "symplectic6": np.array(list(_Y6) + [_Y6_CENTRE] + list(_Y6[::-1])),
}
VALID_SCHEMES = set(SCHEMES)
SCHEME_ORDER = {"symplectic4": 4, "symplectic6": 6}


@njit(cache=True)
def _kick(positions, velocities, masses, h):
    # returns the smallest squared mutual distance
    n = masses.shape[0]
    smallest = np.inf
    for a in range(n):
        for b in range(a + 1, n):
            dx = positions[a, 0] - positions[b, 0]
            dy = positions[a, 1] - positions[b, 1]
            dz = positions[a, 2] - positions[b, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < smallest:
                smallest = d2
            scale = h / (d2 * math.sqrt(d2))
            velocities[a, 0] -= dx * masses[b] * scale
            velocities[a, 1] -= dy * masses[b] * scale
            velocities[a, 2] -= dz * masses[b] * scale
            velocities[b, 0] += dx * masses[a] * scale
            velocities[b, 1] += dy * masses[a] * scale
            velocities[b, 2] += dz * masses[a] * scale
    return smallest


@njit(cache=True)
def _drift(positions, velocities, h):
    for a in range(positions.shape[0]):
        for c in range(3):
            positions[a, c] += h * velocities[a, c]


@njit(cache=True)
def _evolve(positions, velocities, masses, h, n_steps, stride, weights, floor2, out_x, out_v):
    """Fixed-step composition of drift-kick-drift leapfrogs.

    Writes every ``stride``-th state into out_x / out_v (row 0 is the initial
    state). Returns the number of completed steps and the smallest squared
    distance met; stops early when it falls below floor2.
    """
    out_x[0] = positions
    out_v[0] = velocities
    smallest = np.inf
    row = 1
    for step in range(n_steps):
        for w in weights:
            _drift(positions, velocities, 0.5 * w * h)
            d2 = _kick(positions, velocities, masses, w * h)
            _drift(positions, velocities, 0.5 * w * h)
            if d2 < smallest:
                smallest = d2
        if smallest < floor2:
            return step + 1, smallest
        if (step + 1) % stride == 0:
            out_x[row] = positions
            out_v[row] = velocities
            row += 1
    return n_steps, smallest


class Trajectory:
    """Sampled barycentric states of an N-body integration."""

    def __init__(self, times, positions, velocities, masses, names=None, scheme=None, dt=None):
        self.times = np.asarray(times, dtype=np.float64)
        self.positions = np.asarray(positions, dtype=np.float64)
        self.velocities = np.asarray(velocities, dtype=np.float64)
        self.masses = np.asarray(masses, dtype=np.float64)
        self.names = list(names) if names else [f"body{j}" for j in range(self.masses.shape[0])]
        self.scheme = scheme
        self.dt = dt

    def __len__(self):
        return self.times.shape[0]

    @property
    def n_bodies(self):
        return self.masses.shape[0]

    @property
    def sample_step(self):
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    def state(self, index=-1):
        return CartesianState(self.positions[index].copy(), self.velocities[index].copy(), self.masses.copy(),
                              list(self.names))

    @property
    def initial(self):
        return self.state(0)

    @property
    def final(self):
        return self.state(-1)

    def energies(self):
        kinetic = 0.5 * np.einsum('j,tjc,tjc->t', self.masses, self.velocities, self.velocities)
        potential = np.zeros(len(self))
        for a in range(self.n_bodies):
            for b in range(a + 1, self.n_bodies):
                distance = np.linalg.norm(self.positions[:, a] - self.positions[:, b], axis=1)
                potential -= G * self.masses[a] * self.masses[b] / distance
        return kinetic + potential

    def angular_momenta(self):
        return np.einsum('j,tjc->tc', self.masses, np.cross(self.positions, self.velocities))

    def momenta(self):
        return np.einsum('j,tjc->tc', self.masses, self.velocities)

    def energy_drift(self):
        energy = self.energies()
        return float(np.max(np.abs(energy - energy[0])) / abs(energy[0]))

    def angular_momentum_drift(self):
        """Largest change of any component, relative to |L(0)|."""
        L = self.angular_momenta()
        return float(np.max(np.abs(L - L[0])) / np.linalg.norm(L[0]))

    def momentum_drift(self):
        P = self.momenta()
        scale = np.sum(self.masses[:, None] * np.abs(self.velocities[0]))
        return float(np.max(np.abs(P - P[0])) / scale)

    def conservation(self):
        return {"energy": self.energy_drift(), "angular_momentum": self.angular_momentum_drift(),
                "momentum": self.momentum_drift()}

    def elements(self, convention="heliocentric"):
        """Osculating heliocentric elements of every planet at every sample."""
        r, v = relative_motion(self.positions, self.velocities, self.masses, convention)
        frames = []
        for j in range(self.n_bodies - 1):
            el = relative_elements(r[:, j], v[:, j], G * (self.masses[0] + self.masses[j + 1]))
            frame = pd.DataFrame({"t": self.times, "body": self.names[j + 1], **el})
            frame["lambda"] = np.mod(el["M"] + el["omega"] + el["Omega"], 2 * np.pi)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def _planet(self, body):
        if isinstance(body, str):
            if body not in self.names[1:]:
                raise DomainError(f"Unknown body '{body}', expected one of {self.names[1:]}")
            return self.names.index(body) - 1
        if not 0 <= body < self.n_bodies - 1:
            raise DomainError(f"Planet index {body} out of range")
        return int(body)

    def signal(self, body, kind="mean_longitude", convention="heliocentric"):
        """Complex signal of one planet for frequency analysis.

        ``mean_longitude`` is exp(i lambda); ``eccentricity`` is
        e exp(-i varpi), the sign of the Poincare pair xi + i eta.
        """
        j = self._planet(body)
        r, v = relative_motion(self.positions, self.velocities, self.masses, convention)
        el = relative_elements(r[:, j], v[:, j], G * (self.masses[0] + self.masses[j + 1]))
        if kind == "mean_longitude":
            return np.exp(1j * (el["M"] + el["omega"] + el["Omega"]))
        if kind == "eccentricity":
            return el["e"] * np.exp(-1j * (el["omega"] + el["Omega"]))
        raise ValueError(f"kind must be one of {VALID_SIGNALS}, got '{kind}'")

    def to_frame(self):
        t = np.repeat(self.times, self.n_bodies)
        frame = pd.DataFrame({"t": t, "body": np.tile(self.names, len(self))})
        for c, axis in enumerate("xyz"):
            frame[axis] = self.positions[:, :, c].reshape(-1)
        for c, axis in enumerate("xyz"):
            frame[f"v{axis}"] = self.velocities[:, :, c].reshape(-1)
        return frame

    def save(self, filename="dynamics/trajectory.csv", with_elements=True):
        frame = self.to_frame()
        if with_elements:
            elements = self.elements()
            frame = frame.merge(elements, on=["t", "body"], how="left")
        return FileManager.save_csv(frame, filename)


VALID_SIGNALS = {"mean_longitude", "eccentricity"}


def integrate(state, t_span, dt, scheme="symplectic6", stride=1, min_distance=1e-3):
    """Fixed-step symplectic integration of the Newtonian N-body problem.

    ``t_span`` may be negative to integrate backwards; it is covered by
    round(|t_span| / dt) steps of size dt. Raises CloseEncounter when two
    bodies come closer than ``min_distance``.
    """
    if scheme not in VALID_SCHEMES:
        raise ValueError(f"scheme must be one of {VALID_SCHEMES}, got '{scheme}'")
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if stride < 1:
        raise DomainError(f"stride must be at least 1, got {stride}")
    n_steps = int(round(abs(t_span) / dt))
    if n_steps == 0:
        raise DomainError(f"t_span = {t_span} is shorter than one step of {dt}")
    if not math.isclose(n_steps * dt, abs(t_span), rel_tol=1e-9):
        Logger.warning(f"t_span = {t_span} is not a multiple of dt = {dt}, integrating {n_steps} steps")
    h = math.copysign(dt, t_span)
    n_samples = n_steps // stride + 1
    positions = state.positions.copy()
    velocities = state.velocities.copy()
    out_x = np.empty((n_samples, state.n_bodies, 3))
    out_v = np.empty((n_samples, state.n_bodies, 3))
    Logger.info(f"Integrating {state.n_bodies} bodies over {t_span} yr: {n_steps} {scheme} steps of {dt}")
    done, smallest = _evolve(positions, velocities, state.masses, h, n_steps, stride, SCHEMES[scheme],
                             min_distance ** 2, out_x, out_v)
    if done < n_steps or smallest < min_distance ** 2:
        raise CloseEncounter(done * h, math.sqrt(smallest))
    times = h * stride * np.arange(n_samples)
    trajectory = Trajectory(times, out_x, out_v, state.masses, state.names, scheme, dt)
    Logger.info(f"Integration done, relative energy drift {trajectory.energy_drift():.3e}")
    return trajectory
