import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import DimensionMismatch, DomainError, KeplerNoConvergence
from ..util import Logger

TWO_PI = 2.0 * math.pi
STAR_MASS = TWO_PI ** 2
G = 1.0


def _reduce(angle):
    return float(np.mod(angle, TWO_PI))


@dataclass
class OrbitalElements:
    """Keplerian elements of one planet; G = 1 and m0 = (2 pi)^2 give years and AU."""
    a: float
    e: float
    i: float
    M: float
    omega_peri: float
    Omega_node: float
    mass: float
    name: str = ""

    def __post_init__(self):
        if self.a <= 0:
            raise DomainError(f"Semi-major axis must be positive, got {self.a}")
        if not 0 <= self.e < 1:
            raise DomainError(f"Eccentricity must lie in [0, 1), got {self.e}")
        if self.mass < 0:
            raise DomainError(f"Mass must be non negative, got {self.mass}")
        self.M = _reduce(self.M)
        self.omega_peri = _reduce(self.omega_peri)
        self.Omega_node = _reduce(self.Omega_node)

    @property
    def mean_longitude(self):
        return _reduce(self.M + self.omega_peri + self.Omega_node)

    @property
    def perihelion_longitude(self):
        return _reduce(self.omega_peri + self.Omega_node)

    def mean_motion(self, star_mass=STAR_MASS):
        return math.sqrt(G * (star_mass + self.mass) / self.a ** 3)

    def to_dict(self):
        return {"name": self.name, "a": self.a, "e": self.e, "i": self.i, "M": self.M,
                "omega_peri": self.omega_peri, "Omega_node": self.Omega_node, "mass": self.mass}


@dataclass
class CartesianState:
    """Barycentric positions (AU) and velocities (AU/yr), star first."""
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=np.float64).reshape(-1, 3)
        self.masses = np.asarray(self.masses, dtype=np.float64).reshape(-1)
        if not self.positions.shape[0] == self.velocities.shape[0] == self.masses.shape[0]:
            raise DimensionMismatch(f"{self.positions.shape[0]} positions, {self.velocities.shape[0]} velocities "
                                    f"and {self.masses.shape[0]} masses")

    @property
    def n_bodies(self):
        return int(self.masses.shape[0])

    def copy(self):
        return CartesianState(self.positions.copy(), self.velocities.copy(), self.masses.copy(), list(self.names))

    def momentum(self):
        return self.masses @ self.velocities

    def angular_momentum(self):
        return np.sum(self.masses[:, None] * np.cross(self.positions, self.velocities), axis=0)

    def energy(self):
        kinetic = 0.5 * np.sum(self.masses * np.sum(self.velocities ** 2, axis=1))
        potential = 0.0
        for a in range(self.n_bodies):
            distance = np.linalg.norm(self.positions[a + 1:] - self.positions[a], axis=1)
            potential -= G * self.masses[a] * np.sum(self.masses[a + 1:] / distance)
        return kinetic + potential

    def heliocentric(self):
        return self.positions[1:] - self.positions[0], self.velocities[1:] - self.velocities[0]


def solve_kepler(M, e, tol=1e-14, max_iter=50):
    """Eccentric anomaly E with E - e sin E = M (Newton, vectorised)."""
    M = np.asarray(M, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if np.any(e < 0) or np.any(e >= 1):
        raise DomainError(f"Eccentricity must lie in [0, 1), got {e}")
    E = np.where(e > 0.8, np.pi * np.ones_like(M), M + e * np.sin(M))
    for _ in range(max_iter):
        residual = E - e * np.sin(E) - M
        if np.all(np.abs(residual) <= tol):
            return E if E.ndim else float(E)
        E = E - residual / (1.0 - e * np.cos(E))
    residual = E - e * np.sin(E) - M
    if np.all(np.abs(residual) <= tol * max(1.0, float(np.abs(M).max()))):
        return E if E.ndim else float(E)
    raise KeplerNoConvergence(f"Kepler equation residual {np.abs(residual).max():.3e} after {max_iter} iterations")


def _orientation(i, omega_peri, Omega_node):
    return Rotation.from_euler('ZXZ', [Omega_node, i, omega_peri]).as_matrix()


def kepler_to_relative(elements, mu):
    """Relative position and velocity of a Kepler orbit with gravitational parameter mu."""
    E = solve_kepler(elements.M, elements.e)
    a, e = elements.a, elements.e
    root = math.sqrt(1.0 - e * e)
    n = math.sqrt(mu / a ** 3)
    position = np.array([a * (math.cos(E) - e), a * root * math.sin(E), 0.0])
    factor = n * a / (1.0 - e * math.cos(E))
    velocity = np.array([-factor * math.sin(E), factor * root * math.cos(E), 0.0])
    rotation = _orientation(elements.i, elements.omega_peri, elements.Omega_node)
    return rotation @ position, rotation @ velocity


def relative_elements(positions, velocities, mu):
    """Osculating elements of relative orbits, one row per sample.

    Returns a dict of arrays ``a, e, i, M, omega, Omega``. Equatorial orbits
    take the node on the x axis and circular ones the pericentre at the node.
    """
    r = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    v = np.atleast_2d(np.asarray(velocities, dtype=np.float64))
    mu = float(mu)
    radius = np.linalg.norm(r, axis=1)
    h = np.cross(r, v)
    h_norm = np.linalg.norm(h, axis=1)
    energy = 0.5 * np.sum(v * v, axis=1) - mu / radius
    if np.any(energy >= 0):
        raise DomainError(f"Unbound relative orbit (energy {energy.max():.3e})")
    a = -mu / (2.0 * energy)
    e_vector = np.cross(v, h) / mu - r / radius[:, None]
    e = np.linalg.norm(e_vector, axis=1)
    i = np.arccos(np.clip(h[:, 2] / h_norm, -1.0, 1.0))
    node = np.stack([-h[:, 1], h[:, 0], np.zeros_like(h_norm)], axis=1)
    node_norm = np.linalg.norm(node, axis=1)
    inclined = node_norm > 1e-15 * h_norm
    Omega_node = np.where(inclined, np.arctan2(node[:, 1], node[:, 0]), 0.0)
    node = np.where(inclined[:, None], node / np.where(inclined, node_norm, 1.0)[:, None], [1.0, 0.0, 0.0])
    normal = h / h_norm[:, None]
    across = np.cross(normal, node)
    eccentric = e > 1e-14
    e = np.where(eccentric, e, 0.0)
    periapsis = np.where(eccentric[:, None], e_vector / np.where(eccentric, e, 1.0)[:, None], node)
    omega_peri = np.where(eccentric, np.arctan2(np.sum(periapsis * across, axis=1),
                                                np.sum(periapsis * node, axis=1)), 0.0)
    across_peri = np.cross(normal, periapsis)
    nu = np.arctan2(np.sum(r * across_peri, axis=1), np.sum(r * periapsis, axis=1))
    E = 2.0 * np.arctan2(np.sqrt(1.0 - e) * np.sin(nu / 2), np.sqrt(1.0 + e) * np.cos(nu / 2))
    M = E - e * np.sin(E)
    return {"a": a, "e": e, "i": i, "M": np.mod(M, TWO_PI), "omega": np.mod(omega_peri, TWO_PI),
            "Omega": np.mod(Omega_node, TWO_PI)}


def relative_to_kepler(position, velocity, mu, mass=0.0, name=""):
    """Inverse of kepler_to_relative."""
    row = {key: float(value[0]) for key, value in relative_elements(position, velocity, mu).items()}
    return OrbitalElements(row["a"], row["e"], row["i"], row["M"], row["omega"], row["Omega"], mass, name)


VALID_CONVENTIONS = {"heliocentric", "poincare"}


def _check_convention(convention):
    if convention not in VALID_CONVENTIONS:
        raise ValueError(f"convention must be one of {VALID_CONVENTIONS}, got '{convention}'")


def elements_to_cartesian(elements, star_mass=STAR_MASS, convention="heliocentric"):
    """Barycentric state of the star and planets from heliocentric elements.

    With ``heliocentric`` the elements describe the heliocentric velocities;
    with ``poincare`` they describe the canonical heliocentric momenta
    divided by the reduced masses (barycentric velocities times
    (m0 + m_j) / m0).
    """
    _check_convention(convention)
    if not elements:
        raise DomainError("At least one planet is required")
    masses = np.array([star_mass] + [el.mass for el in elements])
    relative_r, relative_v = [], []
    for el in elements:
        r, v = kepler_to_relative(el, G * (star_mass + el.mass))
        relative_r.append(r)
        relative_v.append(v)
    relative_r = np.array(relative_r)
    relative_v = np.array(relative_v)
    planets = masses[1:]
    total = masses.sum()
    star_r = -planets @ relative_r / total
    positions = np.vstack([star_r, relative_r + star_r])
    if convention == "heliocentric":
        star_v = -planets @ relative_v / total
        velocities = np.vstack([star_v, relative_v + star_v])
    else:
        barycentric = relative_v * (star_mass / (star_mass + planets))[:, None]
        velocities = np.vstack([-planets @ barycentric / star_mass, barycentric])
    state = CartesianState(positions, velocities, masses, ["star"] + [el.name for el in elements])
    Logger.debug(f"Initial state: momentum {state.momentum()}, energy {state.energy():.12e}")
    return state


def relative_motion(positions, velocities, masses, convention="heliocentric"):
    """Heliocentric positions and the velocities the elements describe.

    Works on arrays of shape (..., n_bodies, 3) with the star first.
    """
    _check_convention(convention)
    masses = np.asarray(masses, dtype=np.float64)
    r = positions[..., 1:, :] - positions[..., :1, :]
    if convention == "heliocentric":
        v = velocities[..., 1:, :] - velocities[..., :1, :]
    else:
        v = velocities[..., 1:, :] * ((masses[0] + masses[1:]) / masses[0])[:, None]
    return r, v


def cartesian_to_elements(state, convention="heliocentric"):
    r, v = relative_motion(state.positions, state.velocities, state.masses, convention)
    star_mass = state.masses[0]
    elements = []
    for index in range(state.n_bodies - 1):
        mass = state.masses[index + 1]
        name = state.names[index + 1] if len(state.names) == state.n_bodies else ""
        elements.append(relative_to_kepler(r[index], v[index], G * (star_mass + mass), mass, name))
    return elements
