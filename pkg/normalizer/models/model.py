"""Bundled models and the TOML schema of model files.

A model file declares one of four kinds: ``torus`` (a Poisson series near an
invariant torus), ``fast_slow`` (a planetary-like Hamiltonian for the
pipeline), ``three_body`` (orbital elements for direct integration) and
``signal`` (a synthetic sum of tones for the frequency analysis). File
references are resolved relative to the model file.
"""
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, TypeAdapter, ValidationError, model_validator

from ..dynamics import STAR_MASS, OrbitalElements, elements_to_cartesian
from ..errors import ManifestError
from ..kolmogorov import KolmogorovInput
from ..pipeline import FastSlowHamiltonian, synthetic_model
from ..series import read_psx
from ..util import Logger

MODELS_DIR = os.path.dirname(os.path.abspath(__file__))
BUILTINS = {"synthetic_model": synthetic_model}


class ModelFile(BaseModel):
    model_config = ConfigDict(extra='forbid')
    name: str
    description: str = ""
    uncertainties: dict[str, float] = Field(default_factory=dict)
    _folder: str = PrivateAttr(default=".")

    def path(self, filename):
        full_path = filename if os.path.isabs(filename) else os.path.join(self._folder, filename)
        if not os.path.exists(full_path):
            raise FileNotFoundError(f"The file '{full_path}' does not exist.")
        return full_path


class TorusModel(ModelFile):
    kind: Literal["torus"]
    hamiltonian: str
    omega: list[float]
    C: Optional[list[list[float]]] = None
    K: int = Field(default=4, ge=1)
    epsilon: Optional[float] = None
    torus_threshold: float = Field(default=1e-6, gt=0)
    certify_time: float = Field(default=1e4, gt=0)

    def series(self):
        return read_psx(self.path(self.hamiltonian))

    def kolmogorov_input(self):
        return KolmogorovInput.from_series(self.series(), self.omega, C=self.C,
                                           epsilon_tag=1.0 if self.epsilon is None else self.epsilon)


class FastSlowModel(ModelFile):
    kind: Literal["fast_slow"]
    builtin: Optional[Literal["synthetic_model"]] = None
    series: Optional[str] = None
    n_fast: Optional[int] = Field(default=None, ge=1)
    kappa: Optional[list[float]] = None
    lambda_ref: Optional[list[float]] = None
    mu: float = Field(default=1e-3, gt=0)
    K: int = Field(default=4, ge=1)
    cap: float = Field(default=3, gt=0)
    n_star: list[float]
    g_star: Optional[list[float]] = None
    secular_actions: Optional[list[float]] = None

    @model_validator(mode='after')
    def _check_source(self):
        if (self.builtin is None) == (self.series is None):
            raise ValueError("Exactly one of 'builtin' and 'series' must be given")
        if self.series is not None and (self.n_fast is None or self.kappa is None):
            raise ValueError("A series model needs 'n_fast' and 'kappa'")
        if (self.g_star is None) == (self.secular_actions is None):
            raise ValueError("Exactly one of 'g_star' and 'secular_actions' must be given")
        return self

    def hamiltonian(self):
        if self.builtin is not None:
            H = BUILTINS[self.builtin](mu=self.mu, K=self.K)
        else:
            H = FastSlowHamiltonian(self.n_fast, self.kappa, read_psx(self.path(self.series)), self.mu,
                                    lambda_ref=self.lambda_ref, name=self.name)
        H.cap = self.cap
        H.uncertainties = dict(self.uncertainties)
        return H


class Body(BaseModel):
    model_config = ConfigDict(extra='forbid')
    name: str
    mass: Optional[float] = Field(default=None, ge=0)
    mass_ratio: Optional[float] = Field(default=None, gt=0)
    a: float = Field(gt=0)
    e: float = Field(ge=0, lt=1)
    i: float = 0.0
    M: float = 0.0
    omega_peri: float = 0.0
    Omega_node: float = 0.0

    @model_validator(mode='after')
    def _check_mass(self):
        if (self.mass is None) == (self.mass_ratio is None):
            raise ValueError(f"Body '{self.name}' needs exactly one of 'mass' and 'mass_ratio'")
        return self

    def elements(self, star_mass):
        mass = self.mass if self.mass is not None else star_mass / self.mass_ratio
        return OrbitalElements(self.a, self.e, self.i, self.M, self.omega_peri, self.Omega_node, mass, self.name)


class ThreeBodyModel(ModelFile):
    kind: Literal["three_body"]
    star_mass: float = Field(default=STAR_MASS, gt=0)
    convention: Literal["heliocentric", "poincare"] = "heliocentric"
    bodies: list[Body] = Field(min_length=1)
    n_star: Optional[list[float]] = None
    g_star: Optional[list[float]] = None

    def elements(self):
        return [body.elements(self.star_mass) for body in self.bodies]

    def state(self):
        return elements_to_cartesian(self.elements(), self.star_mass, self.convention)


class Tone(BaseModel):
    model_config = ConfigDict(extra='forbid')
    freq: float
    amplitude: tuple[float, float] = (1.0, 0.0)


class SignalModel(ModelFile):
    kind: Literal["signal"]
    tones: list[Tone] = Field(min_length=1)
    t_step: float = Field(gt=0)
    n_samples: int = Field(ge=64)
    t0: float = 0.0
    noise: float = Field(default=0.0, ge=0)
    seed: int = 0

    def times(self):
        return self.t0 + self.t_step * np.arange(self.n_samples)

    def signal(self):
        t = self.times()
        f = np.zeros(self.n_samples, dtype=np.complex128)
        for tone in self.tones:
            f += complex(*tone.amplitude) * np.exp(1j * tone.freq * t)
        if self.noise > 0:
            rng = np.random.default_rng(self.seed)
            f += self.noise * (rng.standard_normal(self.n_samples) + 1j * rng.standard_normal(self.n_samples))
        return f


Model = Annotated[Union[TorusModel, FastSlowModel, ThreeBodyModel, SignalModel], Field(discriminator='kind')]
_ADAPTER = TypeAdapter(Model)


def available_models():
    return sorted(os.path.splitext(f)[0] for f in os.listdir(MODELS_DIR) if f.endswith(".toml"))


def model_path(name):
    """Path of a model given by file path or bundled name."""
    if name.endswith(".toml") or os.path.sep in name:
        if not os.path.exists(name):
            raise FileNotFoundError(f"The file '{name}' does not exist.")
        return os.path.abspath(name)
    path = os.path.join(MODELS_DIR, f"{name}.toml")
    if not os.path.exists(path):
        raise ManifestError(f"Unknown model '{name}', bundled models are {available_models()}")
    return path


def load_model(name):
    path = model_path(name)
    Logger.debug(f"Loading model from '{path}'")
    with open(path, 'rb') as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ManifestError(f"{path}: {e}") from e
    try:
        model = _ADAPTER.validate_python(data)
    except ValidationError as e:
        raise ManifestError(f"{path}: {e}") from e
    model._folder = os.path.dirname(path)
    return model

