"""TOML run manifests, one pydantic schema per command."""
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ManifestError
from ..util import FileManager, Logger


class Manifest(BaseModel):
    model_config = ConfigDict(extra='forbid')
    command: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)
    folder: str = Field(default=".", exclude=True)

    def resolve(self, filename):
        """Path of a file referenced by the manifest, relative to the manifest folder."""
        full_path = filename if os.path.isabs(filename) else os.path.join(self.folder, filename)
        if not os.path.exists(full_path):
            raise FileNotFoundError(f"The file '{full_path}' does not exist.")
        return full_path

    def model_reference(self, name):
        """Bundled model names pass through, file references are resolved."""
        if name.endswith(".toml") or "/" in name:
            return self.resolve(name)
        return name


class Grid(BaseModel):
    model_config = ConfigDict(extra='forbid')
    start: float = Field(gt=0)
    stop: float = Field(gt=0)
    num: int = Field(ge=1)
    log: bool = True

    @model_validator(mode='after')
    def _check_order(self):
        if self.num > 1 and self.stop <= self.start:
            raise ValueError(f"Grid stop {self.stop} must exceed start {self.start}")
        return self

    def values(self):
        if self.log:
            return np.geomspace(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


class StabilitySettings(BaseModel):
    model_config = ConfigDict(extra='forbid')
    rho0: Optional[list[float]] = None
    rho0_grid: Optional[Grid] = None
    r_max: Optional[int] = Field(default=None, ge=1)
    orders: Optional[list[int]] = None
    T_target: Optional[float] = Field(default=None, gt=0)
    time_unit: str = "yr"

    @model_validator(mode='after')
    def _check_grid(self):
        if (self.rho0 is None) == (self.rho0_grid is None):
            raise ValueError("Exactly one of 'rho0' and 'rho0_grid' must be given")
        if self.rho0 is not None and (not self.rho0 or min(self.rho0) <= 0):
            raise ValueError("rho0 values must be positive")
        return self

    def grid(self):
        return np.asarray(self.rho0, dtype=np.float64) if self.rho0 is not None else self.rho0_grid.values()


class KolmogorovManifest(Manifest):
    model: str
    order: int = Field(default=8, ge=1)
    action_cap: Optional[int] = Field(default=3, ge=2)
    floor: Optional[float] = Field(default=None, gt=0)
    drop_below: float = Field(default=0.0, ge=0)
    certify: bool = False
    certify_time: Optional[float] = Field(default=None, gt=0)
    q0: Optional[list[float]] = None


class BirkhoffManifest(Manifest):
    model: Optional[str] = None
    hamiltonian: Optional[str] = None
    omega: Optional[list[float]] = None
    kolmogorov_order: int = Field(default=8, ge=1)
    order: int = Field(default=5, ge=1)
    K: Optional[int] = Field(default=None, ge=1)
    floor: Optional[float] = Field(default=None, gt=0)
    resonance: Literal["raise", "keep"] = "raise"
    drop_below: float = Field(default=0.0, ge=0)
    stability: Optional[StabilitySettings] = None

    @model_validator(mode='after')
    def _check_source(self):
        if (self.model is None) == (self.hamiltonian is None):
            raise ValueError("Exactly one of 'model' and 'hamiltonian' must be given")
        if self.hamiltonian is not None and self.omega is None:
            raise ValueError("A torus-graded 'hamiltonian' needs its frequency vector 'omega'")
        return self


class StabilityManifest(Manifest, StabilitySettings):
    D: Optional[dict[str, float]] = None
    D_csv: Optional[str] = None
    synthetic: Optional[Literal["factorial_squared"]] = None
    synthetic_orders: int = Field(default=12, ge=1)
    model: Optional[str] = None

    @model_validator(mode='after')
    def _check_table(self):
        if sum(x is not None for x in (self.D, self.D_csv, self.synthetic)) != 1:
            raise ValueError("Exactly one of 'D', 'D_csv' and 'synthetic' must be given")
        return self


class PipelineManifest(Manifest):
    model: str
    fast_floor: Optional[float] = Field(default=None, gt=0)
    secular_floor: Optional[float] = Field(default=None, gt=0)
    kolmogorov_order: Optional[int] = Field(default=None, ge=1)
    birkhoff_order: Optional[int] = Field(default=None, ge=1)
    K: Optional[int] = Field(default=None, ge=1)
    drop_below: Optional[float] = Field(default=None, ge=0)
    stability: Optional[StabilitySettings] = None

    @model_validator(mode='after')
    def _check_chain(self):
        if self.birkhoff_order is not None and self.kolmogorov_order is None:
            raise ValueError("'birkhoff_order' needs 'kolmogorov_order'")
        if self.stability is not None and self.birkhoff_order is None:
            raise ValueError("'stability' needs 'birkhoff_order'")
        return self


class IntegrationSettings(BaseModel):
    model_config = ConfigDict(extra='forbid')
    t_span: float
    dt: float = Field(gt=0)
    scheme: Literal["symplectic4", "symplectic6"] = "symplectic6"
    stride: int = Field(default=1, ge=1)
    min_distance: float = Field(default=1e-3, gt=0)
    convention: Optional[Literal["heliocentric", "poincare"]] = None


class IntegrateManifest(Manifest, IntegrationSettings):
    model: str
    elements: bool = True


class SignalSpec(BaseModel):
    model_config = ConfigDict(extra='forbid')
    body: Optional[str] = None
    kind: Literal["mean_longitude", "eccentricity"] = "mean_longitude"
    n_freqs: int = Field(default=1, ge=1)


class FrequenciesManifest(Manifest):
    model: str
    integration: Optional[IntegrationSettings] = None
    signals: list[SignalSpec] = Field(min_length=1)
    noise_floor: Optional[float] = Field(default=None, ge=0)


CHECK_SUITES = ("bracket_grading", "norm_bound", "estimator", "interior_order", "kolmogorov_decay",
                "birkhoff_purity", "pipeline_chain", "kepler", "naff")


class CheckManifest(Manifest):
    suites: list[Literal[CHECK_SUITES]] = Field(default_factory=lambda: list(CHECK_SUITES))
    seed: int = 0
    samples: int = Field(default=100, ge=1)


MANIFESTS = {
    "kolmogorov": KolmogorovManifest,
    "birkhoff": BirkhoffManifest,
    "stability": StabilityManifest,
    "pipeline": PipelineManifest,
    "integrate": IntegrateManifest,
    "frequencies": FrequenciesManifest,
    "check": CheckManifest,
}


def load_manifest(path, command):
    """Read and validate the manifest of ``command``; records its hash for the output headers."""
    if command not in MANIFESTS:
        raise ManifestError(f"command must be one of {set(MANIFESTS)}, got '{command}'")
    if not os.path.exists(path):
        raise FileNotFoundError(f"The file '{path}' does not exist.")
    Logger.debug(f"Loading manifest '{path}'")
    with open(path, 'rb') as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ManifestError(f"{path}: {e}") from e
    if data.get("command", command) != command:
        raise ManifestError(f"{path}: manifest for '{data['command']}' given to '{command}'")
    data["folder"] = os.path.dirname(os.path.abspath(path))
    try:
        manifest = MANIFESTS[command].model_validate(data)
    except ValidationError as e:
        raise ManifestError(f"{path}: {e}") from e
    FileManager.manifest_hash = FileManager.hash_file(path)
    return manifest
