"""JSON experiment configuration.

Lengths in cm, moduli and body forces in consistent force units. Unknown
keys are rejected and numbers must be JSON numbers.
"""

import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fem3d import PROFILES
from .harness import SweepConfig, Thresholds, default_ladder
from .inertia import AccelerationProfile
from .material import ElasticityTensor, MaterialError
from .scaling import DomainFamily, LoadSpec
from .solvers import SolverOptions


class ConfigError(ValueError):
    pass


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, populate_by_name=True)


def _triple(v):
    if len(v) != 3:
        raise ValueError("expected exactly three entries")
    return v


class Geometry(_Model):
    ell: float = Field(100.0, gt=0)
    h: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _ratio(self):
        if self.h > self.ell:
            raise ValueError("h must not exceed ell (eps_r = h/ell <= 1)")
        return self


class Material(_Model):
    lam: float = Field(0.0, alias="lambda")
    mu: float = 1.0
    voigt: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def _admissible(self):
        try:
            self.tensor()
        except MaterialError as exc:
            raise ValueError(str(exc)) from None
        return self

    def tensor(self):
        if self.voigt is not None:
            return ElasticityTensor.general(self.voigt)
        return ElasticityTensor.isotropic(self.lam, self.mu)


class MeshSizes(_Model):
    nx: int = Field(16, ge=1)
    ny: int = Field(16, ge=1)
    nz: int = Field(1, ge=1)


class Load(_Model):
    profile: Literal[PROFILES] = "uniform"
    amplitude: List[float] = [0.0, 0.0, 1.0e-7]
    exponents: List[float] = [1.0, 1.0, 2.0]

    _three = field_validator("amplitude", "exponents")(_triple)


class Solver(_Model):
    method: Literal["direct", "pcg"] = "direct"
    tol: float = Field(1e-12, gt=0)
    max_iter_factor: float = Field(50.0, gt=0)


class Inertia(_Model):
    rho: float = Field(1.0, ge=0)
    accel: List[float] = [-1.0, -1.0, -1.0]
    psi: List[float] = [1.0, 1.0, 1.0]
    profile: Literal[PROFILES] = "cosine"
    ladder: Optional[List[float]] = None

    _three = field_validator("accel", "psi")(_triple)


class Checks(_Model):
    e_kl_max: float = 0.05
    shear_rate_min: float = 0.9
    director_max: float = 0.05
    rm_res_max: float = 0.05
    gap_ratio_min: float = 3.0
    residual_max: float = 1e-10
    bound_factor: float = 3.0


class ExperimentConfig(_Model):
    geometry: Geometry = Geometry()
    material: Material = Material()
    kappa: float = Field(0.0, ge=0)
    epsilon: Optional[float] = None
    ladder: Optional[List[float]] = None
    mesh: MeshSizes = MeshSizes()
    load: Load = Load()
    beta: float = 0.0
    solver: Solver = Solver()
    inertia: Inertia = Inertia()
    checks: Checks = Checks()
    out: str = "out"

    @property
    def family(self):
        return DomainFamily(self.geometry.ell, self.geometry.h)

    @model_validator(mode="after")
    def _resolve(self):
        eps_r = self.family.eps_r
        if self.epsilon is None:
            self.epsilon = eps_r
        if not 0 < self.epsilon <= eps_r:
            raise ValueError(f"epsilon must lie in (0, eps_r={eps_r}], got {self.epsilon}")
        if self.ladder is None:
            self.ladder = list(default_ladder(self.family, 4))
        _check_ladder(self.ladder, eps_r, "ladder")
        if self.inertia.ladder is None:
            self.inertia.ladder = [eps_r * 10.0**-k for k in range(4)]
        _check_ladder(self.inertia.ladder, eps_r, "inertia.ladder")
        return self

    def echo(self):
        """Fully resolved configuration, defaults included."""
        return self.model_dump(by_alias=True, mode="json")

    def sweep_config(self):
        return SweepConfig(
            family=self.family,
            material=self.material.tensor(),
            kappa=self.kappa,
            ladder=tuple(self.ladder),
            nx=self.mesh.nx, ny=self.mesh.ny, nz=self.mesh.nz,
            load=LoadSpec(self.load.profile, tuple(self.load.amplitude), tuple(self.load.exponents)),
            solver=SolverOptions(method=self.solver.method, tol=self.solver.tol,
                                 max_iter_factor=self.solver.max_iter_factor),
            thresholds=Thresholds(**self.checks.model_dump()),
        )

    def acceleration_profile(self):
        i = self.inertia
        return AccelerationProfile(i.rho, tuple(i.accel), tuple(i.psi), i.profile,
                                   self.geometry.ell, self.geometry.h, self.family.eps_r)


def _check_ladder(ladder, eps_r, name):
    if not ladder:
        raise ValueError(f"{name} must not be empty")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError(f"{name} must be strictly decreasing")
    bad = [e for e in ladder if not 0 < e <= eps_r]
    if bad:
        raise ValueError(f"{name} entries must lie in (0, eps_r={eps_r}], got {bad}")


def format_errors(exc):
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def load_config(path=None, overrides=None):
    """Parse a JSON config file (or defaults) and apply flag overrides."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_errors(exc)) from None
