"""Validated parameter records shared by every backend module."""

from enum import Enum
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from nh_spinwave.backend.config import Config
from nh_spinwave.backend.logger import GLOBAL_LOGGER as log


class Flavor(str, Enum):
    """Which quadratic theory a quantity belongs to."""

    BOSONIC = "boson"
    FERMIONIC = "fermion"


def check_even_sites(n_sites: int) -> int:
    if n_sites < 2 or n_sites % 2:
        raise ValueError(
            f"n_sites must be even and >= 2 so that k = -pi lies on the grid (got {n_sites})"
        )
    return n_sites


class ModelParams(BaseModel):
    """Couplings and lattice of the non-Hermitian transverse-field Ising model.

    ``gamma`` is the imaginary part of the transverse field, ``gamma_prime``
    the quartic non-Hermitian strength used by the single-mode model only.
    The lattice is hypercubic with unit spacing and ``n_sites`` sites per axis.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    J: float = Field(default=1.0, allow_inf_nan=False)
    h: float = Field(default=5.0, allow_inf_nan=False)
    gamma: float = Field(default=0.0, allow_inf_nan=False)
    gamma_prime: float = Field(default=0.0, ge=0.0, allow_inf_nan=False)
    dimension: int = Field(default=1, ge=1)
    n_sites: int = 200

    @field_validator("n_sites")
    @classmethod
    def _even_sites(cls, value: int) -> int:
        return check_even_sites(value)

    @field_validator("dimension")
    @classmethod
    def _flag_high_dimension(cls, value: int) -> int:
        if value > 3:
            log.warning("Dimension above 3 is outside the tested range", dimension=value)
        return value

    @property
    def lattice_spacing(self) -> float:
        return 1.0

    @property
    def n_modes(self) -> int:
        return self.n_sites ** self.dimension

    def with_gamma(self, gamma: float) -> "ModelParams":
        return self.model_copy(update={"gamma": float(gamma)})

    def hermitian(self) -> "ModelParams":
        """The pre-quench model: same couplings, no dissipation."""
        return self.model_copy(update={"gamma": 0.0, "gamma_prime": 0.0})


class QuenchSpec(BaseModel):
    """Sudden quench of the dissipation from ``pre`` (Hermitian) to ``post``."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    pre: ModelParams
    post: ModelParams
    t_start: float = 0.0
    t_end: float
    steps: int = Field(default=Config.STEPS, ge=2)
    dt: float = Field(default=Config.DT, gt=0.0)

    @model_validator(mode="after")
    def _check_protocol(self) -> "QuenchSpec":
        for name in ("J", "h", "dimension", "n_sites"):
            if getattr(self.pre, name) != getattr(self.post, name):
                raise ValueError(f"pre- and post-quench models must share {name}")
        if self.pre.gamma != 0.0:
            raise ValueError("pre-quench model must be Hermitian (gamma = 0)")
        if self.post.gamma_prime != 0.0:
            raise ValueError("gamma_prime is only used by the single-mode model; it must be 0 in a quench")
        if self.t_end <= self.t_start:
            raise ValueError("t_end must be larger than t_start")
        spacing = (self.t_end - self.t_start) / (self.steps - 1)
        if self.dt > spacing:
            raise ValueError(f"dt={self.dt} exceeds the output spacing {spacing}")
        return self

    @classmethod
    def from_post(cls, post: ModelParams, t_end: float, **kwargs: Any) -> "QuenchSpec":
        return cls(pre=post.hermitian(), post=post, t_end=t_end, **kwargs)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.steps)


class GuessEnvelope(BaseModel):
    """Width of the three-Gaussian momentum envelope of the guessed correlation."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(default=Config.GUESS_SIGMA, gt=0.0)


class SqueezeParams(BaseModel):
    """Squeezing ``xi = r exp(i phi)`` of a single-mode squeezed vacuum."""

    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0.0)
    phi: float = 0.0


class RunManifest(BaseModel):
    """Everything needed to regenerate the outputs of one CLI run."""

    manifest_id: str
    subcommand: str
    parameters: Dict[str, Any]
    integrator: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    tool_version: str
    library_versions: Dict[str, str] = Field(default_factory=dict)
    duration_seconds: float = 0.0
    divergence: Optional[Dict[str, Any]] = None
