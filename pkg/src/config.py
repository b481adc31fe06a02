from pathlib import Path
from typing import List, Optional
from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Tolerances(BaseModel):
    """Numeric conventions shared by the catalog, the cone engine and the certifier.

    These are engineering choices, not values prescribed by the theory, and
    every report carries the instance that produced it.
    """

    active: float = Field(
        default=1e-9,
        description="A bound is active when |residual| <= active * (1 + data scale)",
    )
    membership: float = Field(
        default=1e-9, description="Absolute tolerance for set membership of reference points"
    )
    lp_feasibility: float = Field(
        default=1e-9, description="Phase-one objective below which an LP counts as feasible"
    )
    witness: float = Field(
        default=1e-8, description="Membership residual a triviality witness must meet"
    )
    rank: float = Field(
        default=1e-10, description="Singular values below rank * s_max count as zero"
    )
    zero_point: float = Field(
        default=1e-12, description="Reference point is zero when its max-norm is below this"
    )
    dykstra_max_iter: int = Field(default=100_000, description="Dykstra iteration cap")
    dykstra_tol: float = Field(default=1e-10, description="Dykstra convergence tolerance")

    model_config = {"frozen": True}


class SolverConfig(BaseModel):
    """Alternating-projection solver and sampler settings."""

    max_iter: int = Field(default=100_000, description="Iteration cap for solve_alternating")
    tol: float = Field(default=1e-8, description="Residual at which a solve counts as converged")
    sample_max_iter: int = Field(
        default=200, description="Iteration cap when repairing random candidates"
    )
    stall_window: int = Field(
        default=10,
        description="Candidates whose residual does not halve over this many sweeps are dropped",
    )

    model_config = {"frozen": True}


class ProbeConfig(BaseModel):
    """Empirical Lipschitz-modulus probe settings."""

    radii: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    samples_per_radius: int = Field(default=1000, ge=0)
    pool_size: int = Field(
        default=8, ge=2, description="Parameter draws per radius; all ordered pairs are probed"
    )
    oracle_factor: int = Field(
        default=10, ge=1, description="Oracle discretisation size relative to samples_per_radius"
    )
    oracle_radius_factor: float = Field(
        default=4.0, gt=0, description="Oracle ball starts at this multiple of the radius"
    )
    oracle_max_doublings: int = Field(default=12, ge=0)
    blowup_threshold: float = Field(
        default=10.0, gt=1.0, description="Decision boundary for blowup_factor"
    )
    workers: int = Field(default=1, ge=1, description="Threads used for per-radius batches")

    model_config = {"frozen": True}

    @field_validator("radii")
    @classmethod
    def _strictly_decreasing(cls, radii: List[float]) -> List[float]:
        if any(r <= 0 for r in radii):
            raise ValueError("radii must be positive")
        if any(a <= b for a, b in zip(radii, radii[1:])):
            raise ValueError("radii must be strictly decreasing")
        return radii


class Settings(BaseSettings):
    """Application settings managed by Pydantic.

    The seed override is the only value read from the environment.
    """

    SEED: Optional[int] = Field(
        default=None, description="Overrides the default random seed of solve/probe runs"
    )

    model_config = SettingsConfigDict(
        env_prefix="SPLITSTAB_",
        env_file=str(Path(__file__).resolve().parent.parent / ".env"),
        env_file_encoding="utf-8",
        extra="ignore",
    )


DEFAULT_SEED = 20240917

# Global instances
settings = Settings()
tolerances = Tolerances()
solver_config = SolverConfig()
probe_config = ProbeConfig()


def resolve_seed(seed: Optional[int] = None) -> int:
    """Explicit seed first, then the environment override, then the default."""
    if seed is not None:
        return seed
    if settings.SEED is not None:
        return settings.SEED
    return DEFAULT_SEED
