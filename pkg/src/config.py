"""Application configuration."""

import math
from pathlib import Path
from typing import Any, Optional

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.models.errors import ConfigError
from src.models.population import DynamicsParams, EvolutionParams
from src.models.run import CostModel
from src.models.samples import NoiseParams


class Settings(BaseSettings):
    """Settings loaded from defaults, .env, CEAMCL_* variables and config files."""

    model_config = SettingsConfigDict(
        env_prefix="CEAMCL_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Benchmark map
    map_side: float = 15.0
    rooms_per_side: int = 2
    door_width: float = 1.0
    resolution: float = 0.1

    # Sensor
    n_beams: int = 32
    max_range: float = 10.0
    fov: float = math.pi

    # Motion / sensor noise
    alpha_trans: float = 0.05
    alpha_rot: float = 0.05
    alpha_trans_rot: float = 0.01
    sigma_hit: float = 0.1
    z_hit: float = 0.9
    z_rand: float = 0.1

    # Initial species generation
    grid_x: int = 150
    grid_y: int = 150
    mu: float = 0.85
    eta: float = 2.0
    n_test: int = 100_000

    # Splitting-merging
    split_grid: int = 30
    split_dilation: int = Field(default=0, ge=0)
    valley_points: int = 10
    valley_ratio: float = 0.5
    min_species_size: int = Field(default=3, ge=2)
    population_cap: float = 5000.0

    # Coevolution
    growth_rate: float = 0.2
    delta: float = 80.0
    epsilon: float = 0.5

    # Intra-species evolution
    p_c: float = 0.85
    p_m: float = 0.15
    sigma_mut_xy: float = 0.1
    sigma_mut_theta: float = 0.05

    # Fixed-size filters (MCL / GMCL)
    fixed_n: int = 500

    # Harness
    step_len: float = 0.25
    association_radius: float = 1.0
    convergence_mass: float = 0.9
    min_hypothesis_samples: int = 3
    clearance: float = 0.4
    seed: int = 0
    n_seeds: int = 20
    jobs: int = 1

    # Application
    log_level: str = "INFO"
    debug: bool = False

    def noise_params(self) -> NoiseParams:
        return NoiseParams(
            alpha_trans=self.alpha_trans,
            alpha_rot=self.alpha_rot,
            alpha_trans_rot=self.alpha_trans_rot,
            sigma_hit=self.sigma_hit,
            z_hit=self.z_hit,
            z_rand=self.z_rand,
        )

    def dynamics_params(self) -> DynamicsParams:
        return DynamicsParams(r=self.growth_rate, delta=self.delta, epsilon=self.epsilon)

    def evolution_params(self) -> EvolutionParams:
        return EvolutionParams(
            p_c=self.p_c,
            p_m=self.p_m,
            sigma_mut=(self.sigma_mut_xy, self.sigma_mut_xy, self.sigma_mut_theta),
        )

    def cost_model(self, t_f: float, t_s: float, t_r: float, t_m: float = 0.0) -> CostModel:
        return CostModel(T_f=t_f, T_s=t_s, T_r=t_r, T_m=t_m, p=self.p_c + self.p_m)

    @property
    def species_grid(self) -> tuple[int, int]:
        return (self.grid_x, self.grid_y)

    @property
    def split_grid_dims(self) -> tuple[int, int]:
        return (self.split_grid, self.split_grid)


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse a ``key = value`` config file into raw string overrides."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in Settings.model_fields:
            raise ConfigError(f"{path}:{lineno}: unknown setting '{key}'")
        values[key] = value
    return values


def build_settings(
    config_path: Optional[str | Path] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> Settings:
    """Settings with precedence defaults < env < config file < overrides."""
    values: dict[str, Any] = {}
    if config_path is not None:
        values.update(load_config_file(config_path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Settings(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc

