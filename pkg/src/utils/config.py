"""
Config loading for the simulator.

Defaults come from config/config.yaml (or the file named by IRS_SIM_CONFIG).
Experiment specs are JSON files whose field names carry their units; they
are validated into ExperimentSpec here.
"""

from dotenv import load_dotenv
load_dotenv()

import hashlib
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.utils.errors import ConfigError
from src.utils.state import DesignConfig, LinkGeometry, SchemeKind

REPO_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_CONFIG_PATH = REPO_ROOT / "config" / "config.yaml"


def load_config(path: Union[str, Path, None] = None) -> dict:
    """
    Read the YAML defaults.

    Args:
        path: Explicit file; falls back to $IRS_SIM_CONFIG, then config/config.yaml

    Returns:
        Parsed config dict
    """
    path = Path(path or os.environ.get("IRS_SIM_CONFIG") or DEFAULT_CONFIG_PATH)
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e

    if not isinstance(loaded, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(loaded).__name__}")
    for section in ("geometry", "design", "monte_carlo", "harness", "validation"):
        if section not in loaded:
            raise ConfigError(f"config {path} is missing section '{section}'")
    return loaded


# Load config
config = load_config()


@contextmanager
def config_from(path: Union[str, Path]):
    """
    Swap the module-level defaults for another YAML file, restoring them on exit.

    Every module shares the one `config` dict, so it is updated in place.
    """
    loaded = load_config(path)
    saved = dict(config)
    config.clear()
    config.update(loaded)
    try:
        yield config
    finally:
        config.clear()
        config.update(saved)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def design_config(K: float, M: int, **overrides) -> DesignConfig:
    """DesignConfig from the `design` section, with non-None overrides applied"""
    settings = dict(config["design"])
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return DesignConfig(K=K, M=M, **settings)


# ========== EXPERIMENT SPECS ==========

class GeometryConfig(BaseModel):
    """Link geometry as written in config files: explicit units, dBm powers"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    P_s_dBm: float = Field(allow_inf_nan=False)
    sigma2_dBm: float = Field(allow_inf_nan=False)
    d_sr_m: float = Field(gt=0, allow_inf_nan=False)
    d_rd_m: float = Field(gt=0, allow_inf_nan=False)
    alpha: float = Field(gt=0, allow_inf_nan=False)
    beta0: float = Field(gt=0, allow_inf_nan=False)
    lambda_m: float = Field(gt=0, allow_inf_nan=False)
    phi_sr_rad: float = Field(allow_inf_nan=False)
    phi_rd_rad: float = Field(allow_inf_nan=False)

    def to_link_geometry(self) -> LinkGeometry:
        return LinkGeometry(
            d_sr=self.d_sr_m,
            d_rd=self.d_rd_m,
            alpha=self.alpha,
            lam=self.lambda_m,
            phi_sr=self.phi_sr_rad,
            phi_rd=self.phi_rd_rad,
            P_s=dbm_to_watts(self.P_s_dBm),
            sigma2=dbm_to_watts(self.sigma2_dBm),
            beta0=self.beta0,
        )


def default_geometry() -> GeometryConfig:
    return GeometryConfig(**config["geometry"])


class SweepConfig(BaseModel):
    """The swept quantity and its values"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    variable: Literal["N", "d_rd", "cos_sum"]
    values: List[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_values(self):
        for v in self.values:
            if self.variable == "cos_sum":
                # sign is physical; |c| <= eps_angle fails later as degenerate geometry
                if not abs(v) <= 2.0:
                    raise ValueError(f"cos_sum sweep values must lie in [-2, 2], got {v}")
                continue
            if not v > 0:
                raise ValueError(f"sweep values must be positive, got {v}")
            if self.variable == "N" and (v != int(v) or v < 2):
                raise ValueError(f"N sweep values must be integers >= 2, got {v}")
        return self


class ExperimentSpec(BaseModel):
    """
    Everything run_sweep needs for one experiment.

    N is the fixed element count when the sweep is over d_rd or cos_sum.
    weighting / objective / phase_model left as None take the `design`
    section of config.yaml.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    geometry: GeometryConfig = Field(default_factory=default_geometry)
    K: float = Field(default_factory=lambda: float(config["harness"]["K"]), ge=0, allow_inf_nan=False)
    M: int = Field(default_factory=lambda: int(config["harness"]["M"]), ge=2)
    N: int = Field(default_factory=lambda: int(config["harness"]["N"]), ge=2)
    schemes: List[SchemeKind] = Field(
        default_factory=lambda: [SchemeKind(s) for s in config["harness"]["schemes"]],
        min_length=1,
    )
    sweep: SweepConfig
    trials: int = Field(default_factory=lambda: int(config["monte_carlo"]["trials"]), ge=1)
    seed: int = Field(default_factory=lambda: int(config["monte_carlo"]["seed"]), ge=0)
    cudps_angle_sweep: List[float] = Field(
        default_factory=lambda: [float(c) for c in config["harness"]["cudps_angle_sweep"]],
        min_length=1,
    )
    weighting: Optional[Literal["amplitude", "unweighted"]] = None
    objective: Optional[Literal["absolute_error", "resultant"]] = None
    phase_model: Optional[Literal["gaussian", "rician"]] = None
    max_aperture_m: Optional[float] = Field(
        default_factory=lambda: config["harness"].get("max_aperture_m"), gt=0
    )
    workers: int = Field(default_factory=lambda: int(config["harness"].get("workers", 1)), ge=1)

    @field_validator("schemes")
    @classmethod
    def _unique_schemes(cls, schemes):
        if len(set(schemes)) != len(schemes):
            raise ValueError("schemes must not repeat")
        return schemes

    @field_validator("cudps_angle_sweep")
    @classmethod
    def _reachable_angles(cls, values):
        for c in values:
            if not 0.0 < abs(c) <= 2.0:
                raise ValueError(f"C_UDPS cos_sum values must satisfy 0 < |c| <= 2, got {c}")
        return values

    def design_config(self) -> DesignConfig:
        return design_config(
            self.K,
            self.M,
            weighting=self.weighting,
            objective=self.objective,
            phase_model=self.phase_model,
        )

    def spec_hash(self) -> str:
        """sha256 of the canonical JSON form without `workers` (first 16 hex digits)"""
        canonical = json.dumps(self.model_dump(mode="json", exclude={"workers"}), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def parse_experiment_spec(text: str, source: str = "<string>") -> ExperimentSpec:
    try:
        return ExperimentSpec.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON ({e})") from e
    except ValidationError as e:
        raise ConfigError(f"{source}: {e.error_count()} invalid field(s): {e.errors()[0]['loc']} {e.errors()[0]['msg']}") from e


def load_experiment_spec(path: Union[str, Path]) -> ExperimentSpec:
    """
    Parse a JSON experiment spec.

    Raises:
        ConfigError: unreadable file, bad JSON or invalid fields
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read experiment spec {path}: {e}") from e
    return parse_experiment_spec(text, source=str(path))


def dump_experiment_spec(spec: ExperimentSpec, path: Union[str, Path, None] = None) -> str:
    """Serialize a spec to JSON (and write it when a path is given)"""
    text = json.dumps(spec.model_dump(mode="json"), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    return text
