"""
Configuration for nhtherm
Per-run JSON documents parsed into pydantic models, plus process-level settings
read from the environment (optionally via a .env file)
"""

import json
import logging
import os
from pathlib import Path
from typing import List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, model_validator

from errors import ConfigError

logger = logging.getLogger(__name__)


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelConfig(_Block):
    """Hamiltonian parameters; unused fields are ignored by the chosen kind"""
    kind: Literal["Qubit", "IsingChain"] = "Qubit"
    h_x: float = 1.0
    h_y: float = 0.5
    h_z: float = 0.0
    J: float = 1.0
    L: int = Field(default=1, ge=1, le=12)
    coupling: Literal["SigmaZ", "SigmaX"] = "SigmaZ"


class BathConfig(_Block):
    shape: Literal["Ohmic", "FlatKMS"] = "Ohmic"
    gamma0: PositiveFloat = 0.1
    temperature: PositiveFloat = 1.0


class InitialStateConfig(_Block):
    kind: Literal[
        "FullyPolarizedUp",
        "InfiniteTemperature",
        "GroundProjectorBiorthogonal",
        "FileMatrix",
    ] = "InfiniteTemperature"
    path: Optional[str] = None

    @model_validator(mode="after")
    def _path_for_file(self):
        if self.kind == "FileMatrix" and not self.path:
            raise ValueError("initial_state.path is required for FileMatrix")
        return self


class RunConfig(_Block):
    # None means 200 / gamma0
    t_end_cap: Optional[PositiveFloat] = None
    sample_dt: PositiveFloat = 0.5
    steady_tol: PositiveFloat = 1e-10
    freq_tol: PositiveFloat = 1e-9
    degeneracy_tol: PositiveFloat = 1e-9
    thermalization_tol: PositiveFloat = 1e-8
    rtol: PositiveFloat = 1e-8
    atol: PositiveFloat = 1e-10
    # Long-time states in scans: dominant generator eigenvector or time integration
    scan_method: Literal["spectral", "evolve"] = "spectral"
    variance_threshold: PositiveFloat = 1e-4

    def time_cap(self, gamma0: float) -> float:
        return self.t_end_cap if self.t_end_cap is not None else 200.0 / gamma0


class OutputConfig(_Block):
    directory: Optional[str] = None
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


class SimulationConfig(_Block):
    """One run: model, bath, evolution kind, initial state, run knobs and output"""
    model: ModelConfig = Field(default_factory=ModelConfig)
    bath: BathConfig = Field(default_factory=BathConfig)
    evolution: Literal["BTE", "RTE"] = "BTE"
    initial_state: InitialStateConfig = Field(default_factory=InitialStateConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


def _error_keys(error: ValidationError) -> List[str]:
    return [".".join(str(part) for part in item["loc"]) for item in error.errors()]


def parse_config(text: str, source: str = "<string>") -> SimulationConfig:
    """
    Parse a JSON config document

    Raises:
        ConfigError: Syntax error (with line / column) or validation failure (with key paths)
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from e

    try:
        return SimulationConfig.model_validate(data)
    except ValidationError as e:
        keys = _error_keys(e)
        details = "; ".join(f"{'.'.join(str(p) for p in item['loc'])}: {item['msg']}" for item in e.errors())
        raise ConfigError(f"{source}: {details}", keys=keys) from e


def load_config(path: Union[str, Path]) -> SimulationConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text, source=str(path))


def dump_config(config: SimulationConfig) -> str:
    """Serialize with sorted keys; parse_config(dump_config(c)) == c"""
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


class Settings(BaseModel):
    """Process-level settings, not part of any run"""
    model_config = ConfigDict(frozen=True)

    output_dir: Path = Path("./runs")
    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"


def _default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))


def read_settings(env_file: Optional[Union[str, Path]] = None) -> Settings:
    """Read NHTHERM_* variables; a .env file only fills variables not already set"""
    load_dotenv(dotenv_path=env_file, override=False)
    try:
        return Settings(
            output_dir=Path(os.getenv("NHTHERM_OUTPUT_DIR", "./runs")),
            workers=int(os.getenv("NHTHERM_WORKERS", str(_default_workers()))),
            log_level=os.getenv("NHTHERM_LOG_LEVEL", "INFO").upper(),
        )
    except (ValueError, ValidationError) as e:
        raise ConfigError(f"invalid NHTHERM_* environment setting: {e}") from e


# Singleton instance
_settings: Optional[Settings] = None


def get_settings(env_file: Optional[Union[str, Path]] = None) -> Settings:
    """Get or create settings singleton; an explicit env_file forces a re-read"""
    global _settings
    if _settings is None or env_file is not None:
        _settings = read_settings(env_file)
    return _settings


def reset_settings():
    global _settings
    _settings = None
