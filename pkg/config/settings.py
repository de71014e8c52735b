"""
Analysis settings
Defaults, overridable from the environment (.env) and from a JSON config document
"""

import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from framework.errors import ConfigurationError, MalformedConfig

ENV_PREFIX = "CROSSLAYER_"


@dataclass(frozen=True)
class AnalysisSettings:
    """Bounds and defaults shared by every analysis"""

    # Solver bounds
    oracle_bound: int = 32
    oracle_max_miners: int = 8
    enumeration_bound: int = 10**7
    iewds_bound: int = 4096
    collusion_block_cap: int = 4
    max_population: int = 10

    # Monte Carlo
    mc_trials: int = 100_000
    default_seed: int = 0

    # Fee grids
    fee_grid_divisions: int = 100
    epsilon_open: Optional[str] = None  # None means one grid step

    # Reject blockchain responses that depend on a miner tie
    reject_ambiguous: bool = False

    tolerance: float = 1e-9

    # Sweeps and output
    sweep_batch_size: int = 5
    log_level: str = "INFO"
    log_file: str = "crosslayer_analysis.log"
    results_dir: str = "analysis_results"

    @classmethod
    def from_env(cls) -> "AnalysisSettings":
        """Build settings from CROSSLAYER_* environment variables (a .env file is honoured)"""
        load_dotenv()
        overrides: Dict[str, Any] = {}
        for f in fields(cls):
            raw = os.getenv(ENV_PREFIX + f.name.upper())
            if raw is not None:
                overrides[f.name] = _coerce(f.name, f.type, raw)
        return cls(**overrides)

    def merged(self, overrides: Dict[str, Any]) -> "AnalysisSettings":
        """Return a copy with the given fields replaced; unknown keys are rejected"""
        known = {f.name: f for f in fields(self)}
        unknown = sorted(set(overrides) - set(known))
        if unknown:
            raise MalformedConfig(f"Unknown settings keys: {', '.join(unknown)}")
        updated = replace(self, **overrides)
        updated.validate()
        return updated

    def from_file(self, path: str) -> "AnalysisSettings":
        """Merge the `settings` object of a JSON config document over these settings"""
        try:
            document = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise MalformedConfig(f"Cannot read config document {path}: {e}") from e
        if not isinstance(document, dict):
            raise MalformedConfig("Config document must be a JSON object")
        return self.merged(document.get("settings", {}))

    def validate(self) -> None:
        for name in ("oracle_bound", "oracle_max_miners", "enumeration_bound", "iewds_bound",
                     "collusion_block_cap", "max_population", "mc_trials",
                     "fee_grid_divisions", "sweep_batch_size"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.tolerance <= 0:
            raise ConfigurationError("tolerance must be positive")


def _coerce(name: str, annotation: Any, raw: str) -> Any:
    kind = str(annotation)
    if "bool" in kind:
        if raw.lower() not in ("1", "0", "true", "false", "yes", "no"):
            raise ConfigurationError(f"Invalid value for {name}: {raw!r}")
        return raw.lower() in ("1", "true", "yes")
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError as e:
        raise ConfigurationError(f"Invalid value for {name}: {raw!r}") from e
    return raw


# Global settings instance
settings = AnalysisSettings.from_env()
