"""
Configuration Manager

Run configuration for strataflow: defaults, user-level overrides stored in
the platform config directory, YAML/JSON run files, CLI overrides and the
config hash embedded in every artifact.
"""

import copy
import hashlib
import json
import logging
import os
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_VERSION = "1.0"
HASH_LENGTH = 16
# keys that do not change results and stay out of the hash
UNHASHED_KEYS = ("out", "version")

CURVE_SCENARIOS = ("circle", "ellipse")
ROTSYM_SCENARIOS = ("sphere", "dumbbell")
CATALOG_SCENARIOS = ("plane", "shrinking-circle", "shrinking-sphere", "cylinder", "quasistatic-plane")
SCENARIOS = CURVE_SCENARIOS + ROTSYM_SCENARIOS + CATALOG_SCENARIOS
PIPELINES = ("simulate", "stratify", "regularity")


def default_config() -> Dict[str, Any]:
    """Default run configuration"""
    return {
        "version": CONFIG_VERSION,
        "scenario": {
            "type": "circle",
            "n": None,
            "radii": [1.0],
            "bell_radius": 2.0,
            "neck_radius": 0.5,
            "resolution": 256,
            "dt_max": None,
            "n_theta": 16,
            "emit_dt": 0.02,
            "stop": {"t_end": None, "max_curvature": None, "min_area": 1e-3},
        },
        "pipelines": list(PIPELINES),
        "stratification": {
            "j": [0, 1, 2],
            "eta": [0.05],
            "gamma": 0.25,
            "delta": 0.05,
            "q": 2,
            "epsilon": 0.1,
            "beta_max": 6,
            "beta": 3,
            "localized": True,
        },
        "regularity": {
            "p": [0.5, 1.5],
            "k": 1,
            "epsilon": 0.1,
            "radii": [2 ** -7, 2 ** -6, 2 ** -5, 2 ** -4, 2 ** -3],
        },
        "grid": 8,
        "points": 100,
        "seed": 0,
        "out": "strataflow-out",
    }


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict merge; override wins, None values in override are kept"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def config_hash(config: Dict[str, Any]) -> str:
    """First 16 hex chars of SHA-256 over the canonical JSON of the config"""
    hashed = {k: v for k, v in config.items() if k not in UNHASHED_KEYS}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:HASH_LENGTH]


@dataclass
class RunConfig:
    """Resolved run configuration"""

    scenario: Dict[str, Any] = field(default_factory=dict)
    pipelines: List[str] = field(default_factory=list)
    stratification: Dict[str, Any] = field(default_factory=dict)
    regularity: Dict[str, Any] = field(default_factory=dict)
    grid: int = 8
    points: int = 100
    seed: int = 0
    out: str = "strataflow-out"
    version: str = CONFIG_VERSION

    def __post_init__(self):
        kind = self.scenario.get("type")
        if kind not in SCENARIOS:
            raise ConfigError(f"unknown scenario {kind!r}; valid scenarios: {', '.join(SCENARIOS)}")
        unknown = [p for p in self.pipelines if p not in PIPELINES]
        if unknown:
            raise ConfigError(f"unknown pipelines {unknown}; valid pipelines: {', '.join(PIPELINES)}")
        if self.points < 1 or self.grid < 1:
            raise ConfigError("points and grid must be positive")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        data = {k: v for k, v in data.items() if k != "config_hash"}
        unknown = set(data) - set(default_config())
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged = deep_merge(default_config(), data)
        return cls(**merged)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    @property
    def scenario_type(self) -> str:
        return self.scenario["type"]


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a YAML or JSON run file"""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"config file {path} is malformed: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    logger.info(f"Config loaded from {path}")
    return data


class ConfigManager:
    """User-level defaults in the platform config directory plus run file resolution"""

    def __init__(self, app_name: str = "strataflow", config_dir: Optional[Path] = None):
        self.app_name = app_name
        self.config_dir = Path(config_dir) if config_dir is not None else self._get_config_directory()
        self.config_file = self.config_dir / "config.yaml"
        self.backup_file = self.config_dir / "config.backup.yaml"

    def _get_config_directory(self) -> Path:
        """Platform-appropriate configuration directory"""
        system = platform.system().lower()
        if system == "darwin":
            config_base = Path.home() / "Library" / "Application Support"
        elif system == "windows":
            config_base = Path(os.environ.get("APPDATA", Path.home() / "AppData" / "Roaming"))
        else:
            config_base = Path(os.environ.get("XDG_CONFIG_HOME", Path.home() / ".config"))
        return config_base / self.app_name

    def _ensure_config_directory(self) -> None:
        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            logger.info(f"Config directory ready: {self.config_dir}")
        except OSError as e:
            raise ConfigError(f"cannot create config directory {self.config_dir}: {e}") from e

    def _backup_existing_config(self) -> None:
        if self.config_file.exists():
            try:
                self.backup_file.write_text(self.config_file.read_text())
                logger.debug(f"Config backed up to {self.backup_file}")
            except OSError as e:
                logger.warning(f"Failed to backup config: {e}")

    def load_user_defaults(self) -> Dict[str, Any]:
        """User-level overrides; a missing or broken file yields no overrides"""
        if not self.config_file.exists():
            logger.debug("No user config file found, using built-in defaults")
            return {}
        try:
            return load_config_file(self.config_file)
        except ConfigError as e:
            logger.error(f"Ignoring user config: {e}")
            return {}

    def save_user_defaults(self, overrides: Dict[str, Any]) -> bool:
        try:
            self._ensure_config_directory()
            self._backup_existing_config()
            with open(self.config_file, "w") as f:
                yaml.safe_dump(overrides, f, sort_keys=True)
            logger.info(f"User config saved to {self.config_file}")
            return True
        except (OSError, ConfigError) as e:
            logger.error(f"Failed to save user config: {e}")
            return False

    def resolve(self, path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """defaults <- user file <- run file <- CLI overrides"""
        data = deep_merge(default_config(), self.load_user_defaults())
        if path is not None:
            data = deep_merge(data, load_config_file(path))
        if overrides:
            data = deep_merge(data, overrides)
        config = RunConfig.from_dict(data)
        logger.info(f"Config resolved | scenario={config.scenario_type}, hash={config.hash}")
        return config

    def save_run_config(self, config: RunConfig, out_dir: Path) -> Path:
        """Write the resolved config next to the artifacts"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        target = out_dir / "run-config.yaml"
        data = config.to_dict()
        data["config_hash"] = config.hash
        with open(target, "w") as f:
            yaml.safe_dump(data, f, sort_keys=True)
        logger.info(f"Run config written to {target}")
        return target

    def get_config_info(self) -> Dict[str, Any]:
        return {
            "config_dir": str(self.config_dir),
            "config_file": str(self.config_file),
            "config_exists": self.config_file.exists(),
            "backup_exists": self.backup_file.exists(),
            "version": CONFIG_VERSION,
        }


# Global config manager instance
config_manager = ConfigManager()
