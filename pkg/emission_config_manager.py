#!/usr/bin/env python3
"""
Emission Configuration Manager

This module handles loading, overriding and saving run configuration from
JSON files. Sections may be nested ({"integrator": {"dt": 0.01}}) or given
as flat dotted keys ({"integrator.dt": 0.01}).
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import ValidationError

from emission.errors import ConfigurationError
from emission.types import RunConfig, SweepSpec, validate_run_config, validation_fields

logger = logging.getLogger(__name__)


def _expand_dotted(data: Dict[str, Any]) -> Dict[str, Any]:
    """Turn {"a.b": 1} into {"a": {"b": 1}}, merging with nested sections"""
    expanded: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            value = _expand_dotted(value)
        *sections, leaf = key.split(".")
        target = expanded
        for section in sections:
            target = target.setdefault(section, {})
            if not isinstance(target, dict):
                raise ConfigurationError(f"{key!r} conflicts with a scalar setting", [key])
        if isinstance(value, dict) and isinstance(target.get(leaf), dict):
            target[leaf].update(value)
        else:
            target[leaf] = value
    return expanded


def _read_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(
            f"{path}: line {e.lineno}, column {e.colno}: {e.msg}", [f"line {e.lineno}"]
        ) from e


class EmissionConfigManager:
    """Manages run configuration from JSON files"""

    def __init__(self, config_file: str = "config.json"):
        self.config_file = Path(config_file)
        self.config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from JSON file"""
        if not self.config_file.exists():
            logger.warning(f"Config file {self.config_file} not found, using defaults")
            self.config = self._get_default_config()
            return self.config

        data = _read_json(self.config_file)
        if not isinstance(data, dict):
            raise ConfigurationError(f"{self.config_file}: top level must be an object")
        self.config = _expand_dotted(data)
        logger.info(f"Loaded run configuration from {self.config_file}")
        return self.config

    def save_config(self, path: Optional[str] = None) -> bool:
        """Save the resolved configuration to JSON file"""
        target = Path(path) if path is not None else self.config_file
        try:
            resolved = self.get_run_config().model_dump(mode="json")
            with open(target, "w", encoding="utf-8") as f:
                json.dump(resolved, f, indent=2, ensure_ascii=False)

            logger.info(f"Saved run configuration to {target}")
            return True

        except IOError as e:
            logger.error(f"Failed to save config file {target}: {e}")
            return False

    def set_value(self, key: str, value: Any) -> None:
        """Set one dotted key, e.g. set_value("model.alpha", 0.2)"""
        self.config = _expand_dotted({**self._flatten(self.config), key: value})

    def get_run_config(self, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """Validated RunConfig with optional dotted-key overrides applied"""
        config = validate_run_config(self.config)
        if overrides:
            config = config.with_updates(overrides)
        return config

    def get_output_directory(self) -> str:
        return self.config.get("output", {}).get("directory", "results")

    @staticmethod
    def parse_assignment(text: str) -> Tuple[str, Any]:
        """'section.key=value' with the value parsed as JSON when possible"""
        if "=" not in text:
            raise ConfigurationError(f"expected key=value, got {text!r}", [text])
        key, raw = (part.strip() for part in text.split("=", 1))
        if not key:
            raise ConfigurationError(f"missing key in {text!r}", [text])
        try:
            return key, json.loads(raw)
        except json.JSONDecodeError:
            return key, raw

    @staticmethod
    def load_sweep_spec(path: str) -> SweepSpec:
        """Sweep grid from a JSON file"""
        data = _read_json(Path(path))
        try:
            return SweepSpec.model_validate(data)
        except ValidationError as e:
            fields = validation_fields(e)
            raise ConfigurationError(f"{path}: invalid sweep ({', '.join(fields)})", fields) from e

    def _flatten(self, data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
        flat = {}
        for key, value in data.items():
            name = f"{prefix}{key}"
            if isinstance(value, dict):
                flat.update(self._flatten(value, f"{name}."))
            else:
                flat[name] = value
        return flat

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration if no config file exists"""
        return RunConfig().model_dump(mode="json")
