"""
Configuration helper functions: file, environment and flag layers
"""
import copy
import os
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from models.schemas import RunConfig

from .errors import ConfigError

logger = logging.getLogger(__name__)

ENV_PREFIX = "HAR_TEMPLATES_"
DEFAULT_CONFIG_PATH = "config.yaml"


def load_config(file_path: Optional[Union[str, Path]] = DEFAULT_CONFIG_PATH) -> Dict[str, Any]:
    """
    Load the YAML configuration file.

    A missing default file yields an empty configuration; a missing file that
    was asked for explicitly is an error.
    """
    if file_path is None:
        return {}
    path = Path(file_path)
    if not path.exists():
        if str(file_path) == DEFAULT_CONFIG_PATH:
            logger.info("No config.yaml found, using defaults")
            return {}
        raise ConfigError(f"config file not found: {file_path}")
    with open(path, "r") as f:
        try:
            config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {file_path}: {e}") from e
    if not isinstance(config, dict):
        raise ConfigError(f"{file_path} must contain a mapping of sections")
    logger.info(f"Loaded configuration from {file_path}")
    return config


def set_dotted(config: Dict[str, Any], dotted_key: str, value: Any):
    """Set `section.key` inside a nested dictionary"""
    section, _, key = dotted_key.partition(".")
    if not key:
        config[section] = value
        return
    config.setdefault(section, {})
    if not isinstance(config[section], dict):
        raise ConfigError(f"config section {section!r} is not a mapping")
    config[section][key] = value


def apply_env_overrides(
    config: Dict[str, Any], environ: Optional[Mapping[str, str]] = None
) -> Dict[str, Any]:
    """
    Override config values from environment variables.

    HAR_TEMPLATES_PIPELINE__CUT=0.5 sets pipeline.cut; values are parsed as
    YAML scalars so numbers and booleans keep their type.
    """
    environ = os.environ if environ is None else environ
    result = copy.deepcopy(config)
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = name[len(ENV_PREFIX):].lower().replace("__", ".")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        set_dotted(result, dotted, value)
        logger.info(f"Environment override: {dotted} = {value!r}")
    return result


def apply_overrides(config: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Apply `section.key` overrides (command-line flags)"""
    result = copy.deepcopy(config)
    for dotted, value in overrides.items():
        set_dotted(result, dotted, value)
    return result


def validate_config(config: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(dict(config))
    except ValidationError as e:
        raise ConfigError(f"invalid configuration:\n{e}") from e


def resolve_config(
    file_path: Optional[Union[str, Path]] = DEFAULT_CONFIG_PATH,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Effective configuration.

    Priority order:
    1. Command-line flags (`overrides`)
    2. Environment variables (after loading .env)
    3. Config file settings
    4. Default values
    """
    if environ is None:
        load_dotenv()
    config = load_config(file_path)
    config = apply_env_overrides(config, environ)
    config = apply_overrides(config, overrides or {})
    return validate_config(config)


def flatten_config(config: RunConfig) -> List[str]:
    """Sorted `section.key = value` lines for artifact headers"""
    lines = []
    for section, values in config.model_dump().items():
        for key, value in values.items():
            lines.append(f"{section}.{key} = {value}")
    return sorted(lines)


def save_config_to_file(config: RunConfig, file_path: Union[str, Path] = DEFAULT_CONFIG_PATH):
    """
    Save configuration to a YAML file.

    Args:
        config: Effective configuration
        file_path: Path to the YAML file
    """
    with open(file_path, "w") as f:
        yaml.safe_dump(config.model_dump(), f, default_flow_style=False, sort_keys=False)
    logger.info(f"Configuration saved to {file_path}")
