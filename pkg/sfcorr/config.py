import os
from typing import Any, Dict, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from sfcorr.errors import ConfigError
from sfcorr.schemas import RunConfig

load_dotenv()

ENV_PREFIX = "SFCORR_"

# Environment keys that are not part of RunConfig
LOGGING_KEYS = ("log_level", "log_file", "syslog_host", "syslog_port")


def _normalize(raw: Dict[str, Optional[str]]) -> Dict[str, Any]:
    values = {}
    for key, value in raw.items():
        if value is None or value == "":
            continue
        name = key.strip()
        if name.upper().startswith(ENV_PREFIX):
            name = name[len(ENV_PREFIX):]
        name = name.lower().replace("-", "_")
        if name in RunConfig.model_fields or name in LOGGING_KEYS:
            values[name] = value
    return values


def environment_settings() -> Dict[str, Any]:
    return _normalize({k: v for k, v in os.environ.items() if k.startswith(ENV_PREFIX)})


def file_settings(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    return _normalize(dotenv_values(path))


def logging_settings(config_file: Optional[str] = None) -> Dict[str, Any]:
    merged = {**environment_settings(), **file_settings(config_file)}
    return {
        "level": merged.get("log_level", "INFO"),
        "log_file": merged.get("log_file"),
        "syslog_host": merged.get("syslog_host"),
        "syslog_port": int(merged.get("syslog_port", 514)),
    }


def resolve_config(cli_values: Dict[str, Any], config_file: Optional[str] = None) -> RunConfig:
    """CLI flags > config file > environment > defaults."""
    merged: Dict[str, Any] = {}
    merged.update(environment_settings())
    merged.update(file_settings(config_file))
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    for key in LOGGING_KEYS:
        merged.pop(key, None)
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from exc
