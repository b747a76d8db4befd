"""Run configuration: JSON loading, validation and the reproducibility digest.

A run file is a JSON object with optional sections ``env`` and ``ppo``
(field names match EnvConfig and PpoConfig), optional ``scenario`` and
``out_dir``, and the top-level mode flags ``optimizer`` and
``episode_indexed_returns``. Every key is validated by name; unknown or
ill-typed fields fail loudly rather than being ignored. The digest is the
sha256 of the canonical JSON form and is stamped into checkpoints so a
checkpoint can refuse to run under a different configuration.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .env import EnvConfig
from .harness import Scenario
from .ppo import PpoConfig


class ConfigError(ValueError):
    """Raised for unknown fields, wrong types or out-of-range values."""


_ENV_FIELDS = {f.name: f for f in dataclasses.fields(EnvConfig)}
_PPO_FIELDS = {f.name: f for f in dataclasses.fields(PpoConfig)
               if f.name not in ("optimizer", "episode_indexed_returns")}


@dataclass(frozen=True)
class RunConfig:
    """Everything a training or evaluation run depends on."""

    env: EnvConfig
    ppo: PpoConfig
    scenario: Optional[Scenario] = None
    out_dir: Optional[str] = None

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, ppo=dataclasses.replace(self.ppo, seed=int(seed)))

    def to_dict(self) -> dict:
        env = {name: getattr(self.env, name) for name in _ENV_FIELDS}
        env["waypoint"] = list(env["waypoint"])
        ppo = {name: getattr(self.ppo, name) for name in _PPO_FIELDS}
        return {
            "env": env,
            "ppo": ppo,
            "optimizer": self.ppo.optimizer,
            "episode_indexed_returns": self.ppo.episode_indexed_returns,
            "scenario": None if self.scenario is None else self.scenario.to_dict(),
            "out_dir": self.out_dir,
        }

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _check_number(section: str, key: str, value, want_int: bool):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
    if want_int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _parse_section(section_name: str, raw: dict, fields: dict, extra: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"'{section_name}' must be an object")
    unknown = set(raw) - set(fields)
    if unknown:
        raise ConfigError(f"unknown field '{section_name}.{sorted(unknown)[0]}'")
    out = dict(extra)
    for key, value in raw.items():
        if key == "waypoint":
            if (not isinstance(value, (list, tuple)) or len(value) != 2
                    or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)):
                raise ConfigError(f"env.waypoint must be a pair of numbers, got {value!r}")
            out[key] = (float(value[0]), float(value[1]))
        else:
            want_int = fields[key].type in (int, "int")
            out[key] = _check_number(section_name, key, value, want_int)
    return out


def parse_run_config(raw: dict) -> RunConfig:
    """Build a validated RunConfig from a decoded JSON object."""
    if not isinstance(raw, dict):
        raise ConfigError("run configuration must be a JSON object")
    allowed = {"env", "ppo", "scenario", "out_dir", "optimizer", "episode_indexed_returns"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown field '{sorted(unknown)[0]}'")

    env_kwargs = _parse_section("env", raw.get("env", {}), _ENV_FIELDS, {})
    mode = {}
    if "optimizer" in raw:
        if not isinstance(raw["optimizer"], str):
            raise ConfigError(f"optimizer must be a string, got {raw['optimizer']!r}")
        mode["optimizer"] = raw["optimizer"]
    if "episode_indexed_returns" in raw:
        if not isinstance(raw["episode_indexed_returns"], bool):
            raise ConfigError("episode_indexed_returns must be true or false, "
                              f"got {raw['episode_indexed_returns']!r}")
        mode["episode_indexed_returns"] = raw["episode_indexed_returns"]
    ppo_kwargs = _parse_section("ppo", raw.get("ppo", {}), _PPO_FIELDS, mode)

    out_dir = raw.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError(f"out_dir must be a string path, got {out_dir!r}")
    scenario = None
    if raw.get("scenario") is not None:
        try:
            scenario = Scenario.from_dict(raw["scenario"])
        except ValueError as exc:
            raise ConfigError(f"scenario: {exc}") from exc
    try:
        env_cfg = EnvConfig(**env_kwargs)
        ppo_cfg = PpoConfig(**ppo_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(env=env_cfg, ppo=ppo_cfg, scenario=scenario, out_dir=out_dir)


def load_run_config(path) -> RunConfig:
    """Load and validate a JSON run file; missing files raise FileNotFoundError."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_run_config(raw)


def load_scenario(path) -> Scenario:
    """Load a standalone scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"scenario file not found: {path}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    try:
        return Scenario.from_dict(raw)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc
