"""``key = value`` experiment configuration with declared defaults."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

from .search import Stage


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # enumeration and pruning
    op_budget: int = 4
    registry: tuple = ()
    max_programs: int = 0
    fake_steps: int = 40
    fake_seeds: tuple = (0, 1)
    tolerance: float = 1e-6
    triviality: bool = True
    # search
    stages: tuple = (Stage("gridroom", 5, 2500, 16),)
    benchmark_size: int = 16
    epsilon: float = 0.1
    knn_k: int = 10
    seed: int = 0
    early_stopping: bool = True
    stage1_budget: int = 0
    round_size: int = 1
    floor_score: float = 0.0
    combiner: str = "combiner_discovered"
    # eval / baselines
    trials: int = 5
    lifetime: int = 0
    # export
    env_a: str = "gridroom"
    env_b: str = "pointmaze"
    export_env: str = "gridroom"
    efficiency_seeds: int = 20
    top_fraction: float = 0.01
    trace: bool = False


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def parse_stages(text: str) -> tuple:
    """``env:trials:lifetime:promote`` entries separated by commas."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 4:
            raise ConfigError(f"stage {part!r} should be env:trials:lifetime:promote")
        env, trials, lifetime, promote = bits
        try:
            out.append(Stage(env, int(trials), int(lifetime), int(promote)))
        except ValueError:
            raise ConfigError(f"stage {part!r} has non-integer fields") from None
    if not out:
        raise ConfigError("at least one stage is required")
    return tuple(out)


def _convert(name: str, default, raw: str):
    raw = raw.strip()
    try:
        if name == "stages":
            return parse_stages(raw)
        if name == "registry":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if name == "fake_seeds":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if isinstance(default, bool):
            return _parse_bool(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"bad value for {name}: {e}") from None
    return raw


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    known = {f.name: f for f in fields(ExperimentConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _convert(key, getattr(cfg, key), value))
    return cfg


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def render_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "stages":
            v = ", ".join(f"{s.env_id}:{s.trials}:{s.lifetime}:{s.promote}" for s in v)
        elif isinstance(v, tuple):
            v = ",".join(map(str, v))
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
