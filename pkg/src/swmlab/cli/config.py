"""Experiment configuration: typed sections, file parsing, hashing.

Config files use a small TOML-style dialect: ``[section]`` headers,
``key = value`` lines, ``#`` comments, and values that are booleans, ints,
floats, quoted strings, or flat ``[...]`` lists of those. Every key has a
typed default below; unknown sections or keys are rejected with the line
number. The parser is deliberately minimal so error messages stay precise
and serialization round-trips exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from ..envs.facility import FacilityConfig, TraitClass
from ..envs.team import TeamConfig
from ..exceptions import ConfigError

__all__ = [
    "ExperimentConfig",
    "parse_config_text",
    "parse_config_file",
    "serialize_config",
    "config_hash",
    "apply_overrides",
    "builtin_config_path",
]

ALGOS = ("swm-ap", "ppo", "mbpo-ablation")
ENVS = ("facility", "team")


@dataclass
class RunCfg:
    name: str = "run"
    algo: str = "swm-ap"
    env: str = "facility"
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    epochs: int = 30
    episodes_per_epoch: int = 10
    eval_episodes: int = 20
    record_timing: bool = False


@dataclass
class FacilityCfg:
    grid_side: int = 8
    n_agents: int = 8
    n_facilities: int = 5
    n_trait_classes: int = 2
    # flat (w_dist, w_cong, bias) triples, one per class
    trait_params: list[float] = field(
        default_factory=lambda: [4.0, 0.0, 1.0, 1.0, 8.0, 1.0]
    )


@dataclass
class TeamCfg:
    grid_side: int = 8
    n_agents: int = 4
    n_types: int = 4
    resource_stock: int = 10
    basic_value: float = 1.0
    advanced_value: float = 5.0
    maintenance_coeff: float = 0.05
    decision_period: int = 10
    first_decision_step: int = 5
    episode_length: int = 50


@dataclass
class SwmCfg:
    lr: float = 1e-3
    c: float = 0.01
    reward_coeff: float = 1.0
    response_coeff: float = 2.0
    # tracker updates with the belief pathway held fixed while the response
    # heads settle into per-class niches; without this the belief saturates
    # onto whichever class head starts globally better
    warmup_steps: int = 400
    hidden: int = 64
    model_layers: int = 2
    tracker_hidden: int = 32
    passes: int = 1
    batch_size: int = 8
    window: int = 256


@dataclass
class PriorCfg:
    lr: float = 1e-3
    passes: int = 1
    batch_size: int = 8
    window: int = 256


@dataclass
class PolicyCfg:
    lr: float = 2.5e-4
    hidden: int = 64
    clip_eps: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    ppo_epochs: int = 4
    minibatch: int = 64
    value_coeff: float = 0.5
    entropy_coeff: float = 0.01


@dataclass
class RolloutCfg:
    horizon: int = 3
    ratio: int = 4  # imagined steps per real step in PPO batches


@dataclass
class BuffersCfg:
    env_capacity: int = 2000
    model_capacity: int = 8000


@dataclass
class ExperimentConfig:
    run: RunCfg = field(default_factory=RunCfg)
    facility: FacilityCfg = field(default_factory=FacilityCfg)
    team: TeamCfg = field(default_factory=TeamCfg)
    swm: SwmCfg = field(default_factory=SwmCfg)
    prior: PriorCfg = field(default_factory=PriorCfg)
    policy: PolicyCfg = field(default_factory=PolicyCfg)
    rollout: RolloutCfg = field(default_factory=RolloutCfg)
    buffers: BuffersCfg = field(default_factory=BuffersCfg)

    def validate(self) -> None:
        if self.run.algo not in ALGOS:
            raise ConfigError(f"run.algo must be one of {ALGOS}, got {self.run.algo!r}")
        if self.run.env not in ENVS:
            raise ConfigError(f"run.env must be one of {ENVS}, got {self.run.env!r}")
        if self.run.epochs < 1 or self.run.episodes_per_epoch < 1:
            raise ConfigError("run.epochs and run.episodes_per_epoch must be >= 1")
        if len(self.facility.trait_params) != 3 * self.facility.n_trait_classes:
            raise ConfigError(
                "facility.trait_params needs 3 values (w_dist, w_cong, bias) per class"
            )
        if self.rollout.ratio < 0 or self.rollout.horizon < 0:
            raise ConfigError("rollout.ratio and rollout.horizon must be >= 0")
        if self.swm.c < 0 or self.swm.response_coeff < 0:
            raise ConfigError("swm.c and swm.response_coeff must be >= 0")
        if self.swm.warmup_steps < 0:
            raise ConfigError("swm.warmup_steps must be >= 0")
        self.env_config()  # runs the environment validators

    def env_config(self):
        if self.run.env == "facility":
            f = self.facility
            tp = tuple(
                TraitClass(*f.trait_params[3 * i : 3 * i + 3])
                for i in range(f.n_trait_classes)
            )
            cfg = FacilityConfig(
                grid_side=f.grid_side,
                n_agents=f.n_agents,
                n_facilities=f.n_facilities,
                n_trait_classes=f.n_trait_classes,
                trait_params=tp,
            )
        else:
            t = self.team
            cfg = TeamConfig(**asdict(t))
        cfg.validate()
        return cfg


_SECTIONS = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_scalar(text: str, line_no: int):
    t = text.strip()
    if t.startswith("[") and t.endswith("]"):
        inner = t[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(p, line_no) for p in inner.split(",")]
    if t in ("true", "false"):
        return t == "true"
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r}", line=line_no) from None


def _coerce(value, target_default, key: str, line_no: int):
    if isinstance(target_default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false", line=line_no)
        return value
    if isinstance(target_default, int) and not isinstance(target_default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects an integer", line=line_no)
        if isinstance(value, float) and value != int(value):
            raise ConfigError(f"{key} expects an integer", line=line_no)
        return int(value)
    if isinstance(target_default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number", line=line_no)
        return float(value)
    if isinstance(target_default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} expects a string", line=line_no)
        return value
    if isinstance(target_default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key} expects a list", line=line_no)
        elem = target_default[0] if target_default else 0.0
        return [_coerce(v, elem, key, line_no) for v in value]
    raise ConfigError(f"unsupported config field type for {key}", line=line_no)


def parse_config_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(
                    f"unknown section [{name}]; expected one of {sorted(_SECTIONS)}",
                    line=line_no,
                )
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=line_no)
        if section is None:
            raise ConfigError("key outside any [section]", line=line_no)
        key, _, value_text = line.partition("=")
        key = key.strip()
        sec_obj = getattr(cfg, section)
        if not hasattr(sec_obj, key):
            known = sorted(f.name for f in fields(sec_obj))
            raise ConfigError(f"unknown key {section}.{key}; known keys: {known}", line=line_no)
        value = _parse_scalar(value_text, line_no)
        setattr(sec_obj, key, _coerce(value, getattr(sec_obj, key), f"{section}.{key}", line_no))
    return cfg


def parse_config_file(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, list):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = []
    for sec in fields(ExperimentConfig):
        out.append(f"[{sec.name}]")
        sec_obj = getattr(cfg, sec.name)
        for f in fields(sec_obj):
            out.append(f"{f.name} = {_format_value(getattr(sec_obj, f.name))}")
        out.append("")
    return "\n".join(out)


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(asdict(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> None:
    """Apply ``section.key=value`` strings (CLI tail arguments)."""
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not of the form section.key=value")
        dotted, _, value_text = ov.partition("=")
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, _, key = dotted.strip().partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r} in override {ov!r}")
        sec_obj = getattr(cfg, section)
        if not hasattr(sec_obj, key):
            raise ConfigError(f"unknown key {section}.{key} in override {ov!r}")
        current = getattr(sec_obj, key)
        if isinstance(current, str):
            # bare words are fine on the command line; quotes stay optional
            text = value_text.strip()
            if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
                text = text[1:-1]
            setattr(sec_obj, key, text)
            continue
        value = _parse_scalar(value_text, 0)
        setattr(sec_obj, key, _coerce(value, current, dotted, 0))


def builtin_config_path(name: str):
    from importlib.resources import files

    p = files("swmlab.cli").joinpath(f"configs/{name}.toml")
    if not p.is_file():
        raise ConfigError(f"no built-in config named {name!r}")
    return p
