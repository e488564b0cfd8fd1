"""Run configuration: layered TOML-style files plus flag overrides.

Files use sections per module with scalar key/value pairs and are read with
configparser (this interpreter ships no TOML reader, and simple TOML
key/value documents are a configparser dialect once quotes are stripped).
Unknown sections or keys are rejected. The config hash covers the semantic
fields only, never output locations, so two runs with equal hashes are
comparable.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields

from .corpus import SynthConfig
from .errors import ConfigError, OutOfRange
from .selftrain import StfConfig


@dataclass
class ExtractorConfig:
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    ffn_dim: int = 128
    max_len: int = 64
    epochs: int = 10
    lr: float = 1e-3
    batch_size: int = 16


@dataclass
class ScorerConfig:
    hidden_dim: int = 64
    num_attention_layers: int = 2
    num_heads: int = 4
    ffn_dim: int = 128
    epochs: int = 40
    lr: float = 1e-3
    batch_size: int = 32
    use_path: bool = True
    use_positions: bool = True
    use_token_types: bool = True


@dataclass
class PathsConfig:
    labeled: str = ""
    unlabeled: str = ""
    heldout: str = ""
    amr: str = ""
    flags: str = ""
    test: str = ""
    scorer_checkpoint: str = ""
    extractor_checkpoint: str = ""


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs/out"
    quiet: bool = False
    corpus: SynthConfig = field(default_factory=SynthConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    stf: StfConfig = field(default_factory=StfConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def hash(self) -> str:
        payload = {
            "seed": self.seed,
            "corpus": asdict(self.corpus),
            "extractor": asdict(self.extractor),
            "scorer": asdict(self.scorer),
            "stf": asdict(self.stf),
        }
        canonical = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


_SECTION_TYPES = {
    "run": None,  # run-level scalars handled specially
    "corpus": SynthConfig,
    "extractor": ExtractorConfig,
    "scorer": ScorerConfig,
    "stf": StfConfig,
    "paths": PathsConfig,
}

_RUN_FIELDS = {"seed": int, "out": str, "quiet": bool}


def _coerce(raw: str, target_type, key: str):
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    try:
        if target_type is bool:
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        if target_type is str:
            return text
        # optional float (e.g. certainty_threshold)
        if text.lower() in ("none", ""):
            return None
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {target_type}") from exc


def _field_types(cls) -> dict[str, type]:
    out = {}
    for f in fields(cls):
        ftype = f.type
        if ftype in ("int", int):
            out[f.name] = int
        elif ftype in ("float", float):
            out[f.name] = float
        elif ftype in ("bool", bool):
            out[f.name] = bool
        elif ftype in ("str", str):
            out[f.name] = str
        else:
            out[f.name] = object  # optional scalars
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a config file (optional) and apply dotted-key overrides like
    {"stf.seed": 3}. Unknown keys are rejected; seeds propagate from the
    run level into the corpus/stf sections unless set there explicitly."""
    raw: dict[str, dict[str, str]] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path} does not exist")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        for section in parser.sections():
            if section not in _SECTION_TYPES:
                raise ConfigError(f"unknown config section [{section}]")
            raw[section] = dict(parser.items(section))

    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            section, key = "run", dotted
        else:
            section, key = dotted.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section [{section}]")
        raw.setdefault(section, {})[key] = str(value)

    config = RunConfig()
    run_section = raw.pop("run", {})
    for key, value in run_section.items():
        if key not in _RUN_FIELDS:
            raise ConfigError(f"unknown key run.{key}")
        setattr(config, key, _coerce(value, _RUN_FIELDS[key], f"run.{key}"))

    explicit_seeds = set()
    for section, values in raw.items():
        cls = _SECTION_TYPES[section]
        types = _field_types(cls)
        kwargs = {}
        for key, value in values.items():
            if key not in types:
                raise ConfigError(f"unknown key {section}.{key}")
            kwargs[key] = _coerce(value, types[key], f"{section}.{key}")
            if key == "seed":
                explicit_seeds.add(section)
        try:
            setattr(config, section, cls(**{**asdict(getattr(config, section)), **kwargs}))
        except (TypeError, ConfigError, OutOfRange) as exc:
            raise ConfigError(f"invalid [{section}] config: {exc}") from exc

    if "corpus" not in explicit_seeds:
        config.corpus.seed = config.seed
    if "stf" not in explicit_seeds:
        config.stf.seed = config.seed
    return config


def require_paths(config: RunConfig, *names: str):
    """Validate that the named data paths are set and exist."""
    for name in names:
        value = getattr(config.paths, name)
        if not value:
            raise ConfigError(f"paths.{name} is required for this command")
        if not os.path.exists(value):
            raise ConfigError(f"paths.{name} = {value!r} does not exist")
