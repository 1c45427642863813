"""Run configuration: one JSON document, schema-checked on load.

Unknown keys are rejected everywhere so typos fail fast.  Defaults follow
the reference experiment: a 64/32/16 network with component counts 2/3/3,
classes 3, 8, 9 with 500 training samples each.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .training import TrainConfig

__all__ = ["RunConfig", "load_config", "config_hash"]

_MODELS = ("dpbn", "aec")


@dataclass
class DataConfig:
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    classes: list = field(default_factory=lambda: [3, 8, 9])
    per_class: int = 500
    dither_scale: float = 0.01
    shift_augment: float = 0.0
    cache_dir: str = ""


@dataclass
class NetworkConfig:
    dims: list = field(default_factory=lambda: [64, 32, 16])
    tca_components: list = field(default_factory=lambda: [2, 3, 3])
    tca_shared: bool = False
    tied: bool = False  # baseline only


@dataclass
class OutputConfig:
    model: str = "model.dpbn"
    log: str = "train_log.csv"


@dataclass
class RunConfig:
    model: str = "dpbn"
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    raw: dict = field(default_factory=dict, repr=False)


def _build(section_cls, obj, where, casts=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    fields = {f.name for f in section_cls.__dataclass_fields__.values()}
    fields.discard("raw")
    unknown = set(obj) - fields
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    try:
        return section_cls(**obj)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    return parse_config(doc, where=str(path))


def parse_config(doc, where="config") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: top level must be an object")
    known = {"model", "seed", "data", "network", "training", "output"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")

    cfg = RunConfig(raw=doc)
    cfg.model = doc.get("model", "dpbn")
    _check(cfg.model in _MODELS, f"{where}: model must be one of {_MODELS}")
    cfg.seed = doc.get("seed", 0)
    _check(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool),
           f"{where}: seed must be an integer")
    cfg.data = _build(DataConfig, doc.get("data", {}), f"{where}.data")
    cfg.network = _build(NetworkConfig, doc.get("network", {}),
                         f"{where}.network")
    cfg.output = _build(OutputConfig, doc.get("output", {}),
                        f"{where}.output")
    train_doc = dict(doc.get("training", {}))
    train_doc.setdefault("seed", cfg.seed)
    cfg.training = _build(TrainConfig, train_doc, f"{where}.training")

    d, n = cfg.data, cfg.network
    _check(all(isinstance(c, int) for c in d.classes) and d.classes,
           f"{where}.data.classes must be a nonempty integer list")
    _check(isinstance(d.per_class, int) and d.per_class >= 0,
           f"{where}.data.per_class must be a nonnegative integer")
    _check(d.dither_scale > 0, f"{where}.data.dither_scale must be positive")
    _check(d.shift_augment >= 0,
           f"{where}.data.shift_augment must be nonnegative")
    _check(n.dims and all(isinstance(v, int) and v > 0 for v in n.dims),
           f"{where}.network.dims must be positive integers")
    _check(all(v2 <= v1 for v1, v2 in zip(n.dims, n.dims[1:])),
           f"{where}.network.dims must be non-increasing")
    _check(len(n.tca_components) == len(n.dims)
           and all(isinstance(v, int) and v >= 1 for v in n.tca_components),
           f"{where}.network.tca_components needs one count >= 1 per layer")
    return cfg


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of the raw document, for log provenance."""
    canon = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
