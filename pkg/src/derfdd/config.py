"""Run configuration read from an INI file.

Every section is optional; missing keys keep their defaults.  Example::

    [run]
    seed = 0
    out = runs/demo

    [scenario]
    train_schedule = table1-train
    test_schedule = table1-test
    sample_period = 50e-6

    [lstm]
    max_epochs = 10
"""
import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .circuit import CircuitParams
from .control import ControllerGains
from .errors import ConfigurationError
from .ml.adam import TrainConfig, lstm_config, mlp_config


@dataclass(frozen=True)
class ScenarioConfig:
    train_schedule: str = "table1-train"
    test_schedule: str = "table1-test"
    sample_period: float = 50e-6
    duration: float = -1.0          # negative: the schedule's own duration
    warmup: float = 0.1
    noise_std: float = 0.0
    switched: bool = False


@dataclass(frozen=True)
class DatasetConfig:
    lookback: int = 20
    stride: int = 1
    train_fraction: float = 0.70
    chronological: bool = False
    kfold: int = 10


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs plus the training subsample stride."""

    hidden: tuple = ()
    train_stride: int = 1


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    window: int = 20
    max_exemplars: int = 50_000


@dataclass(frozen=True)
class FtcConfig:
    drive: str = "conventional"
    confirm: int = 3
    ftc_warmup: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    circuit: CircuitParams = field(default_factory=CircuitParams)
    controller: ControllerGains = field(default_factory=ControllerGains)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    lstm_train: TrainConfig = field(default_factory=lstm_config)
    mlp_train: TrainConfig = field(default_factory=mlp_config)
    lstm_model: ModelConfig = field(default_factory=lambda: ModelConfig((32, 64)))
    mlp_model: ModelConfig = field(default_factory=lambda: ModelConfig((64, 128)))
    knn: KnnConfig = field(default_factory=KnnConfig)
    ftc: FtcConfig = field(default_factory=FtcConfig)
    seed: int = 0
    out: str = "runs/default"

    def __post_init__(self):
        if self.dataset.lookback < 1 or self.dataset.stride < 1:
            raise ConfigurationError("lookback and stride must be >= 1")
        if not 0 < self.dataset.train_fraction < 1:
            raise ConfigurationError("train_fraction must be in (0, 1)")
        if self.knn.k < 1 or self.knn.window < 1:
            raise ConfigurationError("knn k and window must be >= 1")
        if self.knn.window > self.dataset.lookback + 1:
            raise ConfigurationError("knn window cannot exceed lookback + 1")
        if self.ftc.drive not in ("emitted", "conventional"):
            raise ConfigurationError(f"ftc drive must be emitted or conventional, got {self.ftc.drive}")
        if self.ftc.confirm < 1:
            raise ConfigurationError("ftc confirm must be >= 1")
        if not self.scenario.sample_period > 0:
            raise ConfigurationError("sample_period must be > 0")
        for m in (self.lstm_model, self.mlp_model):
            if m.train_stride < 1 or not m.hidden or min(m.hidden) < 1:
                raise ConfigurationError("model hidden sizes and train_stride must be >= 1")

    @property
    def out_dir(self):
        return Path(self.out)

    def with_overrides(self, seed=None, out=None):
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if out is not None:
            changes["out"] = str(out)
        return replace(self, **changes)

    def train_config(self, which):
        cfg = self.lstm_train if which == "lstm" else self.mlp_train
        return cfg.replace(seed=self.seed)


# section name -> RunConfig attribute
_SECTIONS = {
    "circuit": "circuit", "controller": "controller", "scenario": "scenario",
    "dataset": "dataset", "lstm": "lstm_train", "mlp": "mlp_train", "knn": "knn",
    "ftc": "ftc",
}
_MODEL_KEYS = {"hidden", "train_stride"}
_ALIASES = {"patience": "early_stop_patience"}


def _convert(raw, like, key):
    try:
        if isinstance(like, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            return tuple(int(v) for v in raw.replace(",", " ").split())
        return raw.strip()
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc


def _apply(obj, items, section):
    names = {f.name: getattr(obj, f.name) for f in fields(obj)}
    changes = {}
    for key, raw in items.items():
        key = _ALIASES.get(key, key)
        if key not in names:
            raise ConfigurationError(f"unknown key [{section}] {key}")
        changes[key] = _convert(raw, names[key], f"[{section}] {key}")
    return replace(obj, **changes) if changes else obj


def parse_config(text, source="<string>"):
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    cfg = RunConfig()
    changes = {}
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "run":
            for key, raw in items.items():
                if key == "seed":
                    changes["seed"] = _convert(raw, 0, "[run] seed")
                elif key == "out":
                    changes["out"] = raw.strip()
                else:
                    raise ConfigurationError(f"unknown key [run] {key}")
            continue
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown section [{section}]")
        attr = _SECTIONS[section]
        if section in ("lstm", "mlp"):
            model_items = {k: v for k, v in items.items() if k in _MODEL_KEYS}
            items = {k: v for k, v in items.items() if k not in _MODEL_KEYS}
            mattr = f"{section}_model"
            changes[mattr] = _apply(getattr(cfg, mattr), model_items, section)
        changes[attr] = _apply(getattr(cfg, attr), items, section)
    return replace(cfg, **changes)


def load_config(path=None):
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    return parse_config(path.read_text(), str(path))


def format_config(cfg):
    """INI text that :func:`parse_config` reads back to ``cfg``."""
    lines = ["[run]", f"seed = {cfg.seed}", f"out = {cfg.out}", ""]
    for section, attr in _SECTIONS.items():
        obj = getattr(cfg, attr)
        lines.append(f"[{section}]")
        for f in fields(obj):
            lines.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        if section in ("lstm", "mlp"):
            m = getattr(cfg, f"{section}_model")
            lines.append(f"hidden = {_fmt(m.hidden)}")
            lines.append(f"train_stride = {m.train_stride}")
        lines.append("")
    return "\n".join(lines)


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)
