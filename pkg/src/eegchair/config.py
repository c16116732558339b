"""Run configuration: ``key = value`` files with one section per module.

Example::

    [cli]
    seed = 7

    [classify]
    svm_c = 10
    knn_k = 3

Only keys that appear are passed on; everything else falls back to the
defaults of the owning module.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ValidationError
from .preprocess import PreprocessConfig
from .runtime import PipelineConfig
from .signal_io import Command, SynthSpec
from .vehicle import SafetyConfig

ENV_CONFIG = "EEGCHAIR_CONFIG"


class ConfigError(ValidationError):
    pass


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.replace(" ", "").split(",") if x)


def _ints(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def _optional_int(v: str) -> Optional[int]:
    return None if v.strip().lower() in ("none", "") else int(v)


def _gamma(v: str):
    return "auto" if v.strip().lower() == "auto" else float(v)


def _commands(v: str) -> tuple[Command, ...]:
    return tuple(Command.from_token(t) for t in v.split(",") if t.strip())


SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "cli": {"seed": int},
    "signal_io": {"trials_per_command": int, "noise_amp": float, "amplitude_jitter": float,
                  "commands": _commands},
    "preprocess": {"dc_removal": _bool, "notch_hz": _floats, "q_factor": float,
                   "artifact_limit_uv": float},
    "spectral": {"k": int},
    "wavelet": {"features": str},
    "classify": {"train_fraction": float,
                 "svm_kernel": str, "svm_c": float, "svm_gamma": _gamma, "svm_tol": float,
                 "svm_max_passes": int,
                 "knn_k": int,
                 "rf_n_trees": int, "rf_max_depth": _optional_int, "rf_min_leaf": int,
                 "mlp_hidden": _ints, "mlp_epochs": int, "mlp_learning_rate": float,
                 "mlp_batch_size": int},
    "runtime": {"window_samples": int, "hop_samples": int, "debounce_wins": int,
                "stop_immediate": _bool},
    "vehicle": {"stop_distance_m": float, "forward_speed": float, "reverse_speed": float,
                "turn_rate_deg": float, "sensor_range": float, "dt": float,
                "world_half_size": float},
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, Any]] = field(default_factory=lambda: {s: {} for s in SCHEMA})

    def get(self, section: str, key: str, default=None):
        return self.values[section].get(key, default)

    def set(self, section: str, key: str, raw: Any) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        if isinstance(raw, str):
            try:
                raw = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        self.values[section][key] = raw

    @property
    def seed(self) -> int:
        return int(self.get("cli", "seed", 0))

    # -- builders for the owning modules' parameter objects -----------------

    def synth_spec(self) -> SynthSpec:
        s = self.values["signal_io"]
        kw = {k: s[k] for k in ("trials_per_command", "noise_amp", "amplitude_jitter", "commands")
              if k in s}
        return SynthSpec(seed=self.seed, **kw)

    def preprocess(self) -> PreprocessConfig:
        return PreprocessConfig(**self.values["preprocess"])

    def k(self) -> int:
        return int(self.get("spectral", "k", 5))

    def feature_mode(self) -> str:
        return self.get("wavelet", "features", "subbands")

    def train_fraction(self) -> float:
        return float(self.get("classify", "train_fraction", 0.8))

    def classifier_params(self) -> dict[str, dict]:
        c = self.values["classify"]
        out: dict[str, dict] = {"svm": {}, "knn": {}, "rf": {}, "mlp": {}}
        mapping = {
            "svm_kernel": ("svm", "kernel"), "svm_c": ("svm", "C"), "svm_gamma": ("svm", "gamma"),
            "svm_tol": ("svm", "tol"), "svm_max_passes": ("svm", "max_passes"),
            "knn_k": ("knn", "k"),
            "rf_n_trees": ("rf", "n_trees"), "rf_max_depth": ("rf", "max_depth"),
            "rf_min_leaf": ("rf", "min_leaf"),
            "mlp_hidden": ("mlp", "hidden_sizes"), "mlp_epochs": ("mlp", "epochs"),
            "mlp_learning_rate": ("mlp", "learning_rate"), "mlp_batch_size": ("mlp", "batch_size"),
        }
        for key, (kind, name) in mapping.items():
            if key in c:
                out[kind][name] = c[key]
        return out

    def pipeline(self) -> PipelineConfig:
        kw = dict(self.values["runtime"])
        if "artifact_limit_uv" in self.values["preprocess"]:
            kw["artifact_limit_uv"] = self.values["preprocess"]["artifact_limit_uv"]
        return PipelineConfig(**kw)

    def safety(self) -> SafetyConfig:
        v = self.values["vehicle"]
        kw = {k: v[k] for k in ("stop_distance_m", "forward_speed", "reverse_speed", "turn_rate_deg")
              if k in v}
        return SafetyConfig(**kw)


def load_config(path=None) -> RunConfig:
    """Read ``path`` (or ``$EEGCHAIR_CONFIG`` when ``path`` is None)."""
    cfg = RunConfig()
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str  # keep key case so typos are reported verbatim
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        for key, raw in parser.items(section):
            cfg.set(section, key, raw)
    return cfg


def apply_overrides(cfg: RunConfig, items) -> RunConfig:
    """Apply ``section.key=value`` strings on top of ``cfg``."""
    for item in items or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        cfg.set(section, key, value.strip())
    return cfg


__all__ = ["ConfigError", "RunConfig", "load_config", "apply_overrides", "SCHEMA", "ENV_CONFIG"]
