"""Run configuration: defaults, INI files, named profiles, CLI overrides.

Precedence, lowest to highest: built-in defaults, named profile, config
file, ``--set section.key=value`` overrides. Every key is declared in the
schema below with its type; unknown sections or keys are rejected rather
than ignored, so a typo cannot silently fall back to a default.

The ``paper-defaults`` profile uses the published operating point
(tau0 = 0.96, eta = 0.03). That threshold is only reachable when comparing
the raw score, so the profile also switches threshold_mode to raw_score.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import Optional

from .detector import DetectorConfig
from .errors import ConfigError
from .events import BuilderConfig
from .memory import MemoryBank
from .pacing import PacingConfig


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# (type converter, default). None default means "unset" for optional keys.
SCHEMA: dict[str, dict[str, tuple]] = {
    "detector": {
        "w_sem": (float, 1.0),
        "w_mot": (float, 0.5),
        "w_pred": (float, 0.5),
        "rho": (float, 0.1),
        "tau0": (float, 0.77),
        "eta": (float, 0.0),
        "norm_window": (int, 64),
        "var_window": (int, 64),
        "threshold_mode": (str, "probability"),
        "max_segment_frames": (int, 4096),
    },
    "builder": {
        "mode": (str, "weighted"),
        "sigma_sharp": (float, None),
    },
    "memory": {
        "lambda": (float, 0.3),
        "gamma_mem": (float, 0.95),
        "max_slots": (int, None),
        "retrieve_k": (int, 4),
    },
    "pacing": {
        "delta_min": (float, 2.0),
        "delta_max": (float, 30.0),
    },
    "predictor": {
        "model_path": (str, None),
        "hidden": (int, None),
        "activation": (str, "tanh"),
    },
    "run": {
        "seed": (int, 0),
        "timing": (_bool, False),
    },
}

PROFILES: dict[str, dict[tuple[str, str], object]] = {
    "default": {},
    "paper-defaults": {
        ("detector", "tau0"): 0.96,
        ("detector", "eta"): 0.03,
        ("detector", "threshold_mode"): "raw_score",
    },
}


@dataclass
class RunConfig:
    detector: DetectorConfig
    builder: BuilderConfig
    memory_lambda: float
    memory_gamma: float
    memory_max_slots: Optional[int]
    retrieve_k: int
    pacing: PacingConfig
    predictor_path: Optional[str]
    predictor_hidden: Optional[int]
    predictor_activation: str
    seed: int
    timing: bool

    def make_bank(self) -> MemoryBank:
        return MemoryBank(
            lam=self.memory_lambda,
            gamma_mem=self.memory_gamma,
            max_slots=self.memory_max_slots,
        )


def _assemble(values: dict[tuple[str, str], object]) -> RunConfig:
    def get(section: str, key: str):
        return values[(section, key)]

    detector = DetectorConfig(
        w_sem=get("detector", "w_sem"),
        w_mot=get("detector", "w_mot"),
        w_pred=get("detector", "w_pred"),
        rho=get("detector", "rho"),
        tau0=get("detector", "tau0"),
        eta=get("detector", "eta"),
        norm_window=get("detector", "norm_window"),
        var_window=get("detector", "var_window"),
        threshold_mode=get("detector", "threshold_mode"),
        max_segment_frames=get("detector", "max_segment_frames"),
    )
    detector.validate()
    builder = BuilderConfig(
        mode=get("builder", "mode"), sigma_sharp=get("builder", "sigma_sharp")
    )
    builder.validate()
    pacing = PacingConfig(
        delta_min=get("pacing", "delta_min"),
        delta_max=get("pacing", "delta_max"),
        retrieve_k=get("memory", "retrieve_k"),
    )
    pacing.validate()
    lam, gamma = get("memory", "lambda"), get("memory", "gamma_mem")
    max_slots = get("memory", "max_slots")
    MemoryBank(lam=lam, gamma_mem=gamma, max_slots=max_slots)  # validates
    return RunConfig(
        detector=detector,
        builder=builder,
        memory_lambda=lam,
        memory_gamma=gamma,
        memory_max_slots=max_slots,
        retrieve_k=get("memory", "retrieve_k"),
        pacing=pacing,
        predictor_path=get("predictor", "model_path"),
        predictor_hidden=get("predictor", "hidden"),
        predictor_activation=get("predictor", "activation"),
        seed=get("run", "seed"),
        timing=get("run", "timing"),
    )


def _convert(section: str, key: str, raw: str):
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"unknown config key [{section}] {key}")
    conv, default = SCHEMA[section][key]
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        if default is not None:
            raise ConfigError(f"[{section}] {key} cannot be empty")
        return None
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc


def load_config(
    path: Optional[str] = None,
    profile: Optional[str] = None,
    overrides: Optional[list[str]] = None,
) -> RunConfig:
    """Build a RunConfig from defaults, then profile, file, and overrides."""
    values: dict[tuple[str, str], object] = {
        (section, key): default
        for section, keys in SCHEMA.items()
        for key, (_conv, default) in keys.items()
    }
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(
                f"unknown profile {profile!r}; available: {sorted(PROFILES)}"
            )
        values.update(PROFILES[profile])
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                values[(section, key)] = _convert(section, key, raw)
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override must look like section.key=value, got {item!r}"
            )
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        values[(section.strip(), key.strip())] = _convert(
            section.strip(), key.strip(), raw
        )
    return _assemble(values)
