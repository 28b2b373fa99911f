"""Instance configuration documents for the command-line harness.

A config is a JSON object naming a distribution family and a phase
profile plus the algorithm parameters:

    {
      "distribution": {"family": "truncated-geometric", "ratio": 0.5},
      "phase_profile": {"family": "zero"},
      "N": 8, "a": 10, "T": null, "T'": 3, "eta": null,
      "convention": "extended", "mode": "project", "seed": 0
    }

T and eta may be null (or omitted) to use choose_T(a) and the default
eta.  Table-backed families reference a `x,p,phi` CSV; paths resolve
relative to the config file.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .scheduler import CONVENTIONS, EXTENDED, choose_T
from .target_model import TargetSpec, default_eta, read_table

DIST_FAMILIES = ("uniform", "truncated-geometric", "discretized-gaussian", "table")
PHASE_FAMILIES = ("zero", "linear", "quadratic", "random", "table")
MODES = ("project", "sample")


class ConfigError(ValidationError):
    """Malformed or unsatisfiable instance configuration."""


@dataclass(frozen=True)
class InstanceConfig:
    distribution: dict
    phase_profile: dict
    n_states: int
    aux_qubits: int
    phase_bits: int
    amp_bits: int | None = None
    eta: float | None = None
    convention: str = EXTENDED
    mode: str = "project"
    seed: int = 0
    max_retries: int = 16
    base_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        return {
            "distribution": dict(self.distribution),
            "phase_profile": dict(self.phase_profile),
            "N": self.n_states,
            "a": self.aux_qubits,
            "T": self.amp_bits,
            "T'": self.phase_bits,
            "eta": self.eta,
            "convention": self.convention,
            "mode": self.mode,
            "seed": self.seed,
            "max_retries": self.max_retries,
        }


def parse_config(doc: dict, base_dir: str = ".") -> InstanceConfig:
    """Build an InstanceConfig from a parsed JSON document."""
    try:
        dist = dict(doc["distribution"])
        phase = dict(doc.get("phase_profile", {"family": "zero"}))
        cfg = InstanceConfig(
            distribution=dist,
            phase_profile=phase,
            n_states=int(doc["N"]),
            aux_qubits=int(doc["a"]),
            phase_bits=int(doc["T'"]),
            amp_bits=None if doc.get("T") is None else int(doc["T"]),
            eta=None if doc.get("eta") is None else float(doc["eta"]),
            convention=doc.get("convention", EXTENDED),
            mode=doc.get("mode", "project"),
            seed=int(doc.get("seed", 0)),
            max_retries=int(doc.get("max_retries", 16)),
            base_dir=base_dir,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config document: {exc!r}") from exc
    if cfg.distribution.get("family") not in DIST_FAMILIES:
        raise ConfigError(f"unknown distribution family {cfg.distribution.get('family')!r}")
    if cfg.phase_profile.get("family") not in PHASE_FAMILIES:
        raise ConfigError(f"unknown phase profile {cfg.phase_profile.get('family')!r}")
    if cfg.convention not in CONVENTIONS:
        raise ConfigError(f"unknown convention {cfg.convention!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown measurement mode {cfg.mode!r}")
    return cfg


def load_config(path) -> InstanceConfig:
    with open(path) as fh:
        doc = json.load(fh)
    return parse_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def _resolve(cfg: InstanceConfig, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(cfg.base_dir, path)


def build_distribution(cfg: InstanceConfig) -> np.ndarray:
    n = cfg.n_states
    dist = cfg.distribution
    family = dist["family"]
    if family == "uniform":
        w = np.full(n, 1.0 / n)
    elif family == "truncated-geometric":
        ratio = float(dist.get("ratio", 0.5))
        if not 0.0 < ratio < 1.0:
            raise ConfigError(f"geometric ratio must lie in (0, 1), got {ratio}")
        w = ratio ** np.arange(n)
    elif family == "discretized-gaussian":
        mean = float(dist.get("mean", (n - 1) / 2.0))
        sigma = float(dist.get("sigma", max(n / 4.0, 1.0)))
        if sigma <= 0:
            raise ConfigError(f"gaussian sigma must be positive, got {sigma}")
        x = np.arange(n)
        w = np.exp(-((x - mean) ** 2) / (2.0 * sigma * sigma))
    else:  # table
        path = _resolve(cfg, dist["path"])
        try:
            w, _ = read_table(path, n)
        except OSError as exc:
            raise ConfigError(f"cannot read table {path!r}: {exc}") from exc
    total = float(np.sum(w))
    if total <= 0.0:
        raise ConfigError("distribution has zero total mass")
    return w / total


def build_phases(cfg: InstanceConfig) -> np.ndarray:
    n = cfg.n_states
    prof = cfg.phase_profile
    family = prof["family"]
    if family == "zero":
        return np.zeros(n)
    if family == "linear":
        slope = float(prof.get("slope", 1.0 / n))
        return (slope * np.arange(n)) % 1.0
    if family == "quadratic":
        chirp = float(prof.get("chirp", 1.0 / n**2))
        return (chirp * np.arange(n) ** 2) % 1.0
    if family == "random":
        rng = np.random.default_rng(int(prof.get("seed", cfg.seed)))
        return rng.random(n)
    path = _resolve(cfg, prof["path"])
    try:
        _, phases = read_table(path, n)
    except OSError as exc:
        raise ConfigError(f"cannot read table {path!r}: {exc}") from exc
    return phases % 1.0


def build_spec(cfg: InstanceConfig) -> TargetSpec:
    """Materialize the TargetSpec, filling eta and T defaults."""
    probs = build_distribution(cfg)
    phases = build_phases(cfg)
    eta = cfg.eta if cfg.eta is not None else default_eta(probs, cfg.n_states)
    amp_bits = cfg.amp_bits if cfg.amp_bits is not None else choose_T(cfg.aux_qubits)
    return TargetSpec(
        n_states=cfg.n_states,
        probs=probs,
        phases=phases,
        eta=eta,
        amp_bits=amp_bits,
        phase_bits=cfg.phase_bits,
        aux_qubits=cfg.aux_qubits,
    )
