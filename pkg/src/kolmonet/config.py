"""Flat ``key = value`` experiment configuration.

Grammar: one assignment per line; ``#`` starts a comment; blank lines are
ignored.  Values are numbers, comma-separated lists, or unquoted strings.
Command-line ``--key value`` pairs override file entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .builders import FAMILIES, Payoff
from .montecarlo import MeasureSpec, point_cloud, pushforward_lognormal, uniform_box
from .sde import BlackScholesModel

KEYS = {
    "seed", "d", "d_list", "epsilon", "eps_list", "p", "T", "alpha", "beta",
    "correlation", "payoff", "weights", "strike", "measure", "mode",
    "max_attempts", "eval_samples", "oracle_samples", "out",
    # extensions
    "n_start", "n_max", "replicates", "workers", "network", "oracle_seed",
    "theory_n_cap", "v",
}


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    values: dict[str, str] = field(default_factory=dict)
    lines: dict[str, str] = field(default_factory=dict)  # key -> "line N" or "--key"

    def _where(self, key: str) -> str:
        return self.lines.get(key, "default")

    def has(self, key: str) -> bool:
        return key in self.values

    def require(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"missing required key {key!r}")
        return self.values[key]

    def get_str(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def _num(self, key: str, raw: str, kind):
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{self._where(key)}: {key!r} expects a number, got {raw!r}") from None

    def get_int(self, key: str, default: int | None = None) -> int | None:
        if key not in self.values:
            return default
        return self._num(key, self.values[key], int)

    def get_float(self, key: str, default: float | None = None) -> float | None:
        if key not in self.values:
            return default
        return self._num(key, self.values[key], float)

    def get_list(self, key: str, kind=float, default=None) -> list | None:
        if key not in self.values:
            return default
        return [self._num(key, tok.strip(), kind) for tok in self.values[key].split(",") if tok.strip()]

    def override(self, pairs: dict[str, str]) -> "Config":
        for k, v in pairs.items():
            if k not in KEYS:
                raise ConfigError(f"--{k}: unknown key")
            self.values[k] = v
            self.lines[k] = f"--{k}"
        return self


def parse_config(text: str) -> Config:
    cfg = Config()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key.isidentifier():
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in cfg.values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on {cfg.lines[key]})")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        cfg.values[key] = value
        cfg.lines[key] = f"line {lineno}"
    return cfg


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# domain objects from configuration
# ---------------------------------------------------------------------------


def _vector(cfg: Config, key: str, d: int, default: float) -> np.ndarray:
    vals = cfg.get_list(key, float, default=[default])
    if len(vals) == 1:
        return np.full(d, vals[0])
    if len(vals) != d:
        raise ConfigError(f"{cfg._where(key)}: {key!r} has {len(vals)} entries, expected 1 or {d}")
    return np.array(vals)


def model_from_config(cfg: Config, d: int) -> BlackScholesModel:
    alpha = _vector(cfg, "alpha", d, 0.0)
    beta = _vector(cfg, "beta", d, 0.2)
    corr = cfg.get_str("correlation", "identity")
    try:
        if corr == "identity":
            return BlackScholesModel(alpha, beta, np.eye(d))
        if corr.startswith("constant:"):
            rho = float(corr.split(":", 1)[1])
            return BlackScholesModel.equicorrelated(d, rho, alpha, beta)
        mat = np.loadtxt(corr, ndmin=2)
        if mat.shape != (d, d):
            raise ConfigError(f"correlation matrix in {corr} has shape {mat.shape}, expected ({d}, {d})")
        return BlackScholesModel.from_correlation(mat, alpha, beta)
    except (ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg._where('correlation')}: bad correlation {corr!r}: {exc}") from None


def payoff_from_config(cfg: Config, d: int) -> Payoff:
    family = cfg.require("payoff")
    if family not in FAMILIES:
        raise ConfigError(f"{cfg._where('payoff')}: unknown payoff {family!r}; expected one of {FAMILIES}")
    w = cfg.get_str("weights", "equal")
    weights = np.full(d, 1.0 / d) if w == "equal" else _vector(cfg, "weights", d, 1.0)
    strike = cfg.get_float("strike", 0.5)
    return Payoff(family, weights, strike)


def measure_from_config(cfg: Config, d: int, model: BlackScholesModel, T: float) -> MeasureSpec:
    text = cfg.get_str("measure", "uniform:0:1")
    where = cfg._where("measure")
    if text.startswith("uniform:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{where}: expected uniform:<u>:<v>, got {text!r}")
        try:
            return uniform_box(d, float(parts[1]), float(parts[2]))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if text.startswith("points:"):
        pts = np.loadtxt(text.split(":", 1)[1], ndmin=2)
        if pts.shape[1] != d:
            raise ConfigError(f"{where}: points have dimension {pts.shape[1]}, expected {d}")
        return point_cloud(pts)
    if text == "lognormal":
        return pushforward_lognormal(model, T)
    raise ConfigError(f"{where}: unknown measure {text!r}")


def check_positive(cfg: Config, key: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"{cfg._where(key)}: {key!r} must be positive, got {value}")
