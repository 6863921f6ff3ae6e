"""Run configuration: JSON file merged with command-line overrides.

Precedence, lowest to highest: built-in defaults, the JSON file given with
``--config``, explicit flags.  Everything that affects numbers lives here so
runs are self-describing; only the worker count may come from the
environment (``STADIUM_WORKERS``).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .geometry import SYMMETRY_CLASSES, RectangleGeometry, StadiumGeometry, geometry_from_dict
from .spectra import SweepConfig, default_a_values

__all__ = ["ConfigError", "RunConfig", "load_config_file", "worker_count"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    geometry: dict = field(default_factory=lambda: {"shape": "stadium", "a": 1.0, "r": 1.0})
    h: float = 1 / 64
    mode: str = "quadrant"
    classes: list = field(default_factory=lambda: ["EE"])
    k: int = 8
    tol: float = 1e-7
    seed: int = 0
    threshold: float = 0.9
    preconditioner: str = "amg"
    a_values: list = field(default_factory=lambda: list(default_a_values()))
    output: str = "runs/default"
    min_prominence: float = 0.5
    max_gap_ratio: float | None = 1.0
    curves: list = field(default_factory=lambda: [3, 4, 5])
    delta: float = 0.02
    levels: list | None = None

    # keys that do not change any computed number
    _NON_SCIENCE = ("output",)

    @classmethod
    def from_sources(cls, file_data: dict | None, overrides: dict) -> "RunConfig":
        cfg = cls()
        for source in (_flatten(file_data or {}), {k: v for k, v in overrides.items() if v is not None}):
            for key, value in source.items():
                if key == "a" or key == "r":
                    geo = dict(cfg.geometry)
                    geo.setdefault("shape", "stadium")
                    geo[key] = value
                    cfg.geometry = geo
                elif key in cls.__dataclass_fields__:
                    setattr(cfg, key, value)
                else:
                    raise ConfigError(f"unknown configuration key {key!r}")
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            self.geometry_obj()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad geometry {self.geometry!r}: {exc}") from None
        if isinstance(self.classes, str):
            self.classes = [c.strip() for c in self.classes.split(",") if c.strip()]
        if not self.classes or any(c not in SYMMETRY_CLASSES for c in self.classes):
            raise ConfigError(f"classes must be drawn from {SYMMETRY_CLASSES}, got {self.classes!r}")
        if self.mode not in ("full", "quadrant"):
            raise ConfigError(f"mode must be 'full' or 'quadrant', got {self.mode!r}")
        if not (isinstance(self.k, int) and self.k >= 1):
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if not (isinstance(self.h, (int, float)) and self.h > 0):
            raise ConfigError(f"h must be positive, got {self.h!r}")
        if not (0 < self.tol <= 1e-2):
            raise ConfigError(f"tol must lie in (0, 1e-2], got {self.tol!r}")
        if not 0.5 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0.5, 1), got {self.threshold!r}")
        if self.preconditioner not in ("jacobi", "amg"):
            raise ConfigError(f"preconditioner must be 'jacobi' or 'amg', got {self.preconditioner!r}")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.min_prominence < 0:
            raise ConfigError("min_prominence must be >= 0")
        if sorted(set(self.curves)) != list(self.curves) or min(self.curves, default=1) < 1:
            raise ConfigError(f"curves must be ascending 1-based indices, got {self.curves!r}")
        try:
            self.sweep_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def geometry_obj(self) -> StadiumGeometry | RectangleGeometry:
        return geometry_from_dict(self.geometry)

    def sweep_config(self, a_values=None) -> SweepConfig:
        r = float(self.geometry.get("r", 1.0)) if self.geometry.get("shape", "stadium") == "stadium" else 1.0
        return SweepConfig(
            a_values=tuple(a_values if a_values is not None else self.a_values),
            r=r,
            h=float(self.h),
            mode=self.mode,
            classes=tuple(self.classes),
            k=int(self.k),
            tol=float(self.tol),
            seed=int(self.seed),
            threshold=float(self.threshold),
            preconditioner=self.preconditioner,
        )

    def science_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k not in self._NON_SCIENCE}

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.science_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _flatten(d: dict) -> dict:
    """Accept both the flat layout and the nested geometry/grid/solver/sweep layout."""
    out = {}
    for key, value in d.items():
        if key == "geometry":
            out["geometry"] = dict(value)
        elif key == "grid":
            for gk, gv in value.items():
                if gk == "class":
                    out["classes"] = [gv] if isinstance(gv, str) else list(gv)
                else:
                    out[gk] = gv
        elif key in ("solver", "crossings"):
            out.update(value)
        elif key == "sweep":
            if "a" in value or "a_values" in value:
                out["a_values"] = list(value.get("a", value.get("a_values")))
            else:
                out["a_values"] = list(
                    default_a_values(value.get("start", 0.0), value.get("stop", 2.0), value.get("step", 0.02))
                )
        elif key == "class":
            out["classes"] = [value] if isinstance(value, str) else list(value)
        else:
            out[key] = value
    return out


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def worker_count(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("STADIUM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"STADIUM_WORKERS must be an integer, got {env!r}") from None
    return 1
