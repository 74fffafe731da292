"""TOML configuration: resident profiles, criteria templates, strategy options, atomic output."""

from __future__ import annotations

import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ahp import PairwiseMatrix
from .domain import SEVERITY_MAX, SEVERITY_MIN, ResidentProfile
from .errors import ConfigError, HomeConflictError
from .ingest import SensorRegistry
from .resolution import Rounding, StrategyConfig

PROFILE_FIELDS = ("age", "visual_impairment", "hearing_impairment", "illness")
_ALIASES = {"vi": "visual_impairment", "hi": "hearing_impairment"}
DEFAULT_AGE_RANGE = (18, 90)


def load_toml(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", path=str(path)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}", path=str(path)) from exc


def profiles_from_dict(d: Mapping[str, Any]) -> dict[str, ResidentProfile]:
    """Explicit profile fields are used as given; missing ones are drawn uniformly.

    Sampling needs a top-level ``seed``. Residents are filled in sorted id order
    and fields in a fixed order, so the same file always yields the same profiles.
    """
    residents = d.get("residents")
    if not isinstance(residents, Mapping) or not residents:
        raise ConfigError("profiles config needs a non-empty [residents] table")
    sample_cfg = d.get("sample", {})
    age_lo, age_hi = sample_cfg.get("age", DEFAULT_AGE_RANGE)
    sev_lo, sev_hi = sample_cfg.get("severity", (SEVERITY_MIN, SEVERITY_MAX))
    rng = None
    out: dict[str, ResidentProfile] = {}
    for rid in sorted(residents):
        given = {_ALIASES.get(k, k): v for k, v in (residents[rid] or {}).items()}
        unknown = set(given) - set(PROFILE_FIELDS)
        if unknown:
            raise ConfigError(f"resident {rid}: unknown profile field(s) {sorted(unknown)}")
        values = {}
        for name in PROFILE_FIELDS:
            if name in given:
                values[name] = given[name]
                continue
            if rng is None:
                if "seed" not in d:
                    raise ConfigError(f"resident {rid} lacks {name!r}; sampling requires a 'seed' entry")
                rng = np.random.default_rng(int(d["seed"]))
            lo, hi = (age_lo, age_hi) if name == "age" else (sev_lo, sev_hi)
            values[name] = int(rng.integers(lo, hi, endpoint=True))
        out[rid] = ResidentProfile(rid, **values)
    return out


def load_profiles(path: str | Path) -> dict[str, ResidentProfile]:
    return profiles_from_dict(load_toml(path))


def load_registry(path: str | Path) -> SensorRegistry:
    return SensorRegistry.from_dict(load_toml(path))


@dataclass(frozen=True)
class AppConfig:
    """Options shared by ``rank``/``resolve``: templates, smoothing, rounding."""

    templates: Mapping[str, PairwiseMatrix] = field(default_factory=dict)
    delta: float = 1.0
    rounding: Rounding = Rounding.DIRECTIONAL
    granularity: Mapping[str, float] = field(default_factory=dict)

    def strategy_config(self, attribute: str, registry: SensorRegistry | None = None,
                        static_order: tuple[str, ...] | None = None) -> StrategyConfig:
        if attribute in self.granularity:
            g = self.granularity[attribute]
        elif registry is not None:
            g = registry.granularity(attribute)
        else:
            g = 1.0
        return StrategyConfig(self.rounding, float(g), static_order)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> AppConfig:
        try:
            templates = {name: PairwiseMatrix.from_dict(t) for name, t in d.get("templates", {}).items()}
            return cls(
                templates=templates,
                delta=float(d.get("delta", 1.0)),
                rounding=Rounding(d.get("rounding", Rounding.DIRECTIONAL.value)),
                granularity={k: float(v) for k, v in d.get("granularity", {}).items()},
            )
        except HomeConflictError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad app config: {exc}") from exc


def load_app_config(path: str | Path | None) -> AppConfig:
    return AppConfig() if path is None else AppConfig.from_dict(load_toml(path))


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory and rename on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
