"""Run configuration: a TOML file with ``[trial]``, ``[grid]``, ``[run]`` and ``[check]`` tables.

Every key is optional (defaults below reproduce the desk-scale study) but
unknown tables or keys are rejected. See README.md for the full schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .classify import FIXED_CHANGE, FIXED_LEVEL, KINDS, QUANTILE, ClassifierSpec
from .montecarlo import GridSpec
from .trial import InvalidParamsError, TrialParams

SEED_ENV = "SPCD_SEED"
DEFAULT_SEED = 20240531


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSection:
    delta_all: float = 0.0
    delta_placebo_values: Tuple[float, ...] = (0.0, 0.5, 1.0)
    sigma_values: Tuple[float, ...] = (0.1, 1.0, 2.0, 5.0)
    n_reps: int = 2000
    classifiers: Tuple[str, ...] = (QUANTILE, "oracle")
    fixed_threshold: Optional[float] = None


@dataclass(frozen=True)
class RunSection:
    seed: int = DEFAULT_SEED
    parallelism: int = 1
    out: str = ""
    classifier: str = QUANTILE


@dataclass(frozen=True)
class CheckSection:
    se_multiplier: float = 4.0
    abs_slack: float = 0.02


@dataclass(frozen=True)
class RunConfig:
    trial: TrialParams = field(default_factory=TrialParams)
    grid: GridSection = field(default_factory=GridSection)
    run: RunSection = field(default_factory=RunSection)
    check: CheckSection = field(default_factory=CheckSection)

    def classifier_spec(self, kind: str) -> ClassifierSpec:
        if kind == QUANTILE:
            return ClassifierSpec.quantile(self.trial.responder_quantile)
        if kind in (FIXED_CHANGE, FIXED_LEVEL):
            if self.grid.fixed_threshold is None:
                raise ConfigError(f"grid.fixed_threshold: required by classifier {kind!r}")
            return ClassifierSpec(kind, c=self.grid.fixed_threshold)
        return ClassifierSpec.oracle()

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            base=self.trial,
            delta_placebo_values=self.grid.delta_placebo_values,
            sigma_values=self.grid.sigma_values,
            n_reps=self.grid.n_reps,
            master_seed=self.run.seed,
            classifiers=tuple(self.classifier_spec(k) for k in self.grid.classifiers),
            delta_all=self.grid.delta_all,
        )


_SECTIONS = {"trial": TrialParams, "grid": GridSection, "run": RunSection, "check": CheckSection}


def _coerce(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if isinstance(default, int) or key in ("n", "n_reps", "seed", "parallelism"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or key == "fixed_threshold":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list")
        if key == "classifiers":
            bad = [v for v in value if v not in KINDS]
            if bad:
                raise ConfigError(f"{where}: unknown classifier(s) {bad}; choose from {list(KINDS)}")
            return tuple(value)
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where}: expected a list of numbers")
        return tuple(float(v) for v in value)
    raise AssertionError(where)


def _section_from_dict(name: str, data: dict):
    cls = _SECTIONS[name]
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a table")
    defaults = cls()
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown key")
    kwargs = {k: _coerce(name, k, v, getattr(defaults, k)) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except InvalidParamsError as exc:
        raise ConfigError(f"{name}.{exc.keys[0]}: invalid value {data.get(exc.keys[0], getattr(defaults, exc.keys[0]))!r}") from None
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown section")
    cfg = RunConfig(**{name: _section_from_dict(name, data.get(name, {})) for name in _SECTIONS})
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    g, r, c = cfg.grid, cfg.run, cfg.check
    if g.n_reps < 1:
        raise ConfigError("grid.n_reps: must be at least 1")
    if any(s <= 0 for s in g.sigma_values):
        raise ConfigError("grid.sigma_values: every value must be positive")
    if any(k in (FIXED_CHANGE, FIXED_LEVEL) for k in g.classifiers) and g.fixed_threshold is None:
        raise ConfigError("grid.fixed_threshold: required by the fixed-threshold classifiers")
    if not 0 <= r.seed < 2**64:
        raise ConfigError("run.seed: must fit in an unsigned 64-bit integer")
    if r.parallelism < 1:
        raise ConfigError("run.parallelism: must be at least 1")
    if r.classifier not in KINDS:
        raise ConfigError(f"run.classifier: unknown classifier {r.classifier!r}")
    if r.classifier in (FIXED_CHANGE, FIXED_LEVEL) and g.fixed_threshold is None:
        raise ConfigError("grid.fixed_threshold: required by run.classifier")
    if c.se_multiplier < 0 or c.abs_slack < 0:
        raise ConfigError("check: tolerances must be non-negative")


def load_config(path: Optional[str] = None) -> RunConfig:
    if path is None:
        return config_from_dict({})
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        sec = asdict(getattr(cfg, name))
        out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items() if v is not None}
    return out


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def apply_overrides(cfg: RunConfig, seed=None, out=None, parallelism=None, reps=None, env=None) -> RunConfig:
    """Seed precedence: ``seed`` argument, then ``SPCD_SEED``, then the file."""
    env = os.environ if env is None else env
    run, grid = cfg.run, cfg.grid
    if seed is None and env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: expected an integer, got {env[SEED_ENV]!r}") from None
    if seed is not None:
        run = replace(run, seed=seed)
    if out is not None:
        run = replace(run, out=out)
    if parallelism is not None:
        run = replace(run, parallelism=parallelism)
    if reps is not None:
        grid = replace(grid, n_reps=reps)
    cfg = replace(cfg, run=run, grid=grid)
    validate(cfg)
    return cfg
