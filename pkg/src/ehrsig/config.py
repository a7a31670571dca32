"""Pipeline configuration: defaults, YAML loading and validation.

Precedence is command-line flags > config file > defaults. Every numeric
field is range-checked and errors name the offending field path.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml

FAMILIES = ("enet", "adanet")
REPRESENTATIONS = ("channels", "signatures")

DEFAULTS: dict = {
    "seed": 0,
    "jobs": 1,
    "paths": {"work": "work", "events": None, "demographics": None, "labels": None},
    "synth": {"p": 60, "k": 10, "n_patients": 500, "years_mean": 8.0, "beta": 2.5, "n_designated": 3,
              "seed": None},
    "ingest": {"min_events": 1000, "min_records": 10},
    "curves": {"n_histograms": 16, "neighbor_rank": 5, "min_bandwidth": 7, "max_bandwidth": 730,
               "intensity_floor": 0.05, "seed": None, "export": []},
    "sample": {"density": 1.0, "seed": None},
    "ica": {"k": 50, "tol": 1e-4, "max_iter": 1000, "seed": None},
    "train": {"families": list(FAMILIES), "representations": list(REPRESENTATIONS), "test_fraction": 0.3,
              "budget": 200, "alpha_filter": 0.2, "B_oob": 100, "folds": 10, "seed": None, "spaces": {}},
    "eval": {"B": 1000, "level": 0.95, "threshold": 0.5, "seed": None},
    "explain": {"B": 500, "tau_inert": 0.0, "top_m": 10, "n_waterfalls": 5, "seed": None},
    "diagram": {"top_m": 10, "n_signatures": 10, "cutoff": 0.05, "svg": True},
}

# field path -> (type, lower, upper, lower_open, upper_open)
_INF = math.inf
RANGES = {
    "seed": (int, 0, _INF, False, True),
    "jobs": (int, 1, _INF, False, True),
    "synth.p": (int, 1, _INF, False, True),
    "synth.k": (int, 1, _INF, False, True),
    "synth.n_patients": (int, 1, _INF, False, True),
    "synth.years_mean": (float, 0, _INF, True, True),
    "synth.beta": (float, 0, _INF, False, True),
    "synth.n_designated": (int, 0, _INF, False, True),
    "ingest.min_events": (int, 0, _INF, False, True),
    "ingest.min_records": (int, 0, _INF, False, True),
    "curves.n_histograms": (int, 1, _INF, False, True),
    "curves.neighbor_rank": (int, 1, _INF, False, True),
    "curves.min_bandwidth": (int, 1, _INF, False, True),
    "curves.max_bandwidth": (int, 1, _INF, False, True),
    "curves.intensity_floor": (float, 0, _INF, True, True),
    "sample.density": (float, 0, _INF, True, True),
    "ica.k": (int, 1, _INF, False, True),
    "ica.tol": (float, 0, _INF, True, True),
    "ica.max_iter": (int, 1, _INF, False, True),
    "train.test_fraction": (float, 0, 1, True, True),
    "train.budget": (int, 1, _INF, False, True),
    "train.alpha_filter": (float, 0, 1, True, True),
    "train.B_oob": (int, 1, _INF, False, True),
    "train.folds": (int, 2, _INF, False, True),
    "eval.B": (int, 100, _INF, False, True),
    "eval.level": (float, 0, 1, True, True),
    "eval.threshold": (float, 0, 1, True, True),
    "explain.B": (int, 10, _INF, False, True),
    "explain.tau_inert": (float, 0, _INF, False, True),
    "explain.top_m": (int, 1, _INF, False, True),
    "explain.n_waterfalls": (int, 0, _INF, False, True),
    "diagram.top_m": (int, 1, _INF, False, True),
    "diagram.n_signatures": (int, 1, _INF, False, True),
    "diagram.cutoff": (float, 0, 1, False, False),
}
SEEDED = ("synth", "curves", "sample", "ica", "train", "eval", "explain")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _merge(base: dict, over: dict, prefix: str) -> None:
    for key, value in over.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown field")
        if isinstance(base[key], dict) and key != "spaces":
            if not isinstance(value, dict):
                raise ConfigError(path, "expected a mapping")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value


def _get(cfg: dict, path: str):
    node = cfg
    for part in path.split("."):
        node = node[part]
    return node


def _set(cfg: dict, path: str, value) -> None:
    parts = path.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node[part]
    node[parts[-1]] = value


def _coerce(path: str, value, kind):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if isinstance(value, str):
        # YAML 1.1 reads '1e-4' as a string
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(path, f"expected a number, got {value!r}") from None
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value!r}")
    return float(value)


def validate(cfg: dict) -> dict:
    """Type- and range-check a merged config in place and return it."""
    for path, (kind, lo, hi, lo_open, hi_open) in RANGES.items():
        value = _coerce(path, _get(cfg, path), kind)
        if value < lo or (lo_open and value == lo) or value > hi or (hi_open and value == hi):
            lb = "(" if lo_open else "["
            ub = ")" if hi_open else "]"
            raise ConfigError(path, f"{value!r} outside {lb}{lo}, {hi}{ub}")
        _set(cfg, path, value)
    for section in SEEDED:
        s = cfg[section]["seed"]
        if s is not None and (isinstance(s, bool) or not isinstance(s, int) or s < 0):
            raise ConfigError(f"{section}.seed", f"expected a non-negative integer or null, got {s!r}")
    if cfg["synth"]["k"] > cfg["synth"]["p"]:
        raise ConfigError("synth.k", "must not exceed synth.p")
    if cfg["synth"]["n_designated"] > cfg["synth"]["k"]:
        raise ConfigError("synth.n_designated", "must not exceed synth.k")
    if cfg["curves"]["min_bandwidth"] > cfg["curves"]["max_bandwidth"]:
        raise ConfigError("curves.min_bandwidth", "must not exceed curves.max_bandwidth")
    for key, allowed in (("families", FAMILIES), ("representations", REPRESENTATIONS)):
        items = cfg["train"][key]
        if not isinstance(items, list) or not items:
            raise ConfigError(f"train.{key}", "expected a non-empty list")
        for item in items:
            if item not in allowed:
                raise ConfigError(f"train.{key}", f"{item!r} not one of {list(allowed)}")
        if len(set(items)) != len(items):
            raise ConfigError(f"train.{key}", "duplicate entries")
    spaces = cfg["train"]["spaces"]
    if not isinstance(spaces, dict):
        raise ConfigError("train.spaces", "expected a mapping")
    for fam, space in spaces.items():
        if fam not in FAMILIES:
            raise ConfigError(f"train.spaces.{fam}", "unknown family")
        if not isinstance(space, dict):
            raise ConfigError(f"train.spaces.{fam}", "expected a mapping")
        for name, spec in space.items():
            p = f"train.spaces.{fam}.{name}"
            if not isinstance(spec, list) or len(spec) != 3 or spec[2] not in ("log", "linear", "fixed"):
                raise ConfigError(p, "expected [low, high, log|linear|fixed]")
            lo, hi = _coerce(p, spec[0], float), _coerce(p, spec[1], float)
            if lo > hi or (spec[2] == "log" and lo <= 0):
                raise ConfigError(p, "invalid bounds")
            space[name] = [lo, hi, spec[2]]
    export = cfg["curves"]["export"]
    if not isinstance(export, list) or not all(isinstance(x, str) for x in export):
        raise ConfigError("curves.export", "expected a list of patient ids")
    if not isinstance(cfg["diagram"]["svg"], bool):
        raise ConfigError("diagram.svg", "expected true or false")
    for key in ("work", "events", "demographics", "labels"):
        v = cfg["paths"][key]
        if v is not None and not isinstance(v, str):
            raise ConfigError(f"paths.{key}", "expected a path string")
    if cfg["paths"]["work"] is None:
        raise ConfigError("paths.work", "required")
    return cfg


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then ``overrides``
    (dotted field paths), validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
        try:
            user = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"invalid YAML: {exc}") from None
        if user is not None:
            if not isinstance(user, dict):
                raise ConfigError("--config", "top level must be a mapping")
            _merge(cfg, user, "")
    for key, value in (overrides or {}).items():
        try:
            _get(cfg, key)
        except (KeyError, TypeError):
            raise ConfigError(key, "unknown field") from None
        _set(cfg, key, value)
    return validate(cfg)


def stage_seed(cfg: dict, section: str) -> int:
    """A section's own seed if set, else the global seed."""
    s = cfg[section].get("seed")
    return cfg["seed"] if s is None else s
