"""INI configuration for the command-line tools.

Two shapes are understood. A simulation config drives ``simulate``,
``oracle-check`` and ``reproduce``:

    [trial]
    n_per_arm = 1000
    horizon = 6
    seed = 20260818
    crossover = false

    [models]
    adherence = 1

    [coefficients]          ; optional overrides
    a = 0.6, 0.2, -0.5, 0.2

An estimation config drives ``estimate``:

    [estimand]
    z_a = 1
    z_y = 0
    variant = w_y
    simplified = false
    crossover = false

    [models]                ; optional respecification
    outcome = saturated: a, l_a, l_y, z

    [bootstrap]             ; optional
    replicates = 200
    level = 0.95
    seed = 7
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .errors import ConfigError
from .models import ModelSpec, default_specs
from .simulate import ScenarioConfig, StructuralEquations

_COEF_LENGTHS = {"l_a": 3, "l_y": 3, "a": 4, "y": 4, "crossover": 3}


def _read_ini(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return parser


def _get_int(section, key, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(section[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got "
                          f"{section[key]!r}") from exc


def _get_float(section, key, default):
    if key not in section:
        return default
    try:
        return float(section[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got "
                          f"{section[key]!r}") from exc


def _get_bool(section, key, default=False):
    if key not in section:
        return default
    raw = section[key].strip().lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {section[key]!r}")


def _parse_coefficients(section):
    out = {}
    for key in section:
        if key not in _COEF_LENGTHS:
            raise ConfigError(
                f"unknown coefficient row {key!r}; expected one of "
                f"{sorted(_COEF_LENGTHS)}")
        parts = [p.strip() for p in section[key].split(",")]
        if len(parts) != _COEF_LENGTHS[key]:
            raise ConfigError(
                f"coefficient row {key!r} needs {_COEF_LENGTHS[key]} "
                f"values, got {len(parts)}")
        try:
            out[key] = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(
                f"coefficient row {key!r} has a non-numeric entry") from exc
    return out


def load_scenario(path, seed_override=None):
    """Parse a simulation config into a ScenarioConfig."""
    parser = _read_ini(path)
    if "trial" not in parser:
        raise ConfigError(f"config {path} has no [trial] section")
    trial = parser["trial"]
    adherence_model = 1
    if "models" in parser:
        adherence_model = _get_int(parser["models"], "adherence", 1)
    coef = {}
    if "coefficients" in parser:
        coef = _parse_coefficients(parser["coefficients"])
    crossover = _get_bool(trial, "crossover", False)
    seed = _get_int(trial, "seed", 0) if seed_override is None \
        else int(seed_override)

    equations = None
    if coef:
        base = StructuralEquations.adherence_model(adherence_model)
        fields = {"l_a": base.l_a, "l_y": base.l_y, "a": base.a,
                  "y": base.y, "crossover": base.crossover}
        fields.update(coef)
        equations = StructuralEquations(**fields).validate()

    return ScenarioConfig(
        n_per_arm=_get_int(trial, "n_per_arm"),
        horizon=_get_int(trial, "horizon"),
        seed=seed,
        adherence_model=adherence_model,
        equations=equations,
        crossover=crossover,
        referent_za=_get_int(trial, "referent_za", 1),
        referent_zy=_get_int(trial, "referent_zy", 0),
        label=trial.get("label", ""))


def parse_model_spec(text):
    """Parse ``family: feature, feature, ...`` into a ModelSpec (the
    target comes from the key it is assigned to)."""
    if ":" not in text:
        raise ConfigError(
            f"model spec {text!r} must look like 'family: features'")
    family, _, feats = text.partition(":")
    features = tuple(p.strip() for p in feats.split(",") if p.strip())
    return family.strip(), features


@dataclass(frozen=True)
class EstimationConfig:
    z_a: int
    z_y: int
    variant: str
    simplified: bool
    crossover: bool
    specs: dict
    replicates: int
    level: float
    boot_seed: int


def load_estimation(path, seed_override=None):
    """Parse an estimation config."""
    parser = _read_ini(path)
    if "estimand" not in parser:
        raise ConfigError(f"config {path} has no [estimand] section")
    est = parser["estimand"]
    z_a = _get_int(est, "z_a", 1)
    z_y = _get_int(est, "z_y", 0)
    for name, v in (("z_a", z_a), ("z_y", z_y)):
        if v not in (0, 1):
            raise ConfigError(f"{name} must be 0 or 1, got {v}")
    variant = est.get("variant", "w_y").strip()
    if variant not in ("w_y", "w_a"):
        raise ConfigError(f"variant must be w_y or w_a, got {variant!r}")

    specs = default_specs()
    if "models" in parser:
        for key in parser["models"]:
            if key not in specs:
                raise ConfigError(
                    f"unknown model name {key!r}; expected one of "
                    f"{sorted(specs)}")
            family, features = parse_model_spec(parser["models"][key])
            specs[key] = ModelSpec(specs[key].target, features, family)

    replicates = 0
    level = 0.95
    boot_seed = 0
    if "bootstrap" in parser:
        boot = parser["bootstrap"]
        replicates = _get_int(boot, "replicates", 0)
        level = _get_float(boot, "level", 0.95)
        boot_seed = _get_int(boot, "seed", 0)
    if seed_override is not None:
        boot_seed = int(seed_override)

    return EstimationConfig(
        z_a=z_a, z_y=z_y, variant=variant,
        simplified=_get_bool(est, "simplified", False),
        crossover=_get_bool(est, "crossover", False),
        specs=specs, replicates=replicates, level=level,
        boot_seed=boot_seed)
