"""Experiment configuration files.

Configs are JSON objects validated against a strict schema: unknown keys
are rejected at every level (fail closed) and every violation is reported
with its dotted key path.  Missing impairment blocks mean the impairment
is disabled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .rf_frontend import (
    ImpairmentConfig,
    IqiParams,
    NonlinearityParams,
    PhaseNoiseParams,
    mismatch_from_irr,
)
from .signal_model import ChannelPlan, OccupancyMap, ScenarioConfig

__all__ = [
    "ConfigError",
    "SweepSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "DEFAULT_TARGET_PFA_GRID",
    "DEFAULT_BETA_FRACTIONS",
    "DEFAULT_IRR_DB_VALUES",
]

# Documented default grids for the report commands.
DEFAULT_TARGET_PFA_GRID = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4,
                           0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
DEFAULT_BETA_FRACTIONS = (0.0, 1e-4, 1e-3, 5e-3)  # of the sample rate
DEFAULT_IRR_DB_VALUES = (math.inf, 30.0, 25.0, 20.0)
DEFAULT_N_AVG = 256


class ConfigError(ValueError):
    """A configuration file violates the schema; message carries the key path."""


def _check_keys(obj, path, required=(), optional=()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    missing = set(required) - obj.keys()
    if missing:
        raise ConfigError(f"{path}: missing required key(s): {', '.join(sorted(missing))}")
    unknown = obj.keys() - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s): {', '.join(sorted(unknown))}")


def _number(obj, path, key, default=None, allow_inf=False):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    if math.isnan(value) or (not allow_inf and math.isinf(value)):
        raise ConfigError(f"{path}.{key}: must be finite, got {value!r}")
    return float(value)


def _integer(obj, path, key, default=None, minimum=None):
    if key not in obj:
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {value}")
    return value


def _number_list(obj, path, key, default=None, allow_inf=False):
    if key not in obj:
        return default
    values = obj[key]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}.{key}: expected a non-empty array of numbers")
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}.{key}[{i}]: expected a number, got {v!r}")
        if math.isnan(v) or (not allow_inf and math.isinf(v)):
            raise ConfigError(f"{path}.{key}[{i}]: must be finite, got {v!r}")
        out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated contents of one experiment config file."""

    scenario: ScenarioConfig
    impairments: ImpairmentConfig
    seed: int
    n_trials: int = None
    channel_under_test: int = None
    target_pfa_grid: tuple = DEFAULT_TARGET_PFA_GRID
    sweep: SweepSpec = None
    target_pfa: float = None
    n_avg: int = DEFAULT_N_AVG

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def require(self, *fields) -> "ExperimentConfig":
        """Raise ConfigError naming any of the given keys that are unset."""
        missing = [f for f in fields if getattr(self, f) is None]
        if missing:
            raise ConfigError(
                f"this command requires config key(s): {', '.join(missing)}"
            )
        return self


def _parse_plan(data) -> ChannelPlan:
    _check_keys(data, "plan", required=("num_channels", "dft_size"),
                optional=("sample_rate",))
    try:
        return ChannelPlan(
            num_channels=_integer(data, "plan", "num_channels"),
            dft_size=_integer(data, "plan", "dft_size"),
            sample_rate=_number(data, "plan", "sample_rate", default=1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"plan: {exc}") from None


def _parse_occupied(data, plan) -> OccupancyMap:
    values = data["occupied"]
    if not isinstance(values, list):
        raise ConfigError("occupied: expected an array of channel indices")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"occupied[{i}]: expected an integer channel index, got {v!r}")
    occ = OccupancyMap(values)
    try:
        occ.validate_against(plan)
    except ValueError as exc:
        raise ConfigError(f"occupied: {exc}") from None
    return occ


def _parse_impairments(data) -> ImpairmentConfig:
    if data is None:
        return ImpairmentConfig.ideal()
    _check_keys(data, "impairments",
                optional=("nonlinearity", "phase_noise", "iqi"))
    cfg = ImpairmentConfig.ideal()
    try:
        if "nonlinearity" in data:
            nl = data["nonlinearity"]
            _check_keys(nl, "impairments.nonlinearity", optional=("a1", "iip3"))
            iip3 = nl.get("iip3")
            if iip3 is None:
                iip3 = math.inf
            elif isinstance(iip3, bool) or not isinstance(iip3, (int, float)):
                raise ConfigError(
                    f"impairments.nonlinearity.iip3: expected a number or null, got {iip3!r}")
            cfg = replace(cfg, nonlinearity=NonlinearityParams(
                a1=_number(nl, "impairments.nonlinearity", "a1", default=1.0),
                iip3=float(iip3)))
        if "phase_noise" in data:
            pn = data["phase_noise"]
            _check_keys(pn, "impairments.phase_noise", optional=("beta",))
            cfg = replace(cfg, phase_noise=PhaseNoiseParams(
                beta=_number(pn, "impairments.phase_noise", "beta", default=0.0)))
        if "iqi" in data:
            iqi = data["iqi"]
            _check_keys(iqi, "impairments.iqi", optional=("g", "phi", "irr_db"))
            if "irr_db" in iqi:
                if "g" in iqi or "phi" in iqi:
                    raise ConfigError(
                        "impairments.iqi: give either irr_db or (g, phi), not both")
                cfg = replace(cfg, iqi=mismatch_from_irr(
                    _number(iqi, "impairments.iqi", "irr_db", allow_inf=True)))
            else:
                cfg = replace(cfg, iqi=IqiParams(
                    g=_number(iqi, "impairments.iqi", "g", default=1.0),
                    phi=_number(iqi, "impairments.iqi", "phi", default=0.0)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"impairments: {exc}") from None
    return cfg


def _parse_sweep(data, plan) -> SweepSpec:
    if data is None:
        return None
    _check_keys(data, "sweep", required=("parameter",), optional=("values",))
    parameter = data["parameter"]
    if parameter not in ("beta", "irr_db"):
        raise ConfigError(
            f"sweep.parameter: expected 'beta' or 'irr_db', got {parameter!r}")
    if parameter == "beta":
        default = tuple(f * plan.sample_rate for f in DEFAULT_BETA_FRACTIONS)
        values = _number_list(data, "sweep", "values", default=default)
    else:
        values = _number_list(data, "sweep", "values",
                              default=DEFAULT_IRR_DB_VALUES, allow_inf=True)
    return SweepSpec(parameter=parameter, values=values)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a parsed JSON object and build the typed config."""
    _check_keys(
        data, "config",
        required=("plan", "occupied", "snr_db", "noise_psd", "seed"),
        optional=("impairments", "n_trials", "channel_under_test",
                  "target_pfa_grid", "sweep", "target_pfa", "n_avg"),
    )
    plan = _parse_plan(data["plan"])
    occupancy = _parse_occupied(data, plan)
    try:
        scenario = ScenarioConfig(
            plan=plan,
            occupancy=occupancy,
            snr_db=_number(data, "config", "snr_db"),
            noise_psd=_number(data, "config", "noise_psd"),
        )
    except ValueError as exc:
        raise ConfigError(f"config: {exc}") from None

    channel = _integer(data, "config", "channel_under_test")
    if channel is not None and channel not in plan.channels:
        raise ConfigError(f"channel_under_test: channel {channel} is not in the plan")

    target_pfa = _number(data, "config", "target_pfa")
    if target_pfa is not None and not (0.0 < target_pfa < 1.0):
        raise ConfigError(f"target_pfa: must be in (0, 1), got {target_pfa}")
    grid = _number_list(data, "config", "target_pfa_grid",
                        default=DEFAULT_TARGET_PFA_GRID)
    for p in grid:
        if not (0.0 < p < 1.0):
            raise ConfigError(f"target_pfa_grid: entries must be in (0, 1), got {p}")

    return ExperimentConfig(
        scenario=scenario,
        impairments=_parse_impairments(data.get("impairments")),
        seed=_integer(data, "config", "seed", minimum=0),
        n_trials=_integer(data, "config", "n_trials", minimum=1),
        channel_under_test=channel,
        target_pfa_grid=grid,
        sweep=_parse_sweep(data.get("sweep"), plan),
        target_pfa=target_pfa,
        n_avg=_integer(data, "config", "n_avg", default=DEFAULT_N_AVG, minimum=1),
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    return parse_config(data)
