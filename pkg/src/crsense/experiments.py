"""Monte Carlo harness: seeded trial batches, ROC estimation, threshold
calibration, impairment sweeps, and stage-by-stage spectrum estimates.

Every trial draws from its own RNG substream derived from (seed, trial
index), so batches are reproducible bit-for-bit regardless of execution
order, chunking, or worker count, and sweeps sharing a seed are paired by
common random numbers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .detector import channelize, ideal_threshold
from .rf_frontend import (
    ImpairmentConfig,
    PhaseNoiseParams,
    apply_iqi,
    apply_nonlinearity,
    front_end_chain,
    lo_phase_path,
    mismatch_from_irr,
)
from .signal_model import Baseband, OccupancyMap, ScenarioConfig, add_awgn, generate_signal

__all__ = [
    "PrecisionError",
    "trial_stream",
    "TrialBatch",
    "run_trials",
    "wilson_interval",
    "RocPoint",
    "RocCurve",
    "estimate_roc",
    "pd_at_pfa",
    "calibrate_threshold",
    "sweep_impairment",
    "SpectrumStages",
    "psd_stages",
    "STAGE_NAMES",
]

WORKERS_ENV = "CRSENSE_WORKERS"

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


class PrecisionError(ValueError):
    """Raised when a batch is too small for the requested quantile."""


def trial_stream(seed: int, index: int) -> np.random.Generator:
    """Independent, randomly accessible RNG substream for one trial.

    Within a trial the draw order is fixed: occupied-channel signal bins
    in ascending channel order, then noise bins, then the LO phase path
    (only when phase noise is enabled).
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial energy statistics for one scenario/impairment setting.

    ``energies`` has shape (n_trials, K) with columns following the plan's
    channel order; trial t was produced from trial_stream(seed,
    start_trial + t).
    """

    scenario: ScenarioConfig
    impairments: ImpairmentConfig
    n_trials: int
    seed: int
    energies: np.ndarray
    start_trial: int = 0

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=np.float64)
        expected = (self.n_trials, len(self.scenario.plan.channels))
        if energies.shape != expected:
            raise ValueError(f"energies shape {energies.shape} != {expected}")
        if not np.all(np.isfinite(energies)) or np.any(energies < 0):
            raise ValueError("energies must be finite and nonnegative")
        object.__setattr__(self, "energies", energies)

    @property
    def channels(self) -> tuple:
        return self.scenario.plan.channels

    def energies_for(self, channel: int) -> np.ndarray:
        try:
            col = self.channels.index(channel)
        except ValueError:
            raise KeyError(f"channel {channel!r} not in plan") from None
        return self.energies[:, col]


def _simulate_range(scenario: ScenarioConfig, impairments: ImpairmentConfig,
                    seed: int, start: int, count: int) -> np.ndarray:
    plan = scenario.plan
    out = np.empty((count, len(plan.channels)))
    for i in range(count):
        rng = trial_stream(seed, start + i)
        sig = generate_signal(scenario, rng)
        sig = add_awgn(sig, scenario.noise_psd, plan, rng)
        sig = front_end_chain(sig, impairments, rng)
        out[i] = channelize(sig, plan).values
    return out


def resolve_workers(workers=None) -> int:
    """Worker count: explicit argument, else the CRSENSE_WORKERS env var, else 1."""
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(workers)
    except (TypeError, ValueError):
        raise ValueError(f"worker count must be an integer, got {workers!r}") from None
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def run_trials(scenario: ScenarioConfig, impairments: ImpairmentConfig,
               n_trials: int, seed: int, *, start_trial: int = 0,
               workers=None) -> TrialBatch:
    """Run n_trials independent sensing windows and collect their energies.

    Each trial runs generate_signal -> add_awgn -> front_end_chain ->
    channelize on its own substream, so the batch content is independent
    of how the work is split across processes.
    """
    if not isinstance(n_trials, (int, np.integer)) or n_trials < 1:
        raise ValueError(f"n_trials must be a positive integer, got {n_trials!r}")
    workers = resolve_workers(workers)
    if workers == 1 or n_trials < 4 * workers:
        energies = _simulate_range(scenario, impairments, seed, start_trial, n_trials)
    else:
        bounds = np.linspace(0, n_trials, workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_simulate_range, scenario, impairments, seed,
                            start_trial + int(a), int(b - a))
                for a, b in zip(bounds[:-1], bounds[1:])
            ]
            energies = np.concatenate([f.result() for f in futures])
    return TrialBatch(scenario, impairments, int(n_trials), int(seed),
                      energies, start_trial=int(start_trial))


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    # the interval always brackets the point estimate, rounding included
    return min(p, max(0.0, center - half)), max(p, min(1.0, center + half))


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    pfa: float
    pfa_lo: float
    pfa_hi: float
    pd: float
    pd_lo: float
    pd_hi: float


@dataclass(frozen=True)
class RocCurve:
    """Estimated ROC for one channel, points sorted by threshold descending."""

    channel: int
    points: tuple
    n_h0: int
    n_h1: int

    def __post_init__(self):
        pts = tuple(self.points)
        thresholds = [p.threshold for p in pts]
        if thresholds != sorted(thresholds, reverse=True):
            raise ValueError("points must be sorted by threshold descending")
        object.__setattr__(self, "points", pts)

    @property
    def pfa(self) -> np.ndarray:
        return np.array([p.pfa for p in self.points])

    @property
    def pd(self) -> np.ndarray:
        return np.array([p.pd for p in self.points])

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p.threshold for p in self.points])


def estimate_roc(batch_h0: TrialBatch, batch_h1: TrialBatch,
                 lambda_grid, channel: int) -> RocCurve:
    """Empirical (Pfa, Pd) with Wilson 95% intervals over a threshold grid.

    ``channel`` must be idle in batch_h0's occupancy and occupied in
    batch_h1's; both batches must share the channel plan.
    """
    grid = np.asarray(lambda_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("lambda_grid must be non-empty")
    if not np.all(np.isfinite(grid)) or np.any(grid < 0):
        raise ValueError("lambda_grid values must be finite and nonnegative")
    if batch_h0.scenario.plan != batch_h1.scenario.plan:
        raise ValueError("batches use different channel plans")
    if batch_h0.scenario.occupancy.is_occupied(channel):
        raise ValueError(f"channel {channel} must be idle in the H0 batch")
    if not batch_h1.scenario.occupancy.is_occupied(channel):
        raise ValueError(f"channel {channel} must be occupied in the H1 batch")

    t0 = batch_h0.energies_for(channel)
    t1 = batch_h1.energies_for(channel)
    n0, n1 = t0.size, t1.size
    points = []
    for lam in np.sort(grid)[::-1]:
        k0 = int(np.count_nonzero(t0 > lam))
        k1 = int(np.count_nonzero(t1 > lam))
        pfa_lo, pfa_hi = wilson_interval(k0, n0)
        pd_lo, pd_hi = wilson_interval(k1, n1)
        points.append(RocPoint(float(lam), k0 / n0, pfa_lo, pfa_hi,
                               k1 / n1, pd_lo, pd_hi))
    return RocCurve(int(channel), tuple(points), n0, n1)


def pd_at_pfa(curve: RocCurve, target_pfa: float) -> float:
    """Detection probability at a given false-alarm rate, linearly
    interpolated along the estimated curve."""
    order = np.argsort(curve.pfa)
    return float(np.interp(target_pfa, curve.pfa[order], curve.pd[order]))


def calibrate_threshold(batch_h0: TrialBatch, channel: int,
                        target_pfa: float) -> float:
    """Empirical (1 - target_pfa) quantile of the H0 energies on a channel.

    Requires n_trials >= 50/target_pfa so the tail quantile rests on at
    least ~50 exceedances; smaller batches raise PrecisionError.
    """
    if not (0.0 < target_pfa < 1.0):
        raise ValueError(f"target_pfa must be in (0, 1), got {target_pfa!r}")
    if batch_h0.scenario.occupancy.is_occupied(channel):
        raise ValueError(f"channel {channel} is occupied in the calibration batch")
    needed = 50.0 / target_pfa
    if batch_h0.n_trials < needed:
        raise PrecisionError(
            f"calibrating Pfa={target_pfa} needs at least {math.ceil(needed)} trials, "
            f"batch has {batch_h0.n_trials}"
        )
    return float(np.quantile(batch_h0.energies_for(channel), 1.0 - target_pfa))


def _impairments_for(base: ImpairmentConfig, parameter: str, value: float) -> ImpairmentConfig:
    if parameter == "beta":
        return replace(base, phase_noise=PhaseNoiseParams(beta=float(value)))
    if parameter == "irr_db":
        return replace(base, iqi=mismatch_from_irr(float(value)))
    raise ValueError(f"unknown sweep parameter {parameter!r} (expected 'beta' or 'irr_db')")


def sweep_impairment(base_scenario: ScenarioConfig, base_impairments: ImpairmentConfig,
                     parameter: str, values, target_pfa_grid,
                     channel_under_test: int, n_trials: int, seed: int, *,
                     workers=None) -> list:
    """One paired ROC per impairment value for the channel under test.

    The threshold grid is fixed across the sweep at the ideal-chain
    quantiles of ``target_pfa_grid``, and all members share the same
    seed-derived substreams (H0 batch on trials [0, n), H1 batch on
    [n, 2n)), so curves are comparable point by point.  The scenario's
    occupancy must already mark the interferers of the channel under test
    as occupied: both spectral neighbors for a beta sweep, the mirror
    channel for an irr_db sweep.

    Returns a list of (value, RocCurve) pairs in the order given.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep values must be non-empty")
    diffs = np.diff(np.asarray(values, dtype=np.float64))
    if len(values) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ValueError("sweep values must be sorted (strictly monotone)")
    targets = list(target_pfa_grid)
    if not targets:
        raise ValueError("target_pfa_grid must be non-empty")

    plan = base_scenario.plan
    plan._check_channel(channel_under_test)
    occ = base_scenario.occupancy
    if parameter == "beta":
        missing = [k for k in plan.adjacent_channels(channel_under_test)
                   if not occ.is_occupied(k)]
        if missing:
            raise ValueError(f"beta sweep needs the adjacent channels occupied, missing {missing}")
    elif parameter == "irr_db":
        if not occ.is_occupied(plan.mirror_channel(channel_under_test)):
            raise ValueError("irr_db sweep needs the mirror channel occupied")
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r} (expected 'beta' or 'irr_db')")

    lams = sorted({ideal_threshold(p, base_scenario.noise_psd, plan.bins_per_channel)
                   for p in targets}, reverse=True)
    scenario_h0 = replace(base_scenario,
                          occupancy=occ.with_channel(channel_under_test, False))
    scenario_h1 = replace(base_scenario,
                          occupancy=occ.with_channel(channel_under_test, True))

    table = []
    for value in values:
        imp = _impairments_for(base_impairments, parameter, value)
        h0 = run_trials(scenario_h0, imp, n_trials, seed, start_trial=0, workers=workers)
        h1 = run_trials(scenario_h1, imp, n_trials, seed, start_trial=n_trials, workers=workers)
        table.append((float(value), estimate_roc(h0, h1, lams, channel_under_test)))
    return table


STAGE_NAMES = ("input", "after_lna", "phase_noise_only", "iqi_only", "joint")


@dataclass(frozen=True)
class SpectrumStages:
    """Averaged periodograms at the five observation points of the chain.

    ``power`` maps stage name to mean |X[m]|^2 per bin in natural DFT bin
    order; ``frequencies`` gives the signed bin frequencies in the same
    order.  Stages: the noisy input, the input after the LNA alone, after
    phase noise alone, after IQI alone, and after the full chain.
    """

    frequencies: np.ndarray
    power: dict
    n_avg: int

    def channel_level(self, plan, stage: str, channel: int) -> float:
        """Mean bin power of one channel at one stage."""
        return float(self.power[stage][plan.bin_map(channel)].mean())


def psd_stages(scenario: ScenarioConfig, impairments: ImpairmentConfig,
               n_avg: int, seed: int) -> SpectrumStages:
    """Average n_avg single-window periodograms at every chain stage.

    All stages of a window share one signal/noise realization and one LO
    phase trajectory, so single-impairment stages line up with the joint
    stage the way a bench capture would.
    """
    if not isinstance(n_avg, (int, np.integer)) or n_avg < 1:
        raise ValueError(f"n_avg must be a positive integer, got {n_avg!r}")
    plan = scenario.plan
    fs = plan.sample_rate
    acc = {name: np.zeros(plan.dft_size) for name in STAGE_NAMES}
    for w in range(n_avg):
        rng = trial_stream(seed, w)
        stage_in = add_awgn(generate_signal(scenario, rng), scenario.noise_psd, plan, rng)
        after_lna = apply_nonlinearity(stage_in, impairments.nonlinearity)
        if impairments.phase_noise.beta > 0:
            rot = np.exp(1j * lo_phase_path(impairments.phase_noise, len(stage_in), fs, rng))
            pn_only = Baseband(stage_in.samples * rot, fs)
            joint = apply_iqi(Baseband(after_lna.samples * rot, fs), impairments.iqi)
        else:
            pn_only = stage_in
            joint = apply_iqi(after_lna, impairments.iqi)
        iqi_only = apply_iqi(stage_in, impairments.iqi)
        for name, stage in zip(STAGE_NAMES, (stage_in, after_lna, pn_only, iqi_only, joint)):
            acc[name] += np.abs(np.fft.fft(stage.samples, norm="ortho")) ** 2
    power = {name: total / n_avg for name, total in acc.items()}
    return SpectrumStages(plan.bin_frequencies(), power, int(n_avg))
