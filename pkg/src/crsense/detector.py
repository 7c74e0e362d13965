"""Per-channel energy detection on one sensing window.

The test statistic for channel k is the mean bin power over its B bins,
T_k = (1/B) * sum |X[m]|^2 with X the unitary DFT, so thresholds are in
noise-power units regardless of the DFT size.  For an ideal front end the
statistic is Gamma distributed, which gives closed-form false-alarm and
detection probabilities used as oracles throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammainccinv

from .signal_model import Baseband, ChannelPlan

__all__ = [
    "EnergyVector",
    "ThresholdVector",
    "DecisionVector",
    "channelize",
    "decide",
    "ideal_pfa",
    "ideal_pd",
    "ideal_threshold",
]


@dataclass(frozen=True)
class _PerChannel:
    """Channel-indexed vector; rows follow the plan's channel order."""

    channels: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        channels = tuple(int(k) for k in self.channels)
        if values.ndim != 1 or values.size != len(channels):
            raise ValueError("values must be 1-D and aligned with channels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channels", channels)

    def __getitem__(self, channel: int) -> float:
        try:
            return float(self.values[self.channels.index(channel)])
        except ValueError:
            raise KeyError(f"channel {channel!r} not present") from None

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(self.channels, self.values)}


class EnergyVector(_PerChannel):
    """Per-channel energy statistics T_k for one window (nonnegative, finite)."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("energy statistics must be finite and nonnegative")


class ThresholdVector(_PerChannel):
    """Per-channel decision thresholds (nonnegative, finite)."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("thresholds must be finite and nonnegative")

    @classmethod
    def uniform(cls, plan: ChannelPlan, threshold: float) -> "ThresholdVector":
        return cls(plan.channels, np.full(len(plan.channels), float(threshold)))


@dataclass(frozen=True)
class DecisionVector:
    """Per-channel busy/idle decisions; busy means the statistic exceeded lambda."""

    channels: tuple
    busy: np.ndarray

    def __post_init__(self):
        busy = np.asarray(self.busy, dtype=bool)
        channels = tuple(int(k) for k in self.channels)
        if busy.ndim != 1 or busy.size != len(channels):
            raise ValueError("busy must be 1-D and aligned with channels")
        object.__setattr__(self, "busy", busy)
        object.__setattr__(self, "channels", channels)

    def __getitem__(self, channel: int) -> bool:
        try:
            return bool(self.busy[self.channels.index(channel)])
        except ValueError:
            raise KeyError(f"channel {channel!r} not present") from None

    def as_dict(self) -> dict:
        return {k: bool(b) for k, b in zip(self.channels, self.busy)}


def channelize(sig: Baseband, plan: ChannelPlan) -> EnergyVector:
    """Unitary DFT of one window, then mean bin power per channel."""
    if len(sig) != plan.dft_size:
        raise ValueError(
            f"window length {len(sig)} does not match plan dft_size {plan.dft_size}"
        )
    spectrum = np.fft.fft(sig.samples, norm="ortho")
    power = np.abs(spectrum) ** 2
    return EnergyVector(plan.channels, power[plan.bin_matrix].mean(axis=1))


def decide(e: EnergyVector, t: ThresholdVector) -> DecisionVector:
    """Strict comparison per channel: busy iff T_k > lambda_k (ties are idle)."""
    if e.channels != t.channels:
        raise ValueError(
            f"channel sets differ: energies {e.channels} vs thresholds {t.channels}"
        )
    return DecisionVector(e.channels, e.values > t.values)


def _check_gamma_args(lam: float, power: float, bins: int):
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"lambda must be nonnegative and finite, got {lam!r}")
    if not (math.isfinite(power) and power > 0):
        raise ValueError(f"noise_power must be positive and finite, got {power!r}")
    if not isinstance(bins, (int, np.integer)) or bins < 1:
        raise ValueError(f"bins must be a positive integer, got {bins!r}")


def ideal_pfa(lam: float, noise_power: float, bins: int) -> float:
    """False-alarm probability of the ideal chain.

    Under H0 the statistic is Gamma(shape B, scale sigma^2/B), so
    Pfa = Q(B, B*lambda/sigma^2) with Q the upper regularized incomplete
    gamma function.
    """
    _check_gamma_args(lam, noise_power, bins)
    return float(gammaincc(bins, bins * lam / noise_power))


def ideal_pd(lam: float, noise_power: float, signal_power: float, bins: int) -> float:
    """Detection probability of the ideal chain for a Gaussian occupied channel.

    Under H1 every bin variance is sigma^2 + sigma_s^2, so
    Pd = Q(B, B*lambda/(sigma^2 + sigma_s^2)).
    """
    _check_gamma_args(lam, noise_power, bins)
    if not (math.isfinite(signal_power) and signal_power >= 0):
        raise ValueError(f"signal_power must be nonnegative and finite, got {signal_power!r}")
    return float(gammaincc(bins, bins * lam / (noise_power + signal_power)))


def ideal_threshold(target_pfa: float, noise_power: float, bins: int) -> float:
    """Threshold achieving a target false-alarm rate on the ideal chain."""
    if not (0.0 < target_pfa < 1.0):
        raise ValueError(f"target_pfa must be in (0, 1), got {target_pfa!r}")
    _check_gamma_args(0.0, noise_power, bins)
    return float(gammainccinv(bins, target_pfa) * noise_power / bins)
