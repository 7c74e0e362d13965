"""Multi-channel baseband scenario synthesis for energy-detection sensing.

A sensing window is one DFT frame of ``N`` complex samples covering ``K``
channels laid out symmetrically around DC.  Occupied channels carry
frequency-flat circular complex Gaussian signals synthesized directly on
their DFT bins; receiver thermal noise is likewise synthesized in-band.
All transforms use the unitary DFT convention so power bookkeeping is
identical in both domains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "ChannelPlan",
    "OccupancyMap",
    "Baseband",
    "ScenarioConfig",
    "generate_signal",
    "add_awgn",
]


def _complex_gaussian(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    """n i.i.d. circular complex Gaussian values with E|z|^2 = variance."""
    z = rng.standard_normal(2 * n) * math.sqrt(variance / 2.0)
    return z.view(np.complex128)


@dataclass(frozen=True)
class ChannelPlan:
    """K-channel frequency grid on an N-point DFT.

    Channels are indexed -K/2..-1, +1..+K/2 (there is no channel 0).  The
    spectrum is split into K slots of N/K bins; the lowest bin of every
    slot is a guard bin owned by nobody, so each channel keeps
    B = N/K - 1 usable bins.  The guard set is exactly the multiples of
    N/K, which includes DC and Nyquist, and makes the mirror relation
    exact: bins of channel -k are the reflections (N - m) mod N of the
    bins of channel +k.
    """

    num_channels: int
    dft_size: int
    sample_rate: float = 1.0

    def __post_init__(self):
        K, N = self.num_channels, self.dft_size
        if not isinstance(K, (int, np.integer)) or K < 2 or K % 2 != 0:
            raise ValueError(f"num_channels must be a positive even integer, got {K!r}")
        if not isinstance(N, (int, np.integer)) or N <= 0 or N % K != 0:
            raise ValueError(
                f"dft_size must be a positive multiple of num_channels, got {N!r}"
            )
        if N // K < 2:
            raise ValueError("dft_size too small: each channel needs at least one usable bin")
        fs = self.sample_rate
        if not (isinstance(fs, (int, float, np.floating)) and math.isfinite(fs) and fs > 0):
            raise ValueError(f"sample_rate must be positive and finite, got {fs!r}")

    @classmethod
    def for_bins(cls, num_channels: int, bins_per_channel: int, sample_rate: float = 1.0):
        """Build a plan from the desired number of usable bins per channel."""
        return cls(num_channels, num_channels * (bins_per_channel + 1), sample_rate)

    @property
    def slot_width(self) -> int:
        """Bins per channel slot, guard bin included."""
        return self.dft_size // self.num_channels

    @property
    def bins_per_channel(self) -> int:
        return self.slot_width - 1

    @cached_property
    def channels(self) -> tuple[int, ...]:
        """All channel indices in ascending center-frequency order."""
        half = self.num_channels // 2
        return tuple(range(-half, 0)) + tuple(range(1, half + 1))

    def mirror_channel(self, channel: int) -> int:
        self._check_channel(channel)
        return -channel

    def adjacent_channels(self, channel: int) -> tuple[int, int]:
        """The two spectrally adjacent channels (circular across DC/Nyquist)."""
        self._check_channel(channel)
        order = self.channels
        i = order.index(channel)
        return order[i - 1], order[(i + 1) % len(order)]

    def _check_channel(self, channel: int):
        if channel not in self._channel_set:
            raise ValueError(f"channel {channel!r} is not in this plan")

    @cached_property
    def _channel_set(self) -> frozenset:
        return frozenset(self.channels)

    def bin_map(self, channel: int) -> np.ndarray:
        """Sorted DFT bin indices owned by a channel."""
        self._check_channel(channel)
        W, N = self.slot_width, self.dft_size
        k = abs(channel)
        if channel > 0:
            bins = np.arange((k - 1) * W + 1, k * W)
        else:
            bins = np.arange(N - k * W + 1, N - (k - 1) * W)
        bins.setflags(write=False)
        return bins

    @cached_property
    def guard_bins(self) -> np.ndarray:
        """DFT bins owned by no channel (all multiples of the slot width)."""
        g = np.arange(0, self.dft_size, self.slot_width)
        g.setflags(write=False)
        return g

    @cached_property
    def used_bins(self) -> np.ndarray:
        """All channel-owned bins, ascending."""
        u = np.sort(np.concatenate([self.bin_map(k) for k in self.channels]))
        u.setflags(write=False)
        return u

    @cached_property
    def bin_matrix(self) -> np.ndarray:
        """(K, B) bin indices, rows aligned with ``channels``."""
        m = np.stack([self.bin_map(k) for k in self.channels])
        m.setflags(write=False)
        return m

    def bin_frequencies(self) -> np.ndarray:
        """Signed center frequency of every DFT bin, natural bin order."""
        return np.fft.fftfreq(self.dft_size, d=1.0 / self.sample_rate)


@dataclass(frozen=True)
class OccupancyMap:
    """Per-channel hypothesis: channels in ``occupied`` are H1, the rest H0."""

    occupied: frozenset

    def __init__(self, occupied=()):
        object.__setattr__(self, "occupied", frozenset(int(k) for k in occupied))

    @classmethod
    def all_idle(cls):
        return cls(())

    def is_occupied(self, channel: int) -> bool:
        return channel in self.occupied

    def with_channel(self, channel: int, occupied: bool) -> "OccupancyMap":
        s = set(self.occupied)
        if occupied:
            s.add(channel)
        else:
            s.discard(channel)
        return OccupancyMap(s)

    def validate_against(self, plan: ChannelPlan):
        unknown = self.occupied - set(plan.channels)
        if unknown:
            raise ValueError(f"occupancy names channels not in the plan: {sorted(unknown)}")


@dataclass(frozen=True)
class Baseband:
    """A block of complex baseband samples with its sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ValueError(f"sample_rate must be positive and finite, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def mean_power(self) -> float:
        """Mean per-sample power E|x|^2 over the block."""
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class ScenarioConfig:
    """One sensing scenario: plan, occupancy, per-channel SNR and noise level.

    ``noise_psd`` is the noise power per channel bin (equivalently the mean
    of the per-channel energy statistic under H0).  ``snr_db`` is the same
    for every occupied channel, so each occupied bin carries signal
    variance noise_psd * 10^(snr_db/10).
    """

    plan: ChannelPlan
    occupancy: OccupancyMap
    snr_db: float = 0.0
    noise_psd: float = 1.0

    def __post_init__(self):
        self.occupancy.validate_against(self.plan)
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db!r}")
        if not (math.isfinite(self.noise_psd) and self.noise_psd >= 0):
            raise ValueError(f"noise_psd must be nonnegative and finite, got {self.noise_psd!r}")

    @property
    def signal_power(self) -> float:
        """Per-bin signal variance on occupied channels."""
        return self.noise_psd * 10.0 ** (self.snr_db / 10.0)


def generate_signal(cfg: ScenarioConfig, rng: np.random.Generator) -> Baseband:
    """Synthesize one noise-free sensing window of ``plan.dft_size`` samples.

    Each occupied channel gets i.i.d. circular complex Gaussian bin values
    with per-bin variance ``cfg.signal_power``; idle channels, guard bins,
    DC and Nyquist stay exactly zero.  Channels are filled in ascending
    index order, which fixes the RNG draw order.
    """
    plan = cfg.plan
    occupied = sorted(cfg.occupancy.occupied)
    if occupied and cfg.noise_psd <= 0:
        raise ValueError("noise_psd must be positive when any channel is occupied "
                         "(snr_db scales signal power relative to it)")
    spectrum = np.zeros(plan.dft_size, dtype=np.complex128)
    if occupied:
        power = cfg.signal_power
        b = plan.bins_per_channel
        for k in occupied:
            spectrum[plan.bin_map(k)] = _complex_gaussian(rng, b, power)
    samples = np.fft.ifft(spectrum, norm="ortho")
    return Baseband(samples, plan.sample_rate)


def add_awgn(sig: Baseband, noise_psd: float, plan: ChannelPlan,
             rng: np.random.Generator) -> Baseband:
    """Add in-band receiver noise: i.i.d. CN(0, noise_psd) on every channel bin.

    Noise is synthesized per DFT window on the plan's channel bins (guard
    bins stay clean), so the per-channel energy statistic of pure noise has
    mean ``noise_psd`` exactly.  Inputs longer than one window get
    independent noise per window; a trailing partial window is truncated
    from a full draw.
    """
    if not (math.isfinite(noise_psd) and noise_psd >= 0):
        raise ValueError(f"noise_psd must be nonnegative and finite, got {noise_psd!r}")
    if noise_psd == 0:
        return sig
    n, size = len(sig), plan.dft_size
    used = plan.used_bins
    out = np.array(sig.samples, copy=True)
    for start in range(0, n, size):
        spectrum = np.zeros(size, dtype=np.complex128)
        spectrum[used] = _complex_gaussian(rng, used.size, noise_psd)
        block = np.fft.ifft(spectrum, norm="ortho")
        stop = min(start + size, n)
        out[start:stop] += block[: stop - start]
    return Baseband(out, sig.sample_rate)
