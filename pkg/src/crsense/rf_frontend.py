"""Direct-conversion receive chain impairment models.

Three memoryless complex-baseband impairments, individually disableable
and composed in a fixed order: cubic LNA nonlinearity, then Wiener LO
phase noise, then I/Q branch imbalance.  Phase noise and imbalance both
belong to the down-conversion stage; the LO phase corrupts the signal
before the branch mismatch splits it.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .signal_model import Baseband

__all__ = [
    "NonlinearityParams",
    "PhaseNoiseParams",
    "IqiParams",
    "ImpairmentConfig",
    "apply_nonlinearity",
    "bussgang_gain",
    "apply_phase_noise",
    "lo_phase_path",
    "apply_iqi",
    "irr_from_mismatch",
    "mismatch_from_irr",
    "front_end_chain",
]


@dataclass(frozen=True)
class NonlinearityParams:
    """Cubic amplifier law y = a1*x + a3*|x|^2*x.

    ``a1`` is the linear gain, ``iip3`` the input-referred third-order
    intercept in the same amplitude units as the samples.  The cubic
    coefficient follows the standard relation a3 = -(4/3) * a1 / iip3^2;
    iip3 = inf disables the distortion entirely.
    """

    a1: float = 1.0
    iip3: float = math.inf

    def __post_init__(self):
        if not (math.isfinite(self.a1) and self.a1 > 0):
            raise ValueError(f"a1 must be positive and finite, got {self.a1!r}")
        if math.isnan(self.iip3) or self.iip3 <= 0:
            raise ValueError(f"iip3 must be positive (inf allowed), got {self.iip3!r}")

    @property
    def a3(self) -> float:
        if math.isinf(self.iip3):
            return 0.0
        return -(4.0 / 3.0) * self.a1 / self.iip3 ** 2


@dataclass(frozen=True)
class PhaseNoiseParams:
    """Free-running Wiener LO with 3 dB linewidth ``beta`` in Hz (0 = ideal)."""

    beta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be nonnegative and finite, got {self.beta!r}")


@dataclass(frozen=True)
class IqiParams:
    """I/Q mismatch: amplitude ratio ``g`` and phase error ``phi`` (radians).

    The received signal becomes y = K1*x + K2*conj(x) with
    K1 = (1 + g*exp(-j*phi))/2 and K2 = (1 - g*exp(j*phi))/2, so
    K1 + conj(K2) = 1 and perfectly matched branches (g=1, phi=0) give
    K1 = 1, K2 = 0.
    """

    g: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.g) and self.g > 0):
            raise ValueError(f"g must be positive and finite, got {self.g!r}")
        if not math.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi!r}")

    @property
    def k1(self) -> complex:
        return (1.0 + self.g * cmath.exp(-1j * self.phi)) / 2.0

    @property
    def k2(self) -> complex:
        return (1.0 - self.g * cmath.exp(1j * self.phi)) / 2.0


@dataclass(frozen=True)
class ImpairmentConfig:
    """Full receive-chain configuration; defaults are all identity.

    Composition order is fixed: nonlinearity, then phase noise, then IQI.
    """

    nonlinearity: NonlinearityParams = field(default_factory=NonlinearityParams)
    phase_noise: PhaseNoiseParams = field(default_factory=PhaseNoiseParams)
    iqi: IqiParams = field(default_factory=IqiParams)

    @classmethod
    def ideal(cls) -> "ImpairmentConfig":
        return cls()


def apply_nonlinearity(sig: Baseband, p: NonlinearityParams) -> Baseband:
    """Memoryless cubic amplifier: y[n] = a1*x[n] + a3*|x[n]|^2*x[n].

    Warns when any sample is driven past the cubic's turnover amplitude
    iip3/2, where the model stops being a sensible amplifier.
    """
    x = sig.samples
    if p.a3 == 0.0:
        return Baseband(p.a1 * x, sig.sample_rate)
    mag2 = np.abs(x) ** 2
    if np.max(mag2) > (p.iip3 / 2.0) ** 2:
        warnings.warn(
            "input drive exceeds the cubic turnover amplitude iip3/2; "
            "the amplifier model is not valid this far into compression",
            RuntimeWarning,
            stacklevel=2,
        )
    return Baseband(p.a1 * x + p.a3 * mag2 * x, sig.sample_rate)


def bussgang_gain(p: NonlinearityParams, input_power: float) -> complex:
    """LMMSE gain alpha = a1 + 2*a3*P for circular Gaussian input of power P.

    The residual d = y - alpha*x is then uncorrelated with x.
    """
    if not (math.isfinite(input_power) and input_power >= 0):
        raise ValueError(f"input_power must be nonnegative and finite, got {input_power!r}")
    return complex(p.a1 + 2.0 * p.a3 * input_power)


def lo_phase_path(p: PhaseNoiseParams, n: int, sample_rate: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Wiener LO phase trajectory theta[0..n-1] with theta[0] = 0.

    Increments are i.i.d. N(0, 2*pi*beta/fs), which gives the
    multiplicative process exp(j*theta) a Lorentzian spectrum of 3 dB
    full width ``beta`` and autocorrelation exp(-pi*(beta/fs)*|m|).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    theta = np.zeros(n)
    if p.beta > 0 and n > 1:
        sigma = math.sqrt(2.0 * math.pi * p.beta / sample_rate)
        np.cumsum(rng.standard_normal(n - 1) * sigma, out=theta[1:])
    return theta


def apply_phase_noise(sig: Baseband, p: PhaseNoiseParams,
                      rng: np.random.Generator) -> Baseband:
    """Rotate each sample by a Wiener LO phase: y[n] = x[n]*exp(j*theta[n]).

    beta = 0 is a bit-level identity and consumes no RNG draws.
    """
    if p.beta == 0.0:
        return sig
    theta = lo_phase_path(p, len(sig), sig.sample_rate, rng)
    return Baseband(sig.samples * np.exp(1j * theta), sig.sample_rate)


def apply_iqi(sig: Baseband, p: IqiParams) -> Baseband:
    """I/Q imbalance: y[n] = K1*x[n] + K2*conj(x[n]).

    Matched branches (g=1, phi=0) are a bit-level identity.
    """
    if p.g == 1.0 and p.phi == 0.0:
        return sig
    x = sig.samples
    return Baseband(p.k1 * x + p.k2 * np.conj(x), sig.sample_rate)


def irr_from_mismatch(p: IqiParams) -> float:
    """Image rejection ratio |K1|^2/|K2|^2 as a linear power ratio.

    Equals (1 + 2g*cos(phi) + g^2) / (1 - 2g*cos(phi) + g^2); returns +inf
    for perfectly matched branches (K2 = 0).
    """
    num = abs(p.k1) ** 2
    den = abs(p.k2) ** 2
    if den == 0.0:
        return math.inf
    return num / den


def mismatch_from_irr(irr_db: float) -> IqiParams:
    """Amplitude-only mismatch (g, phi=0) achieving a target IRR in dB.

    With phi = 0 the IRR is ((1+g)/(1-g))^2, so g = (sqrt(r)-1)/(sqrt(r)+1)
    for linear ratio r.  +inf maps to the identity (g=1, phi=0) and the
    round trip through irr_from_mismatch is exact to floating precision.
    """
    if math.isnan(irr_db) or irr_db == -math.inf:
        raise ValueError(f"irr_db must be a real value > 0, got {irr_db!r}")
    if math.isinf(irr_db):
        return IqiParams(g=1.0, phi=0.0)
    if irr_db <= 0:
        raise ValueError(f"irr_db must be > 0 dB, got {irr_db!r}")
    root = math.sqrt(10.0 ** (irr_db / 10.0))
    return IqiParams(g=(root - 1.0) / (root + 1.0), phi=0.0)


def front_end_chain(sig: Baseband, cfg: ImpairmentConfig,
                    rng: np.random.Generator) -> Baseband:
    """Full receive chain: nonlinearity, then phase noise, then IQI.

    The input is expected to contain the antenna noise already (noise
    enters ahead of the LNA, so the nonlinearity distorts signal plus
    noise).  With everything disabled the chain is y = a1*x.
    """
    out = apply_nonlinearity(sig, cfg.nonlinearity)
    out = apply_phase_noise(out, cfg.phase_noise, rng)
    return apply_iqi(out, cfg.iqi)
