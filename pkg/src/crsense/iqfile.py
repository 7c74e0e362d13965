"""Recorded IQ files: interleaved little-endian float32 I,Q samples plus a
JSON sidecar header carrying the sample rate and channel plan.

The sidecar lives next to the data file with a ``.json`` suffix appended.
Readers stream one DFT window at a time, so memory stays bounded no matter
how long the recording is.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .signal_model import Baseband, ChannelPlan

__all__ = [
    "DataError",
    "RecordingHeader",
    "sidecar_path",
    "write_recording",
    "read_header",
    "count_windows",
    "iter_windows",
]

_SAMPLE_BYTES = 8  # float32 I + float32 Q


class DataError(ValueError):
    """A recording or its sidecar is malformed."""


def sidecar_path(path) -> str:
    return str(path) + ".json"


@dataclass(frozen=True)
class RecordingHeader:
    """Sidecar contents; enough to rebuild the channel plan."""

    sample_rate: float
    num_channels: int
    dft_size: int

    def plan(self) -> ChannelPlan:
        try:
            return ChannelPlan(self.num_channels, self.dft_size, self.sample_rate)
        except ValueError as exc:
            raise DataError(f"sidecar header describes an invalid plan: {exc}") from None


def write_recording(path, windows, plan: ChannelPlan):
    """Write windows of complex samples as interleaved float32 I,Q.

    ``windows`` is an iterable of Baseband blocks or complex arrays, each
    exactly one DFT window long.  The sidecar is written last so a
    readable header implies complete data.
    """
    count = 0
    with open(path, "wb") as fh:
        for window in windows:
            samples = window.samples if isinstance(window, Baseband) else np.asarray(window)
            if samples.size != plan.dft_size:
                raise ValueError(
                    f"window {count} has {samples.size} samples, expected {plan.dft_size}")
            interleaved = np.empty(2 * samples.size, dtype="<f4")
            interleaved[0::2] = samples.real
            interleaved[1::2] = samples.imag
            fh.write(interleaved.tobytes())
            count += 1
    header = {
        "sample_rate": plan.sample_rate,
        "num_channels": plan.num_channels,
        "dft_size": plan.dft_size,
    }
    tmp = sidecar_path(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, sidecar_path(path))
    return count


def read_header(path) -> RecordingHeader:
    """Read and validate the sidecar header of a recording."""
    sidecar = sidecar_path(path)
    try:
        with open(sidecar, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"missing sidecar header: {sidecar}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed sidecar header {sidecar}: {exc}") from None
    if not isinstance(data, dict):
        raise DataError(f"malformed sidecar header {sidecar}: expected an object")
    required = {"sample_rate", "num_channels", "dft_size"}
    missing = required - data.keys()
    if missing:
        raise DataError(
            f"malformed sidecar header {sidecar}: missing {', '.join(sorted(missing))}")
    unknown = data.keys() - required
    if unknown:
        raise DataError(
            f"malformed sidecar header {sidecar}: unknown key(s) {', '.join(sorted(unknown))}")
    rate = data["sample_rate"]
    if isinstance(rate, bool) or not isinstance(rate, (int, float)) \
            or not math.isfinite(rate) or rate <= 0:
        raise DataError(f"malformed sidecar header {sidecar}: bad sample_rate {rate!r}")
    for key in ("num_channels", "dft_size"):
        if isinstance(data[key], bool) or not isinstance(data[key], int):
            raise DataError(f"malformed sidecar header {sidecar}: bad {key} {data[key]!r}")
    header = RecordingHeader(float(rate), data["num_channels"], data["dft_size"])
    header.plan()  # surface invalid plan parameters now
    return header


def count_windows(path, header: RecordingHeader) -> int:
    """Number of complete DFT windows in the file; rejects ragged lengths."""
    try:
        size = os.path.getsize(path)
    except FileNotFoundError:
        raise DataError(f"recording not found: {path}") from None
    if size % _SAMPLE_BYTES != 0:
        raise DataError(
            f"recording length {size} bytes is not a whole number of I,Q sample pairs")
    samples = size // _SAMPLE_BYTES
    if samples % header.dft_size != 0:
        raise DataError(
            f"recording holds {samples} samples, not divisible by "
            f"dft_size {header.dft_size}")
    return samples // header.dft_size


def iter_windows(path, header: RecordingHeader):
    """Yield one Baseband window at a time (bounded memory)."""
    n_windows = count_windows(path, header)
    window_bytes = header.dft_size * _SAMPLE_BYTES
    with open(path, "rb") as fh:
        for index in range(n_windows):
            raw = fh.read(window_bytes)
            if len(raw) != window_bytes:
                raise DataError(f"recording truncated inside window {index}")
            floats = np.frombuffer(raw, dtype="<f4").astype(np.float64)
            samples = floats[0::2] + 1j * floats[1::2]
            if not np.all(np.isfinite(samples)):
                raise DataError(f"recording window {index} contains non-finite samples")
            yield Baseband(samples, header.sample_rate)
