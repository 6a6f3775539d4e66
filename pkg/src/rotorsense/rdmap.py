"""Range-Doppler processing: fast-time FFT, slow-time FFT, row extraction.

Both FFTs use the unit-norm (1/sqrt(N)) convention so energy is preserved
through each transform and downstream folding thresholds do not depend on the
grid sizes. The Doppler axis is center-shifted: DC sits at bin L // 2, a
convention shared by every module that touches Doppler spectra. No window is
applied by default; pass window="hann" per axis to trade comb sharpness for
leakage suppression.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import RadarConfig
from .echo import Frame

_WINDOWS = ("rect", "hann")


class ProcessingError(ValueError):
    """Input violates a processing precondition (non-finite samples, bad bin)."""


def dc_bin(n_doppler_bins: int) -> int:
    """Index of the zero-Doppler bin after center shift."""
    return n_doppler_bins // 2


@dataclass(frozen=True)
class RangeDopplerMap:
    """Magnitude spectrum, shape [range bins, Doppler bins], Doppler center-shifted."""

    frame_index: int
    magnitudes: np.ndarray

    @property
    def n_range_bins(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_doppler_bins(self) -> int:
        return self.magnitudes.shape[1]


def _window(kind: str, n: int) -> np.ndarray | None:
    if kind == "rect":
        return None
    if kind == "hann":
        return np.hanning(n)
    raise ProcessingError(f"unknown window {kind!r}; known: {_WINDOWS}")


def range_fft(frame: Frame, window: str = "rect") -> np.ndarray:
    """Per-chirp FFT along fast time; returns complex [chirps, range bins].

    Range bin b spans beat frequencies [b, b+1) * fs / samples_per_chirp.
    """
    samples = frame.samples
    if not np.all(np.isfinite(samples)):
        raise ProcessingError(f"frame {frame.frame_index} contains non-finite samples")
    w = _window(window, samples.shape[1])
    if w is not None:
        samples = samples * w[None, :]
    return np.fft.fft(samples, axis=1) / np.sqrt(samples.shape[1])


def doppler_fft(range_matrix: np.ndarray, frame_index: int = 0,
                window: str = "rect") -> RangeDopplerMap:
    """Per-range-bin FFT along slow time, center-shifted, magnitude taken.

    A body at radial velocity v peaks at Doppler frequency 2*v*fc/c, folded
    into the +-1/(2*Tc) unambiguous span.
    """
    if not np.all(np.isfinite(range_matrix)):
        raise ProcessingError("range matrix contains non-finite values")
    mat = np.asarray(range_matrix)
    w = _window(window, mat.shape[0])
    if w is not None:
        mat = mat * w[:, None]
    spec = np.fft.fft(mat, axis=0) / np.sqrt(mat.shape[0])
    spec = np.fft.fftshift(spec, axes=0)
    return RangeDopplerMap(frame_index=frame_index, magnitudes=np.abs(spec).T)


def compute_map(frame: Frame, window: str = "rect") -> RangeDopplerMap:
    return doppler_fft(range_fft(frame, window=window), frame.frame_index, window=window)


def process_frames(frames, window: str = "rect") -> list[RangeDopplerMap]:
    maps = [compute_map(f, window=window) for f in frames]
    return sorted(maps, key=lambda m: m.frame_index)


def doppler_row(rd_map: RangeDopplerMap, range_bin: int) -> np.ndarray:
    """Doppler spectrum of one range bin (a view, length L)."""
    if not 0 <= range_bin < rd_map.n_range_bins:
        raise ProcessingError(
            f"range bin {range_bin} out of bounds [0, {rd_map.n_range_bins})")
    return rd_map.magnitudes[range_bin]


def doppler_axis_hz(radar: RadarConfig) -> np.ndarray:
    """Center-shifted Doppler frequency of each bin."""
    return np.fft.fftshift(np.fft.fftfreq(radar.chirps_per_frame, d=radar.chirp_duration_s))


def beat_range_bin(radar: RadarConfig, range_m: float) -> int:
    """Range bin hit by a point target: round(2*K*R/c * Ns/fs)."""
    beat_hz = 2.0 * radar.chirp_slope_hz_per_s * range_m / radar.speed_of_light_m_per_s
    return int(round(beat_hz * radar.samples_per_chirp / radar.adc_rate_hz))


def aliased_doppler_hz(radar: RadarConfig, velocity_m_per_s: float) -> float:
    """Doppler frequency of a body at v, wrapped into [-PRF/2, PRF/2)."""
    prf = radar.pulse_rate_hz
    f = 2.0 * velocity_m_per_s * radar.carrier_freq_hz / radar.speed_of_light_m_per_s
    return (f + prf / 2.0) % prf - prf / 2.0


def map_to_csv(rd_map: RangeDopplerMap, path) -> None:
    """Dump (range_bin, doppler_bin, magnitude) rows for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["range_bin", "doppler_bin", "magnitude"])
        for r in range(rd_map.n_range_bins):
            for d in range(rd_map.n_doppler_bins):
                writer.writerow([r, d, repr(float(rd_map.magnitudes[r, d]))])
