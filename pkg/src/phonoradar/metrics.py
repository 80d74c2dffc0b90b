"""Spectral comparison machinery: normalized power spectra on short windows,
log-spectral distance, per-window distance series, and loess smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import FramePlan, SampledSignal, frame_signal, hann_window

__all__ = [
    "SPECTRAL_FLOOR",
    "SilentFrameError",
    "PowerSpectrum",
    "normalized_power_spectrum",
    "log_spectral_distance",
    "LsdSeries",
    "lsd_over_windows",
    "loess_smooth",
    "spectral_flatness",
]

SPECTRAL_FLOOR = 1e-8   # fraction of total power, applied before the log ratio
SILENCE_RMS = 1e-12


class SilentFrameError(ValueError):
    """Frame energy too low for a meaningful spectrum."""


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided power spectrum normalized to unit total power, floored so the
    log ratio of any two spectra stays bounded."""

    bins: np.ndarray
    bin_hz: float

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.float64).copy()
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    @classmethod
    def from_bins(cls, raw: np.ndarray, bin_hz: float) -> "PowerSpectrum":
        raw = np.asarray(raw, dtype=np.float64)
        total = raw.sum()
        if not (total > 0):
            raise SilentFrameError("spectrum has no power")
        b = raw / total
        b = np.maximum(b, SPECTRAL_FLOOR)
        return cls(bins=b / b.sum(), bin_hz=bin_hz)

    def __len__(self) -> int:
        return len(self.bins)


def _fft_length(window_len: int) -> int:
    n = 1
    while n < window_len:
        n *= 2
    return n


def normalized_power_spectrum(frame: np.ndarray, rate_hz: float) -> PowerSpectrum:
    """Hann-windowed periodogram of a mean-removed frame, zero-padded to the
    next power of two, normalized to unit total power and floored.

    The frame mean is removed first so a baseline offset cannot dominate the
    DC bin; the signals under comparison are AC quantities.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if np.sqrt(np.mean(frame**2)) < SILENCE_RMS:
        raise SilentFrameError("silent frame")
    work = (frame - frame.mean()) * hann_window(len(frame))
    nfft = _fft_length(len(frame))
    power = np.abs(np.fft.rfft(work, nfft)) ** 2
    return PowerSpectrum.from_bins(power, rate_hz / nfft)


def log_spectral_distance(p: PowerSpectrum, q: PowerSpectrum) -> float:
    """RMS difference in dB between two normalized power spectra."""
    if len(p) != len(q):
        raise ValueError(f"bin count mismatch: {len(p)} vs {len(q)}")
    ratio_db = 10.0 * np.log10(p.bins / q.bins)
    return float(np.sqrt(np.mean(ratio_db**2)))


@dataclass(frozen=True)
class LsdSeries:
    """Per-window log-spectral distances with timestamps; unvoiced or silent
    windows are excluded and recorded by index."""

    values: np.ndarray
    times_s: np.ndarray
    window_indices: np.ndarray
    n_windows: int

    def __post_init__(self):
        for name in ("values", "times_s", "window_indices"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


def lsd_over_windows(a: SampledSignal, b: SampledSignal, plan: FramePlan,
                     voiced_mask=None) -> LsdSeries:
    """Log-spectral distance per voiced window between two aligned signals.

    Frames are extracted rectangularly; the spectral estimator applies its own
    hann taper. Windows flagged unvoiced (or silent in either signal) are
    omitted.
    """
    a.require_same_rate(b)
    if len(a) != len(b):
        raise ValueError("signals must have equal length")
    rect = FramePlan(plan.window_len, plan.hop, "rectangular")
    fa = frame_signal(a, rect)
    fb = frame_signal(b, rect)
    n = len(fa)
    if voiced_mask is None:
        voiced_mask = np.ones(n, dtype=bool)
    voiced_mask = np.asarray(voiced_mask, dtype=bool)
    if len(voiced_mask) != n:
        raise ValueError(f"voiced mask has {len(voiced_mask)} entries for {n} windows")
    values, times, indices = [], [], []
    for i in range(n):
        if not voiced_mask[i]:
            continue
        try:
            pa = normalized_power_spectrum(fa[i], a.rate_hz)
            pb = normalized_power_spectrum(fb[i], b.rate_hz)
        except SilentFrameError:
            continue
        values.append(log_spectral_distance(pa, pb))
        times.append(i * plan.hop / a.rate_hz)
        indices.append(i)
    if not values:
        raise ValueError("no voiced windows to compare")
    return LsdSeries(values=np.array(values), times_s=np.array(times),
                     window_indices=np.array(indices), n_windows=n)


def _tricube(u: np.ndarray) -> np.ndarray:
    w = np.clip(1.0 - np.abs(u) ** 3, 0.0, None)
    return w**3


def loess_smooth(series: LsdSeries, span: float = 0.3) -> LsdSeries:
    """Locally weighted linear regression with tricube weights.

    Each point is refit from its nearest span-fraction neighbors; constant and
    exactly linear series are reproduced unchanged.
    """
    if not (0.0 < span <= 1.0):
        raise ValueError("span must be in (0, 1]")
    x = series.times_s.astype(np.float64)
    y = series.values.astype(np.float64)
    n = len(x)
    if n < 5:
        raise ValueError("need at least 5 points to smooth")
    k = max(2, int(np.ceil(span * n)))
    out = np.empty(n)
    for i in range(n):
        dist = np.abs(x - x[i])
        idx = np.argsort(dist, kind="stable")[:k]
        h = dist[idx].max()
        if h <= 0:
            out[i] = y[idx].mean()
            continue
        w = _tricube(dist[idx] / h)
        xw, yw = x[idx], y[idx]
        sw = w.sum()
        mx = (w * xw).sum() / sw
        my = (w * yw).sum() / sw
        sxx = (w * (xw - mx) ** 2).sum()
        if sxx <= 0:
            out[i] = my
            continue
        slope = (w * (xw - mx) * (yw - my)).sum() / sxx
        out[i] = my + slope * (x[i] - mx)
    return LsdSeries(values=out, times_s=series.times_s,
                     window_indices=series.window_indices,
                     n_windows=series.n_windows)


def spectral_flatness(spectrum: PowerSpectrum) -> float:
    """Geometric over arithmetic mean of the bins; 1 for a flat spectrum."""
    b = spectrum.bins
    return float(np.exp(np.mean(np.log(b))) / np.mean(b))
