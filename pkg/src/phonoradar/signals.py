"""Sampled-signal container plus the framing / correlation / filtering primitives
shared by the synthesis, transform, radar and evaluation stages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "SampledSignal",
    "FramePlan",
    "frame_count",
    "frame_signal",
    "hann_window",
    "cross_correlate",
    "correlation_series",
    "parabolic_peak_offset",
    "dc_block",
    "design_lowpass",
    "resample_decimate",
    "differentiate",
    "integrate_spectral",
]


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled real-valued time series.

    samples carry whatever unit the role implies (pressure-proportional for
    speech, meters for displacement); rate_hz is samples per second.
    """

    samples: np.ndarray
    rate_hz: float
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite (no NaN/Inf)")
        if not (self.rate_hz > 0):
            raise ValueError("rate_hz must be positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.rate_hz

    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.rate_hz

    def with_samples(self, samples: np.ndarray, label: str | None = None) -> "SampledSignal":
        return SampledSignal(samples, self.rate_hz, self.label if label is None else label)

    def require_same_rate(self, other: "SampledSignal") -> None:
        if abs(self.rate_hz - other.rate_hz) > 1e-9 * max(self.rate_hz, other.rate_hz):
            raise ValueError(
                f"rate mismatch: {self.rate_hz} Hz vs {other.rate_hz} Hz"
            )


@dataclass(frozen=True)
class FramePlan:
    """Short-time analysis grid: window length N, hop, and taper."""

    window_len: int
    hop: int
    taper: str = "rectangular"

    def __post_init__(self):
        if self.window_len <= 0:
            raise ValueError("window_len must be positive")
        if not (0 < self.hop <= self.window_len):
            raise ValueError("hop must satisfy 0 < hop <= window_len")
        if self.taper not in ("rectangular", "hann"):
            raise ValueError(f"unknown taper {self.taper!r}")

    @classmethod
    def for_rate(cls, rate_hz: float, window_s: float = 0.025,
                 hop_s: float = 0.0125, taper: str = "rectangular") -> "FramePlan":
        return cls(int(round(window_s * rate_hz)), int(round(hop_s * rate_hz)), taper)

    def n_frames(self, signal_len: int) -> int:
        if signal_len < self.window_len:
            return 0
        return (signal_len - self.window_len) // self.hop + 1

    def window(self) -> np.ndarray:
        if self.taper == "hann":
            return hann_window(self.window_len)
        return np.ones(self.window_len)

    def frame_start(self, index: int) -> int:
        return index * self.hop


def hann_window(n: int) -> np.ndarray:
    """Periodic hann window; sums to a constant when overlap-added at hop n/2."""
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def frame_count(signal_len: int, window_len: int, hop: int) -> int:
    if signal_len < window_len:
        return 0
    return (signal_len - window_len) // hop + 1


def frame_signal(sig: SampledSignal, plan: FramePlan) -> np.ndarray:
    """Slice a signal into overlapping frames (rows), taper applied.

    Frame i covers samples [i*hop, i*hop + window_len).
    """
    x = sig.samples
    n = plan.n_frames(len(x))
    if n == 0:
        raise ValueError(
            f"signal of {len(x)} samples is shorter than one window ({plan.window_len})"
        )
    idx = plan.hop * np.arange(n)[:, None] + np.arange(plan.window_len)[None, :]
    frames = x[idx]
    if plan.taper == "hann":
        frames = frames * hann_window(plan.window_len)[None, :]
    return frames


def correlation_series(a: np.ndarray, b: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Raw correlation sum(a[n] * b[n+k]) for each lag k, zero-padded ends."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.empty(len(lags))
    la, lb = len(a), len(b)
    for i, k in enumerate(lags):
        k = int(k)
        if k >= 0:
            m = min(la, lb - k)
            out[i] = float(a[:m] @ b[k:k + m]) if m > 0 else 0.0
        else:
            m = min(la + k, lb)
            out[i] = float(a[-k:-k + m] @ b[:m]) if m > 0 else 0.0
    return out


def cross_correlate(a: SampledSignal, b: SampledSignal,
                    max_lag: int) -> tuple[int, float]:
    """Lag of b relative to a maximizing normalized cross-correlation.

    Positive lag means b is a delayed copy of a. Normalization uses the full
    signal energies, so the peak is exactly 1 only for b == a. Ties are broken
    toward the smallest |lag|.
    """
    a.require_same_rate(b)
    if max_lag >= min(len(a), len(b)):
        raise ValueError("max_lag must be smaller than both signal lengths")
    ea = float(a.samples @ a.samples)
    eb = float(b.samples @ b.samples)
    if ea == 0.0 or eb == 0.0:
        raise ValueError("cross-correlation undefined for all-zero input")
    lags = np.arange(-max_lag, max_lag + 1)
    r = correlation_series(a.samples, b.samples, lags) / np.sqrt(ea * eb)
    best = r.max()
    ties = np.flatnonzero(r == best)
    pick = ties[np.lexsort((lags[ties], np.abs(lags[ties])))[0]]
    return int(lags[pick]), float(np.clip(r[pick], -1.0, 1.0))


def parabolic_peak_offset(y_prev: float, y_peak: float, y_next: float) -> float:
    """Sub-sample offset of a parabola through three points; in (-0.5, 0.5).

    Optional refinement on top of an integer correlation peak; returns 0 when
    the points are not locally concave.
    """
    denom = y_prev - 2.0 * y_peak + y_next
    if denom >= 0:
        return 0.0
    off = 0.5 * (y_prev - y_next) / denom
    return float(np.clip(off, -0.5, 0.5))


def dc_block(sig: SampledSignal, pole: float) -> SampledSignal:
    """First-order high pass y[n] = x[n] - x[n-1] + pole*y[n-1]."""
    if not (0.0 < pole < 1.0):
        raise ValueError("pole must be in (0, 1)")
    y = lfilter([1.0, -1.0], [1.0, -pole], sig.samples)
    return sig.with_samples(y)


def design_lowpass(cutoff_frac: float, taps: int) -> np.ndarray:
    """Blackman-windowed sinc low-pass; cutoff as a fraction of the sample rate."""
    if taps % 2 == 0:
        taps += 1
    n = np.arange(taps) - (taps - 1) / 2
    h = 2.0 * cutoff_frac * np.sinc(2.0 * cutoff_frac * n)
    m = np.arange(taps)
    w = (0.42 - 0.5 * np.cos(2 * np.pi * m / (taps - 1))
         + 0.08 * np.cos(4 * np.pi * m / (taps - 1)))
    h = h * w
    return h / h.sum()


def resample_decimate(sig: SampledSignal, target_rate_hz: float) -> SampledSignal:
    """Anti-alias low-pass (windowed sinc, cutoff 0.45 * target rate) then
    keep every k-th sample. The source rate must be an integer multiple of
    the target rate."""
    ratio = sig.rate_hz / target_rate_hz
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ValueError(
            f"rate {sig.rate_hz} is not an integer multiple of {target_rate_hz}"
        )
    if k == 1:
        return SampledSignal(sig.samples, target_rate_hz, sig.label)
    h = design_lowpass(0.45 / k, 16 * k + 1)
    y = np.convolve(sig.samples, h, mode="same")
    return SampledSignal(y[::k], target_rate_hz, sig.label)


def differentiate(x: np.ndarray, rate_hz: float) -> np.ndarray:
    """Zero-phase spectral time derivative (multiply the spectrum by j*2*pi*f).

    For an in-band sinusoid the amplitude is exactly 2*pi*f and the phase
    lead exactly 90 degrees, and integrate_spectral() inverts it exactly
    above the integrator's low-frequency edge. Assumes the signal is
    effectively periodic or decays near its ends; edge regions of strongly
    aperiodic inputs carry wrap-around ringing.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two samples")
    f = np.fft.rfftfreq(n, 1.0 / rate_hz)
    return np.fft.irfft(np.fft.rfft(x) * (2j * np.pi * f), n)


def integrate_spectral(x: np.ndarray, rate_hz: float, *, low_stop_hz: float = 15.0,
                       low_pass_hz: float = 25.0) -> np.ndarray:
    """Zero-phase antiderivative, the band-limited inverse of differentiate().

    The response is 1/(j*2*pi*f) above low_pass_hz and ramps to zero below
    (drift and baseline control replacing an explicit leak), so content in
    the phonation band passes through the derivative/integral pair untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two samples")
    f = np.fft.rfftfreq(n, 1.0 / rate_hz)
    g = np.zeros(len(f), dtype=np.complex128)
    nz = f > 0
    g[nz] = 1.0 / (2j * np.pi * f[nz])
    ramp = np.clip((f - low_stop_hz) / max(low_pass_hz - low_stop_hz, 1e-9), 0.0, 1.0)
    return np.fft.irfft(np.fft.rfft(x) * g * ramp, n)
