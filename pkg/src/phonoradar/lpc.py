"""Frame-based linear prediction: autocorrelation method, Levinson-Durbin
recursion, and FIR inverse filtering of the all-pole vocal tract model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .signals import hann_window

__all__ = [
    "LpcModel",
    "LevinsonError",
    "autocorrelation",
    "levinson_durbin",
    "lag_window",
    "clamp_pole_radius",
    "lpc_analyze",
    "inverse_filter",
    "synthesis_impulse_response",
]

SILENT_FLOOR = 1e-12  # r0 below SILENT_FLOOR * frame length flags silence


class LevinsonError(ValueError):
    """Raised when the normal equations are numerically singular."""


@dataclass(frozen=True)
class LpcModel:
    """All-pole model of one frame: prediction-error filter A(z) = 1 + sum a_i z^-i.

    The residual is e[n] = x[n] + sum a_i x[n-i]; synthesis runs gain/A(z).
    gain is the per-sample residual RMS when the model comes from lpc_analyze.
    """

    order: int
    coefficients: np.ndarray
    gain: float
    reflection: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=np.float64).copy()
        k = np.asarray(self.reflection, dtype=np.float64).copy()
        a.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        object.__setattr__(self, "reflection", k)
        if len(a) != self.order:
            raise ValueError("coefficient count must equal order")

    def error_filter(self) -> np.ndarray:
        """FIR taps [1, a_1, ..., a_p]."""
        return np.concatenate(([1.0], self.coefficients))

    def pole_radii(self) -> np.ndarray:
        if self.order == 0:
            return np.array([])
        return np.abs(np.roots(self.error_filter()))

    def is_stable(self, margin: float = 0.0) -> bool:
        if self.order == 0:
            return True
        return bool(np.all(self.pole_radii() < 1.0 - margin))


def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r_k = sum x[n] x[n+k] for k = 0..max_lag."""
    frame = np.asarray(frame, dtype=np.float64)
    if max_lag >= len(frame):
        raise ValueError("max_lag must be smaller than the frame length")
    full = np.correlate(frame, frame, mode="full")
    return full[len(frame) - 1:len(frame) + max_lag].copy()


def levinson_durbin(r: np.ndarray, order: int) -> LpcModel:
    """Solve the Toeplitz normal equations by Levinson-Durbin recursion.

    Returns predictor coefficients in the A(z) = 1 + sum a_i z^-i convention
    and gain = sqrt(final prediction error) in the units of r.
    """
    r = np.asarray(r, dtype=np.float64)
    if order >= len(r):
        raise ValueError("order must be smaller than the autocorrelation length")
    if r[0] <= 0:
        raise LevinsonError("r[0] must be positive")
    a = np.zeros(order)
    k = np.zeros(order)
    err = float(r[0])
    for i in range(1, order + 1):
        acc = r[i] + a[:i - 1] @ r[i - 1:0:-1]
        ki = -acc / err
        if not np.isfinite(ki) or abs(ki) >= 1.0:
            raise LevinsonError(
                f"non-positive prediction error at stage {i} (|k|={abs(ki):.6g})"
            )
        k[i - 1] = ki
        new = a.copy()
        new[i - 1] = ki
        new[:i - 1] = a[:i - 1] + ki * a[i - 2::-1][:i - 1]
        a = new
        err *= (1.0 - ki * ki)
        if err <= 0:
            raise LevinsonError(f"non-positive prediction error at stage {i}")
    return LpcModel(order=order, coefficients=a, gain=float(np.sqrt(err)), reflection=k)


def lag_window(max_lag: int, bandwidth_hz: float, rate_hz: float) -> np.ndarray:
    """Gaussian lag window for bandwidth expansion of the fitted envelope."""
    k = np.arange(max_lag + 1)
    return np.exp(-0.5 * (2.0 * np.pi * bandwidth_hz * k / rate_hz) ** 2)


def clamp_pole_radius(error_filter: np.ndarray, max_radius: float) -> np.ndarray:
    """Pull any pole of 1/A(z) with |p| > max_radius radially inward.

    Enforces a minimum resonance bandwidth so the whitener cannot place
    near-unit-circle poles on individual pitch harmonics.
    """
    if len(error_filter) <= 1:
        return error_filter
    roots = np.roots(error_filter)
    mags = np.abs(roots)
    if np.all(mags <= max_radius):
        return error_filter
    roots = np.where(mags > max_radius, roots * (max_radius / mags), roots)
    return np.poly(roots).real


def lpc_analyze(frame: np.ndarray, order: int, pre_emphasis: float = 0.0, *,
                rate_hz: float | None = None, lag_window_hz: float = 0.0,
                noise_floor: float = 0.0, max_pole_radius: float | None = None,
                history: float = 0.0) -> LpcModel | None:
    """Estimate an LpcModel from one frame; returns None for a silent frame.

    Pipeline: optional pre-emphasis y[n] = x[n] - beta*x[n-1] (history supplies
    x[-1]), hann taper, biased autocorrelation, optional regularization
    (Gaussian lag window, white-noise floor on r0), Levinson-Durbin, optional
    pole-radius clamp. gain is rescaled to the per-sample residual RMS.
    """
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    if n < 4 * order:
        raise ValueError(f"frame of {n} samples too short for order {order}")
    if pre_emphasis:
        prev = np.concatenate(([history], frame[:-1]))
        work = frame - pre_emphasis * prev
    else:
        work = frame
    tapered = work * hann_window(n)
    r = autocorrelation(tapered, order)
    if r[0] < SILENT_FLOOR * n:
        return None
    if lag_window_hz > 0.0:
        if rate_hz is None:
            raise ValueError("lag_window_hz requires rate_hz")
        r = r * lag_window(order, lag_window_hz, rate_hz)
    if noise_floor > 0.0:
        r = r.copy()
        r[0] *= (1.0 + noise_floor)
    model = levinson_durbin(r / n, order)
    if max_pole_radius is not None:
        clamped = clamp_pole_radius(model.error_filter(), max_pole_radius)
        model = LpcModel(order=order, coefficients=clamped[1:], gain=model.gain,
                         reflection=model.reflection)
    return model


def inverse_filter(frame: np.ndarray, model: LpcModel | np.ndarray) -> np.ndarray:
    """Apply the FIR prediction-error filter: e[n] = x[n] + sum a_i x[n-i].

    The first `order` output samples are warm-up (zero initial state); callers
    with access to preceding signal should filter an extended slice instead.
    """
    taps = model.error_filter() if isinstance(model, LpcModel) else np.asarray(model)
    return lfilter(taps, [1.0], np.asarray(frame, dtype=np.float64))


def synthesis_impulse_response(model: LpcModel, n: int) -> np.ndarray:
    """First n samples of the all-pole synthesis filter gain/A(z)."""
    impulse = np.zeros(n)
    impulse[0] = 1.0
    return lfilter([model.gain], model.error_filter(), impulse)
