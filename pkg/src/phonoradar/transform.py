"""The inverse model transform: frame the speech, inverse filter each voiced
frame to the excitation estimate, integrate to the fold-displacement estimate,
align to the radar displacement by cross-correlation, and reconstruct the
model-filtered displacement estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .lpc import lpc_analyze
from .signals import (FramePlan, SampledSignal, correlation_series, hann_window,
                      integrate_spectral)
from .synth import VocalTractModel

__all__ = [
    "TransformConfig",
    "FrameRecord",
    "TransformOutput",
    "NoVoicedFramesError",
    "detect_voicing",
    "estimate_delay",
    "integrate_excitation",
    "transform_speech",
]

VOICING_F0_LOW_HZ = 90.0
VOICING_F0_HIGH_HZ = 1000.0


class NoVoicedFramesError(RuntimeError):
    """Nothing to transform: every analysis frame was unvoiced or silent."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class TransformConfig:
    """Knobs for the model transform.

    frame defaults to 25 ms windows with 50% overlap at the signal rate.
    integration 'spectral' uses the zero-phase band-limited antiderivative
    (exact inverse of the synthesis derivative); 'leaky' uses the recursive
    leaky accumulator with integrator_pole. The LPC regularizers (lag window,
    noise floor, pole-radius cap) keep the per-frame whitener from locking
    onto individual pitch harmonics at high fundamental frequencies.
    """

    frame: FramePlan | None = None
    lpc_order: int = 6
    pre_emphasis: float = 0.9
    voicing_threshold: float = 0.5
    max_lag_ms: float = 5.0
    tau_mode: str = "global"          # 'global' or 'per-frame'
    integration: str = "spectral"     # 'spectral' or 'leaky'
    integrator_pole: float = 0.998
    lag_window_hz: float = 20.0
    noise_floor: float = 1e-3
    max_pole_radius: float | None = 0.90
    energy_floor_rms: float = 1e-8
    known_tract: VocalTractModel | None = None

    def __post_init__(self):
        if self.tau_mode not in ("global", "per-frame"):
            raise ValueError("tau_mode must be 'global' or 'per-frame'")
        if self.integration not in ("spectral", "leaky"):
            raise ValueError("integration must be 'spectral' or 'leaky'")
        if not (0.0 < self.integrator_pole < 1.0):
            raise ValueError("integrator_pole must be in (0, 1)")

    def plan_for(self, rate_hz: float) -> FramePlan:
        return self.frame if self.frame is not None else FramePlan.for_rate(rate_hz)


@dataclass(frozen=True)
class FrameRecord:
    index: int
    voiced: bool
    f0_hz: float | None = None
    tau_d_samples: int | None = None
    correlation_peak: float | None = None
    lpc_gain: float | None = None


@dataclass(frozen=True)
class TransformOutput:
    e_hat: SampledSignal
    x_hat: SampledSignal
    d_hat: SampledSignal
    per_frame: tuple
    global_tau_samples: int
    config: TransformConfig

    def voiced_mask(self) -> np.ndarray:
        return np.array([r.voiced for r in self.per_frame], dtype=bool)


def detect_voicing(frame: np.ndarray, rate_hz: float, threshold: float,
                   energy_floor_rms: float = 1e-8) -> tuple[bool, float | None]:
    """Voiced iff the normalized autocorrelation peak in the pitch-lag band
    exceeds the threshold and the frame RMS clears the energy floor.

    Lags span rate/1000 to rate/90 samples (pitch 90-1000 Hz). Correlations
    are normalized by the energies of the overlapping segments, so a
    perfectly periodic frame scores ~1 regardless of lag. Among lags within
    85% of the best score the smallest is taken, which suppresses subharmonic
    (octave-down) picks; f0 = rate / lag.
    """
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    lag_min = max(2, int(np.floor(rate_hz / VOICING_F0_HIGH_HZ)))
    lag_max = int(np.ceil(rate_hz / VOICING_F0_LOW_HZ))
    if n < 2 * lag_max:
        raise ValueError(
            f"frame of {n} samples too short for voicing (need {2 * lag_max})"
        )
    rms = float(np.sqrt(np.mean(frame**2)))
    if rms <= energy_floor_rms:
        return False, None
    scores = np.full(lag_max + 1, -np.inf)
    for k in range(lag_min, lag_max + 1):
        head, tail = frame[:n - k], frame[k:]
        denom = np.sqrt(float(head @ head) * float(tail @ tail))
        if denom > 0:
            scores[k] = float(head @ tail) / denom
    best_lag = int(np.argmax(scores))
    best = scores[best_lag]
    if not (best > threshold):
        return False, None
    # subharmonic guard: prefer an integer submultiple of the peak lag whose
    # score is nearly as high (an octave-down pick scores ~equal at 2x lag)
    for m in range(best_lag // lag_min, 1, -1):
        candidate = int(round(best_lag / m))
        if candidate < lag_min:
            continue
        lo, hi = max(lag_min, candidate - 1), min(lag_max, candidate + 1)
        if scores[lo:hi + 1].max() >= 0.85 * best:
            best_lag = lo + int(np.argmax(scores[lo:hi + 1]))
            break
    return True, rate_hz / best_lag


def estimate_delay(x_hat_frame: np.ndarray, d_frame: np.ndarray,
                   max_lag: int) -> tuple[int, float]:
    """Physical (non-negative) delay of the radar frame behind the
    fold-displacement estimate, by normalized cross-correlation.

    Both frames are mean-removed before correlating; the search covers
    [0, max_lag] and ties go to the smallest lag.
    """
    a = np.asarray(x_hat_frame, dtype=np.float64)
    b = np.asarray(d_frame, dtype=np.float64)
    if max_lag >= min(len(a), len(b)):
        raise ValueError("max_lag must be smaller than the frame length")
    a = a - a.mean()
    b = b - b.mean()
    energy = np.sqrt(float(a @ a) * float(b @ b))
    if energy == 0.0:
        raise ValueError("degenerate (constant) frame: delay undefined")
    lags = np.arange(0, max_lag + 1)
    r = correlation_series(a, b, lags) / energy
    best = int(np.argmax(r))   # argmax returns the first (smallest) max lag
    return best, float(np.clip(r[best], -1.0, 1.0))


def integrate_excitation(e_hat: SampledSignal, pole: float) -> SampledSignal:
    """Leaky running sum x[n] = pole * x[n-1] + e[n] / rate.

    Bounded for bounded input; drift/baseline handling (mean removal,
    high-pass) is the caller's concern.
    """
    if not (0.0 < pole < 1.0):
        raise ValueError("pole must be in (0, 1)")
    y = lfilter([1.0 / e_hat.rate_hz], [1.0, -pole], e_hat.samples)
    return e_hat.with_samples(y, "fold_displacement_estimate")


def _frame_slices(n_samples: int, plan: FramePlan):
    n = plan.n_frames(n_samples)
    return [(i, i * plan.hop) for i in range(n)]


RELATIVE_ENERGY_FLOOR = 1e-2   # frames 40 dB below the whole-signal RMS are silence


def voicing_mask(s: SampledSignal, plan: FramePlan, threshold: float,
                 energy_floor_rms: float = 1e-8) -> np.ndarray:
    """Voiced flag per analysis frame.

    The energy floor sits 40 dB below the whole-signal RMS (with an absolute
    fallback) so leakage-level content in silent stretches never counts as
    voiced, while the decision stays invariant under rescaling.
    """
    floor = max(energy_floor_rms,
                RELATIVE_ENERGY_FLOOR * float(np.sqrt(np.mean(s.samples**2))))
    flags = []
    for _, start in _frame_slices(len(s), plan):
        frame = s.samples[start:start + plan.window_len]
        flag, _ = detect_voicing(frame, s.rate_hz, threshold, floor)
        flags.append(flag)
    return np.array(flags, dtype=bool)


def transform_speech(s: SampledSignal, d: SampledSignal,
                     cfg: TransformConfig | None = None) -> TransformOutput:
    """Run the full speech-to-displacement model transform.

    Per voiced frame: LPC (or the supplied known tract), inverse filtering
    with preceding-sample history so the residual has no warm-up error,
    overlap-add of the residual, one band-limited integration to the fold
    displacement estimate, per-frame delay estimation against the radar
    displacement, and assembly of the delayed, unit-RMS-normalized
    displacement estimate. The absolute flow scale is unobservable, so the
    output is normalized rather than scaled by 1/K; per-window spectrum
    normalization makes the evaluation scale-free anyway. When the detected
    pitch period is shorter than the configured order the per-frame order is
    capped below the period, otherwise the predictor cancels the pitch cycle
    itself instead of the tract envelope.
    """
    if cfg is None:
        cfg = TransformConfig()
    s.require_same_rate(d)
    if len(s) != len(d):
        raise ValueError(f"length mismatch: speech {len(s)} vs displacement {len(d)}")
    rate = s.rate_hz
    plan = cfg.plan_for(rate)
    n_win = plan.window_len
    max_lag = int(round(cfg.max_lag_ms * 1e-3 * rate))
    if max_lag >= n_win:
        raise ValueError("max_lag_ms must stay below the frame length")
    slices = _frame_slices(len(s), plan)
    if not slices:
        raise ValueError("signal shorter than one analysis window")

    window = hann_window(n_win)
    e_hat = np.zeros(len(s))
    weight = np.zeros(len(s))
    voiced: list[bool] = []
    f0s: list[float | None] = []
    gains: list[float | None] = []
    bypass = None
    if cfg.known_tract is not None:
        bypass = np.concatenate(([1.0], cfg.known_tract.coefficients))
    floor = max(cfg.energy_floor_rms,
                RELATIVE_ENERGY_FLOOR * float(np.sqrt(np.mean(s.samples**2))))

    for i, start in slices:
        frame = s.samples[start:start + n_win]
        is_voiced, f0 = detect_voicing(frame, rate, cfg.voicing_threshold, floor)
        taps = None
        gain = None
        if is_voiced:
            if bypass is not None:
                taps = bypass
                gain = cfg.known_tract.gain
            else:
                order = cfg.lpc_order
                if f0 is not None:
                    # keep the predictor shorter than the pitch period so it
                    # models the envelope instead of predicting the pitch cycle
                    period = rate / f0
                    if period < order + 1:
                        order = max(3, int(np.floor(period)) - 1)
                model = lpc_analyze(
                    frame, order, cfg.pre_emphasis, rate_hz=rate,
                    lag_window_hz=cfg.lag_window_hz, noise_floor=cfg.noise_floor,
                    max_pole_radius=cfg.max_pole_radius,
                    history=s.samples[start - 1] if start > 0 else 0.0,
                )
                if model is None:
                    is_voiced = False
                else:
                    taps = model.error_filter()
                    gain = model.gain
        voiced.append(is_voiced)
        f0s.append(f0 if is_voiced else None)
        gains.append(gain)
        if not is_voiced:
            continue
        order = len(taps) - 1
        lo = max(0, start - order)
        residual = lfilter(taps, [1.0], s.samples[lo:start + n_win])[start - lo:]
        missing = order - (start - lo)
        if missing > 0:
            residual[:missing] = 0.0   # no history exists at the signal head
        e_hat[start:start + n_win] += residual * window
        weight[start:start + n_win] += window

    if not any(voiced):
        diagnostics = [FrameRecord(index=i, voiced=False) for i, _ in slices]
        raise NoVoicedFramesError(
            f"nothing to transform: all {len(slices)} frames unvoiced or silent",
            diagnostics,
        )

    active = weight > 1e-8
    e_hat[active] /= weight[active]
    e_hat[~active] = 0.0

    if cfg.integration == "spectral":
        x_hat = integrate_spectral(e_hat, rate)
    else:
        x_hat = integrate_excitation(
            SampledSignal(e_hat, rate), cfg.integrator_pole).samples
        x_hat = x_hat - x_hat[active].mean() if active.any() else x_hat
    x_hat = x_hat.copy()
    x_hat[~active] = 0.0

    taus: list[int | None] = []
    peaks: list[float | None] = []
    for (i, start), is_voiced in zip(slices, voiced):
        if not is_voiced:
            taus.append(None)
            peaks.append(None)
            continue
        try:
            tau, peak = estimate_delay(x_hat[start:start + n_win],
                                       d.samples[start:start + n_win], max_lag)
        except ValueError:
            tau, peak = None, None
        taus.append(tau)
        peaks.append(peak)

    observed = [t for t in taus if t is not None]
    global_tau = int(round(float(np.median(observed)))) if observed else 0

    if cfg.tau_mode == "global":
        d_hat = np.zeros(len(s))
        if global_tau < len(s):
            d_hat[global_tau:] = x_hat[:len(s) - global_tau]
    else:
        d_hat = np.zeros(len(s))
        dw = np.zeros(len(s))
        for (i, start), is_voiced, tau in zip(slices, voiced, taus):
            if not is_voiced:
                continue
            shift = tau if tau is not None else global_tau
            piece = np.zeros(n_win)
            src_lo = start - shift
            if src_lo >= 0:
                piece[:] = x_hat[src_lo:src_lo + n_win]
            else:
                piece[-src_lo:] = x_hat[:n_win + src_lo]
            d_hat[start:start + n_win] += piece * window
            dw[start:start + n_win] += window
        ok = dw > 1e-8
        d_hat[ok] /= dw[ok]
        d_hat[~ok] = 0.0

    rms = float(np.sqrt(np.mean(d_hat**2)))
    if rms > 0:
        d_hat = d_hat / rms

    records = tuple(
        FrameRecord(index=i, voiced=v, f0_hz=f0, tau_d_samples=t,
                    correlation_peak=p, lpc_gain=g)
        for (i, _), v, f0, t, p, g in zip(slices, voiced, f0s, taus, peaks, gains)
    )
    return TransformOutput(
        e_hat=SampledSignal(e_hat, rate, "excitation_estimate"),
        x_hat=SampledSignal(x_hat, rate, "fold_displacement_estimate"),
        d_hat=SampledSignal(d_hat, rate, "neck_displacement_estimate"),
        per_frame=records,
        global_tau_samples=global_tau,
        config=cfg,
    )
