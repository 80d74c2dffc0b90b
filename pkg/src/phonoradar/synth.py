"""Forward co-simulation of one speaker: vocal fold displacement, glottal
excitation, speech through an all-pole tract, and neck surface displacement,
with every hidden parameter retained as ground truth."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import io as pio
from .signals import SampledSignal, differentiate, resample_decimate

__all__ = [
    "GlottalConfig",
    "NeckChannel",
    "VocalTractModel",
    "SyntheticSubject",
    "synth_vocal_fold_displacement",
    "neck_displacement",
    "excitation_from_displacement",
    "synthesize_speech",
    "random_vocal_tract",
    "make_subject",
    "save_subject",
    "load_subject",
    "SUBJECT_MANIFEST",
]

SUBJECT_MANIFEST = "subject.json"

F0_MIN_HZ = 90.0
F0_MAX_HZ = 1000.0


@dataclass(frozen=True)
class GlottalConfig:
    """Fold-vibration parameters: pitch, open quotient, peak displacement (m),
    flow gain, and cycle-to-cycle pitch perturbation in percent."""

    f0_hz: float
    open_quotient: float = 0.6
    amplitude: float = 1e-4
    flow_gain_k: float = 1.0
    jitter_pct: float = 0.0

    def __post_init__(self):
        if not (F0_MIN_HZ <= self.f0_hz <= F0_MAX_HZ):
            raise ValueError(f"f0_hz must be in [{F0_MIN_HZ:g}, {F0_MAX_HZ:g}] Hz")
        if not (0.0 < self.open_quotient < 1.0):
            raise ValueError("open_quotient must be in (0, 1)")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if not (self.flow_gain_k > 0):
            raise ValueError("flow_gain_k must be positive")
        if self.jitter_pct < 0:
            raise ValueError("jitter_pct must be non-negative")


@dataclass(frozen=True)
class NeckChannel:
    """Tissue path from the folds to the neck surface: scale and delay."""

    k_d: float = 1.0
    tau_d_s: float = 0.0

    def __post_init__(self):
        if not (self.k_d > 0):
            raise ValueError("k_d must be positive")
        if not (0.0 <= self.tau_d_s < 5e-3):
            raise ValueError("tau_d_s must be in [0, 5 ms)")


@dataclass(frozen=True)
class VocalTractModel:
    """All-pole tract 1/A(z) with A(z) = 1 + sum a_i z^-i.

    An empty coefficient list is the identity tract (pass-through).
    """

    coefficients: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=np.float64).copy()
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)
        if not (self.gain > 0):
            raise ValueError("gain must be positive")
        if self.order and np.max(np.abs(self.poles())) >= 1.0:
            raise ValueError("unstable tract: poles must lie inside the unit circle")

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def error_filter(self) -> np.ndarray:
        return np.concatenate(([1.0], self.coefficients))

    def poles(self) -> np.ndarray:
        if self.order == 0:
            return np.array([])
        return np.roots(self.error_filter())


@dataclass(frozen=True)
class SyntheticSubject:
    """One simulated speaker: the four signals plus the parameters that made them."""

    x: SampledSignal
    e: SampledSignal
    s: SampledSignal
    d: SampledSignal
    glottal: GlottalConfig
    neck: NeckChannel
    tract: VocalTractModel
    noise_snr_db: float | None = None
    seed: int | None = None

    def __post_init__(self):
        for sig in (self.e, self.s, self.d):
            self.x.require_same_rate(sig)
            if len(sig) != len(self.x):
                raise ValueError("all subject signals must share one length")

    @property
    def rate_hz(self) -> float:
        return self.x.rate_hz

    def tau_d_samples(self) -> int:
        return int(round(self.neck.tau_d_s * self.rate_hz))


def synth_vocal_fold_displacement(cfg: GlottalConfig, duration_s: float,
                                  rate_hz: float,
                                  rng: np.random.Generator | None = None,
                                  lead_in_s: float = 0.0) -> SampledSignal:
    """Rosenberg-style polynomial glottal pulse train.

    Each cycle opens for open_quotient of the period: a cubic rise over the
    first two thirds of the open phase (zero slope at both ends) and a
    quadratic fall over the last third, zero during the closed phase, peak at
    cfg.amplitude. jitter_pct perturbs each period uniformly. An optional
    silent lead-in precedes the first pulse.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if rate_hz < 4.0 * cfg.f0_hz:
        raise ValueError(
            f"rate {rate_hz} Hz too low for f0 {cfg.f0_hz} Hz (need >= 4*f0)"
        )
    if cfg.jitter_pct > 0 and rng is None:
        rng = np.random.default_rng()
    n = int(round((duration_s + lead_in_s) * rate_hz))
    x = np.zeros(n)
    t0 = lead_in_s
    t_end = lead_in_s + duration_s
    rise_frac = 2.0 / 3.0  # fixed speed quotient 2:1 within the open phase
    while t0 < t_end:
        period = 1.0 / cfg.f0_hz
        if cfg.jitter_pct > 0:
            period *= 1.0 + (cfg.jitter_pct / 100.0) * rng.uniform(-1.0, 1.0)
        t_open = cfg.open_quotient * period
        i0 = int(np.ceil(t0 * rate_hz))
        i1 = min(int(np.ceil((t0 + t_open) * rate_hz)), n)
        if i1 > i0:
            phase = (np.arange(i0, i1) / rate_hz - t0) / t_open
            u = phase / rise_frac
            v = (phase - rise_frac) / (1.0 - rise_frac)
            pulse = np.where(phase < rise_frac, 3.0 * u**2 - 2.0 * u**3, 1.0 - v**2)
            x[i0:i1] = cfg.amplitude * np.clip(pulse, 0.0, None)
        t0 += period
    return SampledSignal(x, rate_hz, "vocal_fold_displacement")


def neck_displacement(x: SampledSignal, ch: NeckChannel) -> SampledSignal:
    """Scaled, delayed copy of the fold displacement; head zero-padded."""
    shift = int(round(ch.tau_d_s * x.rate_hz))
    out = np.zeros(len(x))
    if shift < len(x):
        out[shift:] = ch.k_d * x.samples[:len(x) - shift]
    return SampledSignal(out, x.rate_hz, "neck_displacement")


def excitation_from_displacement(x: SampledSignal, k: float) -> SampledSignal:
    """Glottal excitation as K times the time derivative of fold displacement.

    Uses the zero-phase band-limited differentiator so that band-limited
    integration is its exact inverse; see signals.differentiate for edge
    caveats on strongly aperiodic inputs.
    """
    if len(x) < 2:
        raise ValueError("need at least two samples")
    return SampledSignal(k * differentiate(x.samples, x.rate_hz),
                         x.rate_hz, "excitation")


def synthesize_speech(e: SampledSignal, tract: VocalTractModel,
                      noise_snr_db: float | None = None,
                      rng: np.random.Generator | None = None) -> SampledSignal:
    """Excitation through the all-pole tract, optional additive white noise."""
    s = lfilter([tract.gain], tract.error_filter(), e.samples)
    if noise_snr_db is not None:
        if rng is None:
            rng = np.random.default_rng()
        power = float(np.mean(s**2))
        sigma = np.sqrt(power / 10.0 ** (noise_snr_db / 10.0))
        s = s + sigma * rng.standard_normal(len(s))
    return SampledSignal(s, e.rate_hz, "speech")


def random_vocal_tract(rng: np.random.Generator, rate_hz: float = 2000.0) -> VocalTractModel:
    """Vowel-like random stable tract for cohort synthesis.

    One strong mid/high resonance (550-880 Hz at a 2 kHz rate), one lower
    resonance, and an optional weak resonance near the band edge; pole radii
    keep bandwidths physiological and the filter comfortably stable.
    """
    scale = rate_hz / 2000.0
    pairs = [
        (rng.uniform(0.90, 0.97), rng.uniform(550.0, 880.0) * scale),
        (rng.uniform(0.85, 0.95), rng.uniform(180.0, 450.0) * scale),
    ]
    if rng.random() < 0.5:
        pairs.append((rng.uniform(0.80, 0.90), rng.uniform(860.0, 960.0) * scale))
    poles = np.array([radius * np.exp(2j * np.pi * freq / rate_hz)
                      for radius, freq in pairs])
    coeffs = np.poly(np.concatenate([poles, poles.conj()])).real
    return VocalTractModel(coefficients=coeffs[1:], gain=1.0)


def _fade_out(samples: np.ndarray, n_fade: int) -> np.ndarray:
    if n_fade <= 0 or n_fade > len(samples):
        return samples
    out = samples.copy()
    ramp = 0.5 * (1.0 + np.cos(np.pi * np.arange(n_fade) / n_fade))
    out[-n_fade:] *= ramp
    return out


def make_subject(glottal: GlottalConfig, neck: NeckChannel, tract: VocalTractModel,
                 duration_s: float, rate_hz: float,
                 noise_snr_db: float | None = None,
                 seed: int | None = None, oversample: int = 8,
                 lead_in_s: float = 0.0, fade_out_s: float = 0.02) -> SyntheticSubject:
    """Build an internally consistent subject.

    The fold displacement is generated at oversample * rate_hz and decimated
    through the anti-alias chain so x is band-limited below the working
    Nyquist; e, s, d then follow from the model equations at rate_hz. A short
    fade ends the phonation so the spectral derivative sees no wrap-around
    step.
    """
    rng = np.random.default_rng(seed)
    if oversample > 1:
        hi = synth_vocal_fold_displacement(glottal, duration_s, rate_hz * oversample,
                                           rng, lead_in_s)
        hi = hi.with_samples(_fade_out(np.array(hi.samples),
                                       int(fade_out_s * hi.rate_hz)))
        x = resample_decimate(hi, rate_hz)
        x = SampledSignal(x.samples, rate_hz, "vocal_fold_displacement")
    else:
        x = synth_vocal_fold_displacement(glottal, duration_s, rate_hz, rng, lead_in_s)
        x = x.with_samples(_fade_out(np.array(x.samples), int(fade_out_s * rate_hz)))
    e = excitation_from_displacement(x, glottal.flow_gain_k)
    s = synthesize_speech(e, tract, noise_snr_db, rng)
    d = neck_displacement(x, neck)
    return SyntheticSubject(x=x, e=e, s=s, d=d, glottal=glottal, neck=neck,
                            tract=tract, noise_snr_db=noise_snr_db, seed=seed)


_SUBJECT_FILES = {
    "speech": "speech.wav",
    "vocal_fold": "vocal_fold.csv",
    "excitation": "excitation.csv",
    "neck_true": "neck_true.csv",
}


def save_subject(subject: SyntheticSubject, directory: str | Path) -> Path:
    """Write subject.json plus the four signal files into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pio.write_wav(directory / _SUBJECT_FILES["speech"], subject.s)
    pio.write_csv_signal(directory / _SUBJECT_FILES["vocal_fold"], subject.x)
    pio.write_csv_signal(directory / _SUBJECT_FILES["excitation"], subject.e)
    pio.write_csv_signal(directory / _SUBJECT_FILES["neck_true"], subject.d)
    manifest = {
        "format": "subject-v1",
        "seed": subject.seed,
        "rate_hz": subject.rate_hz,
        "n_samples": len(subject.x),
        "glottal": asdict(subject.glottal),
        "neck": asdict(subject.neck),
        "tract": {
            "coefficients": subject.tract.coefficients.tolist(),
            "gain": subject.tract.gain,
        },
        "noise_snr_db": subject.noise_snr_db,
        "files": dict(_SUBJECT_FILES),
    }
    path = directory / SUBJECT_MANIFEST
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_subject(directory: str | Path) -> SyntheticSubject:
    directory = Path(directory)
    with open(directory / SUBJECT_MANIFEST) as fh:
        manifest = json.load(fh)
    files = manifest["files"]
    x = pio.read_csv_signal(directory / files["vocal_fold"], "vocal_fold_displacement")
    e = pio.read_csv_signal(directory / files["excitation"], "excitation")
    s = pio.read_wav(directory / files["speech"], "speech")
    d = pio.read_csv_signal(directory / files["neck_true"], "neck_displacement")
    return SyntheticSubject(
        x=x, e=e, s=s, d=d,
        glottal=GlottalConfig(**manifest["glottal"]),
        neck=NeckChannel(**manifest["neck"]),
        tract=VocalTractModel(
            coefficients=np.array(manifest["tract"]["coefficients"]),
            gain=manifest["tract"]["gain"],
        ),
        noise_snr_db=manifest["noise_snr_db"],
        seed=manifest["seed"],
    )
