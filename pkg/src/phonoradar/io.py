"""File formats: WAV (PCM16 / float32) for speech, CSV and raw float32 with a
JSON sidecar for displacement traces."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .signals import SampledSignal

__all__ = [
    "read_wav", "write_wav",
    "read_csv_signal", "write_csv_signal",
    "read_f32_signal", "write_f32_signal",
]


def write_wav(path: str | Path, sig: SampledSignal, encoding: str = "float32") -> None:
    rate = int(round(sig.rate_hz))
    if abs(rate - sig.rate_hz) > 1e-6:
        raise ValueError("WAV requires an integer sample rate; use CSV instead")
    if encoding == "float32":
        wavfile.write(str(path), rate, sig.samples.astype(np.float32))
    elif encoding == "pcm16":
        clipped = np.clip(sig.samples, -1.0, 1.0)
        wavfile.write(str(path), rate, np.round(clipped * 32767.0).astype(np.int16))
    else:
        raise ValueError(f"unknown encoding {encoding!r}")


def read_wav(path: str | Path, label: str = "") -> SampledSignal:
    rate, data = wavfile.read(str(path))
    if data.ndim > 1:
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format {data.dtype}")
    return SampledSignal(samples, float(rate), label)


def write_csv_signal(path: str | Path, sig: SampledSignal) -> None:
    """One float per line after a 'rate_hz,<value>' header line."""
    with open(path, "w") as fh:
        fh.write(f"rate_hz,{float(sig.rate_hz)!r}\n")
        for v in sig.samples:
            fh.write(f"{float(v)!r}\n")


def read_csv_signal(path: str | Path, label: str = "") -> SampledSignal:
    with open(path) as fh:
        header = fh.readline().strip()
        key, _, value = header.partition(",")
        if key.strip() != "rate_hz":
            raise ValueError(f"{path}: expected 'rate_hz,<value>' header, got {header!r}")
        rate = float(value)
        samples = np.array([float(line) for line in fh if line.strip()])
    return SampledSignal(samples, rate, label)


def write_f32_signal(path: str | Path, sig: SampledSignal) -> None:
    """Raw little-endian float32 samples plus '<path>.json' sidecar."""
    path = Path(path)
    sig.samples.astype("<f4").tofile(path)
    sidecar = {"rate_hz": sig.rate_hz, "label": sig.label, "n_samples": len(sig)}
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def read_f32_signal(path: str | Path) -> SampledSignal:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        sidecar = json.load(fh)
    samples = np.fromfile(path, dtype="<f4").astype(np.float64)
    return SampledSignal(samples, float(sidecar["rate_hz"]), sidecar.get("label", ""))
