"""Strict mono WAV I/O: 16-bit PCM or 32-bit float, 24 kHz unless told otherwise."""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from ..errors import DataError, SampleRateError
from ..filterbank import SAMPLE_RATE, Waveform


def read_wav(path, expected_rate: int | None = SAMPLE_RATE) -> Waveform:
    try:
        rate, data = wavfile.read(os.fspath(path))
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim != 1:
        raise DataError(f"{path}: expected mono, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise DataError(f"{path}: unsupported sample format {data.dtype} (PCM16 or float32 only)")
    if expected_rate is not None and rate != expected_rate:
        raise SampleRateError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    return Waveform(samples, rate)


def write_wav(path, w: Waveform, fmt: str = "float32"):
    x = np.asarray(w.samples)
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    try:
        wavfile.write(os.fspath(path), w.sample_rate, data)
    except OSError as exc:
        raise DataError(f"{path}: cannot write WAV ({exc})") from exc
