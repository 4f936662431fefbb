"""Synthetic stand-ins for speech and noise recordings.

The speech generator produces a glottal-like harmonic source with a
gliding fundamental, vowel-dependent formant envelope, syllabic amplitude
modulation and pauses.  With the default f0 range (85-125 Hz) every
250 Hz analysis band below 8 kHz holds at least two harmonics.
"""

from __future__ import annotations

import numpy as np

from ..filterbank import SAMPLE_RATE, Waveform

NOISE_KINDS = ("white", "pink", "babble", "hum")
DEFAULT_F0_RANGE = (85.0, 125.0)
MAX_HARMONIC_HZ = 8000.0
CONTROL_STEP = 48

# (F1, F2, F3) in Hz
VOWELS = np.array([
    [730, 1090, 2440],
    [270, 2290, 3010],
    [300, 870, 2240],
    [530, 1840, 2480],
    [570, 840, 2410],
    [440, 1020, 2240],
    [660, 1720, 2410],
], dtype=np.float64)
FORMANT_BW = np.array([90.0, 110.0, 170.0])
FORMANT_GAIN = np.array([1.0, 0.6, 0.35])


def _smooth_track(rng, n, rate, lo, hi, step_s):
    n_ctrl = max(2, int(np.ceil(n / (step_s * rate))) + 2)
    ctrl = rng.uniform(lo, hi, n_ctrl)
    t_ctrl = np.arange(n_ctrl) * step_s * rate
    return np.interp(np.arange(n), t_ctrl, ctrl)


def _syllable_envelope(rng, n, rate):
    """Voiced segments with raised-cosine edges separated by pauses.
    Returns the envelope and the index of the syllable each sample is in."""
    env = np.zeros(n)
    syl = np.zeros(n, dtype=np.int64)
    pos = int(rng.uniform(0.02, 0.12) * rate)
    idx = 0
    ramp = int(0.02 * rate)
    while pos < n:
        length = int(rng.uniform(0.15, 0.40) * rate)
        end = min(n, pos + length)
        seg = np.ones(end - pos)
        r = min(ramp, len(seg) // 2)
        if r > 0:
            edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(r) / r)
            seg[:r] *= edge
            seg[-r:] *= edge[::-1]
        seg *= rng.uniform(0.6, 1.0)
        env[pos:end] = seg
        syl[pos:] = idx
        idx += 1
        pos = end + int(rng.uniform(0.05, 0.25) * rate)
    return env, syl, idx + 1


def synth_speech(seed: int, duration: float, f0_range=DEFAULT_F0_RANGE,
                 sample_rate: int = SAMPLE_RATE, pauses: bool = True) -> Waveform:
    lo, hi = float(f0_range[0]), float(f0_range[1])
    if duration <= 0:
        raise ValueError("duration must be positive")
    if not 80.0 <= lo <= hi <= 400.0:
        raise ValueError(f"f0 range must lie within [80, 400] Hz, got {f0_range}")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    f0 = _smooth_track(rng, n, sample_rate, lo, hi, 0.3) if hi > lo else np.full(n, lo)
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate + rng.uniform(0, 2 * np.pi)

    if pauses:
        env, syl, n_syl = _syllable_envelope(rng, n, sample_rate)
    else:
        env, syl, n_syl = np.ones(n), np.zeros(n, dtype=np.int64), 1
    vowel_idx = rng.integers(0, len(VOWELS), n_syl)
    formants = VOWELS[vowel_idx] * rng.uniform(0.92, 1.08, (n_syl, 3))
    # glide formants across syllable boundaries over ~40 ms
    ftrack = formants[syl]
    k = int(0.04 * sample_rate)
    kernel = np.ones(k) / k
    ftrack = np.stack([np.convolve(np.pad(ftrack[:, j], (k // 2, k - k // 2 - 1), mode="edge"),
                                   kernel, mode="valid") for j in range(3)], axis=1)
    # slow tremolo on top of the syllable envelope
    am = 1.0 + 0.15 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * np.arange(n) / sample_rate
                             + rng.uniform(0, 2 * np.pi))

    y = np.zeros(n)
    n_harm = int(MAX_HARMONIC_HZ // lo)
    harm_phase = rng.uniform(0, 2 * np.pi, n_harm + 1)
    # harmonic amplitudes vary slowly: evaluate them every 2 ms and interpolate
    ctrl = np.arange(0, n + CONTROL_STEP, CONTROL_STEP)
    ctrl_idx = np.minimum(ctrl, n - 1)
    f0_c, ftrack_c = f0[ctrl_idx], ftrack[ctrl_idx]
    seg, frac = np.divmod(np.arange(n), CONTROL_STEP)
    frac = frac / CONTROL_STEP
    step = np.exp(1j * phase)
    rot = np.ones(n, dtype=np.complex128)
    for h in range(1, n_harm + 1):
        rot *= step
        fh = h * f0_c
        if np.all(fh >= MAX_HARMONIC_HZ):
            break
        amp = np.full(len(ctrl), 0.05)
        for j in range(3):
            half_bw = FORMANT_BW[j] / 2.0
            amp += FORMANT_GAIN[j] / (1.0 + ((fh - ftrack_c[:, j]) / half_bw) ** 2)
        amp *= np.clip((MAX_HARMONIC_HZ - fh) / 200.0, 0.0, 1.0) * (fh / 100.0) ** -0.5
        a = amp[seg] + (amp[seg + 1] - amp[seg]) * frac
        y += a * (rot * np.exp(1j * harm_phase[h])).imag
    y *= env * am
    peak = np.max(np.abs(y))
    if peak > 0:
        y *= 0.5 / peak
    return Waveform(y, sample_rate)


def synth_noise(seed: int, duration: float, kind: str = "white",
                sample_rate: int = SAMPLE_RATE) -> Waveform:
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    if kind == "white":
        y = rng.standard_normal(n)
    elif kind == "pink":
        spec = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
        f = np.fft.rfftfreq(n, 1.0 / sample_rate)
        shape = np.zeros_like(f)
        shape[1:] = 1.0 / np.sqrt(f[1:])
        y = np.fft.irfft(spec * shape, n=n)
    elif kind == "babble":
        ranges = [(85, 125), (95, 150), (110, 180), (150, 250),
                  (180, 280), (200, 320), (90, 140), (160, 260)]
        y = np.zeros(n)
        for i, fr in enumerate(ranges):
            talker = synth_speech(int(rng.integers(2**31)), duration, fr, sample_rate).samples
            y += np.roll(talker, int(rng.integers(n)))
    elif kind == "hum":
        t = np.arange(n) / sample_rate
        base = 50.0 * rng.uniform(0.995, 1.005)
        y = np.zeros(n)
        for h in range(1, 41):
            y += np.sin(2 * np.pi * h * base * t + rng.uniform(0, 2 * np.pi)) / h
        y *= _smooth_track(rng, n, sample_rate, 0.3, 1.0, 0.25)
    else:
        raise ValueError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    y = y / (np.max(np.abs(y)) + 1e-12) * 0.5
    return Waveform(y, sample_rate)
