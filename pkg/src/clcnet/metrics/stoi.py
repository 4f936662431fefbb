"""Short-time objective intelligibility (Taal et al., 2011).

Signals are resampled to 10 kHz with a windowed-sinc polyphase filter,
frames where the clean signal is more than 40 dB below its loudest frame
are dropped, and 15 one-third-octave band envelopes are compared over
384 ms segments after level normalization and clipping at -15 dB SDR.
Frame enumeration follows the reference MATLAB implementation.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.signal import resample_poly

from ..errors import DataError

FS = 10000
FRAME = 256
HOP = FRAME // 2
NFFT = 512
N_BANDS = 15
MIN_FREQ = 150.0
SEGMENT = 30
BETA_DB = -15.0
DYN_RANGE_DB = 40.0
EPS = np.finfo(np.float64).eps


def _hann(n: int) -> np.ndarray:
    # MATLAB hanning(n): symmetric, without the zero end points
    return np.hanning(n + 2)[1:-1]


@lru_cache(maxsize=None)
def third_octave_matrix(fs: int = FS, nfft: int = NFFT, n_bands: int = N_BANDS,
                        min_freq: float = MIN_FREQ):
    freqs = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(n_bands, dtype=np.float64)
    centers = min_freq * 2.0 ** (k / 3.0)
    lows = min_freq * 2.0 ** ((2 * k - 1) / 6.0)
    highs = min_freq * 2.0 ** ((2 * k + 1) / 6.0)
    obm = np.zeros((n_bands, len(freqs)))
    for b in range(n_bands):
        lo = int(np.argmin((freqs - lows[b]) ** 2))
        hi = int(np.argmin((freqs - highs[b]) ** 2))
        obm[b, lo:hi] = 1.0
    return obm, centers


def resample_to_10k(x: np.ndarray, fs: int) -> np.ndarray:
    if fs == FS:
        return np.asarray(x, dtype=np.float64)
    g = math.gcd(FS, fs)
    return resample_poly(np.asarray(x, dtype=np.float64), FS // g, fs // g)


def _frames(x: np.ndarray, frame: int, hop: int) -> np.ndarray:
    starts = np.arange(0, len(x) - frame, hop)
    if len(starts) == 0:
        return np.zeros((0, frame))
    return np.stack([x[s : s + frame] for s in starts])


def _overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    n, frame = frames.shape
    out = np.zeros((n - 1) * hop + frame) if n else np.zeros(0)
    for i in range(n):
        out[i * hop : i * hop + frame] += frames[i]
    return out


def remove_silent_frames(x, y, dyn_range=DYN_RANGE_DB, frame=FRAME, hop=HOP):
    w = _hann(frame)
    xf = _frames(x, frame, hop) * w
    yf = _frames(y, frame, hop) * w
    if len(xf) == 0:
        raise DataError("signal too short for STOI")
    energy = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + EPS)
    keep = energy > energy.max() - dyn_range
    return _overlap_add(xf[keep], hop), _overlap_add(yf[keep], hop)


def _band_envelopes(x: np.ndarray) -> np.ndarray:
    obm, _ = third_octave_matrix()
    spec = np.fft.rfft(_frames(x, FRAME, HOP) * _hann(FRAME), n=NFFT, axis=1)
    return np.sqrt(obm @ (np.abs(spec) ** 2).T)


def stoi(ref, est, sample_rate: int = 24000) -> float:
    """STOI of ``est`` against the clean reference ``ref``."""
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise DataError(f"length mismatch: {ref.shape} vs {est.shape}")
    if not np.any(ref):
        raise DataError("STOI reference is silent")
    x = resample_to_10k(ref, sample_rate)
    y = resample_to_10k(est, sample_rate)
    x, y = remove_silent_frames(x, y)
    xb = _band_envelopes(x)
    yb = _band_envelopes(y)
    n_frames = xb.shape[1]
    if n_frames < SEGMENT:
        raise DataError(
            f"STOI needs {SEGMENT} active frames (~{SEGMENT * HOP / FS:.2f} s), got {n_frames}"
        )
    xs = np.lib.stride_tricks.sliding_window_view(xb, SEGMENT, axis=1)
    ys = np.lib.stride_tricks.sliding_window_view(yb, SEGMENT, axis=1)
    # (bands, segments, SEGMENT)
    scale = np.linalg.norm(xs, axis=2, keepdims=True) / (
        np.linalg.norm(ys, axis=2, keepdims=True) + EPS
    )
    clip = 10.0 ** (-BETA_DB / 20.0)
    yp = np.minimum(ys * scale, xs * (1.0 + clip))
    yp = yp - yp.mean(axis=2, keepdims=True)
    xc = xs - xs.mean(axis=2, keepdims=True)
    yp = yp / (np.linalg.norm(yp, axis=2, keepdims=True) + EPS)
    xc = xc / (np.linalg.norm(xc, axis=2, keepdims=True) + EPS)
    return float(np.mean(np.sum(xc * yp, axis=2)))
