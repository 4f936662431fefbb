"""Analysis/synthesis filter bank for the 48-band complex spectrogram.

A 96-sample frame with a 48-sample hop (2 ms at 24 kHz) and a square-root
periodic Hann window on both sides.  ``sqrt(w) * sqrt(w)`` is a periodic
Hann window, which overlap-adds to exactly one at 50% overlap, so the pair
reconstructs perfectly everywhere except the first half frame.

Frame ``k`` covers samples ``[k * hop, k * hop + frame_len)``; there are
``ceil(len / hop)`` frames, the tail being zero-padded, so only the first
hop of a signal lacks a second overlapping window.  The synthesized
output is aligned with the input (no shift).  Only bins
``0..47`` are processed downstream; the Nyquist bin is carried along.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySignalError, GeometryError, SampleRateError

SAMPLE_RATE = 24000
FRAME_LEN = 96
HOP = 48
N_STORED_BINS = FRAME_LEN // 2 + 1
N_BANDS = FRAME_LEN // 2
NYQUIST_BIN = N_STORED_BINS - 1


def sqrt_hann(frame_len: int = FRAME_LEN) -> np.ndarray:
    n = np.arange(frame_len)
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * n / frame_len))


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise GeometryError(f"waveform must be mono, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise SampleRateError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise EmptySignalError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass
class Spectrogram:
    """Complex frames x bins grid with the geometry it was produced with."""

    data: np.ndarray
    hop: int = HOP
    frame_len: int = FRAME_LEN
    sample_rate: int = SAMPLE_RATE
    n_samples: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise GeometryError(f"spectrogram data must be 2-D, got {self.data.shape}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "Spectrogram":
        return Spectrogram(data, self.hop, self.frame_len, self.sample_rate, self.n_samples)


@dataclass(frozen=True)
class FilterBank:
    frame_len: int = FRAME_LEN
    hop: int = HOP
    sample_rate: int = SAMPLE_RATE
    window: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.frame_len != 2 * self.hop:
            raise GeometryError("only 50% overlap is supported (frame_len == 2 * hop)")
        if self.window is None:
            object.__setattr__(self, "window", sqrt_hann(self.frame_len))

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2 + 1

    @property
    def hop_ms(self) -> float:
        return 1000.0 * self.hop / self.sample_rate

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.frame_len:
            raise EmptySignalError(
                f"signal of {n_samples} samples is shorter than one frame ({self.frame_len})"
            )
        # enough frames that every sample past the first hop is covered twice
        return math.ceil(n_samples / self.hop)

    def analyze(self, w: Waveform | np.ndarray) -> Spectrogram:
        x = self._samples(w)
        n_frames = self.n_frames(len(x))
        padded_len = (n_frames - 1) * self.hop + self.frame_len
        x = np.concatenate([x, np.zeros(padded_len - len(x))])
        frames = np.lib.stride_tricks.sliding_window_view(x, self.frame_len)[:: self.hop]
        data = np.fft.rfft(frames * self.window, axis=1)
        return Spectrogram(data, self.hop, self.frame_len, self.sample_rate, n_samples=len(w))

    def synthesize(self, s: Spectrogram, length: int | None = None) -> Waveform:
        self.check_geometry(s)
        if length is None:
            length = s.n_samples
        frames = np.fft.irfft(s.data, n=self.frame_len, axis=1) * self.window
        y = overlap_add(frames, self.hop)
        if length is not None:
            y = np.concatenate([y, np.zeros(max(0, length - len(y)))])[:length]
        return Waveform(y, self.sample_rate)

    def synthesize_adjoint(self, grad: np.ndarray, n_frames: int) -> np.ndarray:
        """Reverse-mode pass of :meth:`synthesize`.

        Given dL/dy for the synthesized waveform, return dL/dRe + j dL/dIm
        for every stored bin.  The imaginary parts of DC and Nyquist are
        discarded by the inverse real transform, so their gradient is zero.
        """
        padded_len = (n_frames - 1) * self.hop + self.frame_len
        g = np.zeros(padded_len)
        n = min(len(grad), padded_len)
        g[:n] = grad[:n]
        frames = np.lib.stride_tricks.sliding_window_view(g, self.frame_len)[:: self.hop]
        out = np.fft.rfft(frames * self.window, axis=1) * (2.0 / self.frame_len)
        out[:, 0] = out[:, 0].real / 2.0
        out[:, -1] = out[:, -1].real / 2.0
        return out

    def check_geometry(self, s: Spectrogram):
        if (s.hop, s.frame_len, s.sample_rate) != (self.hop, self.frame_len, self.sample_rate):
            raise GeometryError(
                f"spectrogram geometry (hop={s.hop}, frame_len={s.frame_len}, "
                f"sr={s.sample_rate}) does not match the bank "
                f"(hop={self.hop}, frame_len={self.frame_len}, sr={self.sample_rate})"
            )
        if s.n_bins != self.n_bins:
            raise GeometryError(f"expected {self.n_bins} bins, got {s.n_bins}")
        if not np.all(np.isfinite(s.data)):
            raise GeometryError("spectrogram contains non-finite values")

    def _samples(self, w) -> np.ndarray:
        if isinstance(w, Waveform):
            if w.sample_rate != self.sample_rate:
                raise SampleRateError(
                    f"waveform is {w.sample_rate} Hz, filter bank expects {self.sample_rate} Hz"
                )
            return w.samples
        return np.asarray(w, dtype=np.float64)

    def algorithmic_latency(self, offset: int) -> float:
        """Delay in ms from frame buffering plus ``offset`` lookahead frames."""
        return algorithmic_latency(offset, self.frame_len, self.hop, self.sample_rate)

    def latency_samples(self, offset: int) -> int:
        return self.frame_len + max(offset, 0) * self.hop


def overlap_add(frames: np.ndarray, hop: int) -> np.ndarray:
    n_frames, frame_len = frames.shape
    y = np.zeros((n_frames - 1) * hop + frame_len)
    # hop == frame_len / 2: two interleaved, non-overlapping layers
    step = frame_len // hop
    for phase in range(step):
        part = frames[phase::step].reshape(-1)
        start = phase * hop
        y[start : start + len(part)] += part
    return y


def algorithmic_latency(
    offset: int, frame_len: int = FRAME_LEN, hop: int = HOP, sample_rate: int = SAMPLE_RATE
) -> float:
    if offset < -1:
        raise ValueError(f"offset must be >= -1, got {offset}")
    return (frame_len + max(offset, 0) * hop) / sample_rate * 1000.0


DEFAULT_BANK = FilterBank()


def analyze(w: Waveform) -> Spectrogram:
    return DEFAULT_BANK.analyze(w)


def synthesize(s: Spectrogram, length: int | None = None) -> Waveform:
    return DEFAULT_BANK.synthesize(s, length)


def spectrogram_energy(s: Spectrogram) -> float:
    """One-sided spectral energy scaled back to the time domain.

    For the sqrt-Hann pair this equals the signal energy for any waveform
    that is silent over its first and last half frame.
    """
    weights = np.full(s.n_bins, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    return float(np.sum(weights * np.abs(s.data) ** 2) / s.frame_len)


class StreamingAnalyzer:
    """Frame-at-a-time analysis.  Feed ``hop`` samples, get a frame back
    once a full ``frame_len`` window is buffered."""

    def __init__(self, bank: FilterBank = DEFAULT_BANK):
        self.bank = bank
        self._buf = np.zeros(0)

    def push(self, block: np.ndarray) -> np.ndarray | None:
        block = np.asarray(block, dtype=np.float64)
        if len(block) != self.bank.hop:
            raise GeometryError(f"expected blocks of {self.bank.hop} samples, got {len(block)}")
        self._buf = np.concatenate([self._buf, block])[-self.bank.frame_len :]
        if len(self._buf) < self.bank.frame_len:
            return None
        return np.fft.rfft(self._buf * self.bank.window)


class StreamingSynthesizer:
    """Overlap-add one frame at a time; each pushed frame completes ``hop``
    output samples (the first half of that frame)."""

    def __init__(self, bank: FilterBank = DEFAULT_BANK):
        self.bank = bank
        self._tail = np.zeros(bank.frame_len - bank.hop)

    def push(self, frame: np.ndarray) -> np.ndarray:
        y = np.fft.irfft(frame, n=self.bank.frame_len) * self.bank.window
        out = self._tail + y[: self.bank.hop]
        self._tail = y[self.bank.hop :].copy()
        return out
