"""Noisy/target mixture construction.

SNR is measured over the speech-active part of the utterance: 10 ms
frames whose energy is within 40 dB of the loudest frame.  The target
keeps the same noise, attenuated by ``delta_snr_t`` dB, so a model
trained on it improves the SNR by at most that amount.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from ..filterbank import Waveform

SNR_SET = (-100.0, -5.0, 0.0, 5.0, 10.0, 20.0)
OFFSET_SET = (-6.0, 0.0, 6.0)
MAX_NOISES = 4
DELTA_SNR_T = 14.0
VAD_FRAME = 240
VAD_RANGE_DB = 40.0
SPEECH_LEVEL_DBFS = -25.0
PEAK_LIMIT = 0.99


@dataclass(frozen=True)
class MixConfig:
    snrs: tuple = SNR_SET
    offsets: tuple = OFFSET_SET
    max_noises: int = MAX_NOISES
    delta_snr_t: float = DELTA_SNR_T


@dataclass(frozen=True)
class MixtureSpec:
    speech_id: str
    noise_ids: tuple
    snr: float
    level_offsets: tuple
    delta_snr_t: float = DELTA_SNR_T
    seed: int = 0

    def __post_init__(self):
        if not 1 <= len(self.noise_ids) <= MAX_NOISES:
            raise DataError(f"need 1..{MAX_NOISES} noises, got {len(self.noise_ids)}")
        if len(self.level_offsets) != len(self.noise_ids):
            raise DataError("one level offset per noise is required")


@dataclass
class Mixture:
    spec: MixtureSpec
    clean: Waveform
    noise: Waveform
    noisy: Waveform
    target: Waveform


def active_mask(x: np.ndarray, frame: int = VAD_FRAME, range_db: float = VAD_RANGE_DB):
    """Sample mask of frames within ``range_db`` of the loudest frame."""
    n_frames = int(np.ceil(len(x) / frame))
    padded = np.zeros(n_frames * frame)
    padded[: len(x)] = x
    energy = np.sum(padded.reshape(n_frames, frame) ** 2, axis=1)
    if energy.max() <= 0:
        raise DataError("speech signal is silent; SNR is undefined")
    keep = 10 * np.log10(energy + 1e-300) > 10 * np.log10(energy.max()) - range_db
    return np.repeat(keep, frame)[: len(x)]


def measured_snr(clean: np.ndarray, noise: np.ndarray, mask: np.ndarray | None = None) -> float:
    if mask is None:
        mask = active_mask(clean)
    ps = np.mean(clean[mask] ** 2)
    pn = np.mean(noise[mask] ** 2)
    return float(10 * np.log10(ps / pn))


def fit_length(x: np.ndarray, n: int, rng) -> np.ndarray:
    """Random crop when longer than ``n``, loop from a random phase when shorter."""
    if len(x) >= n:
        start = int(rng.integers(0, len(x) - n + 1))
        return x[start : start + n]
    reps = int(np.ceil(n / len(x))) + 1
    start = int(rng.integers(0, len(x)))
    return np.tile(x, reps)[start : start + n]


def make_mixture(spec: MixtureSpec, corpus) -> Mixture:
    speech = corpus.speech[spec.speech_id]
    rate = speech.sample_rate
    clean = speech.samples.copy()
    mask = active_mask(clean)
    clean *= 10 ** (SPEECH_LEVEL_DBFS / 20) / np.sqrt(np.mean(clean[mask] ** 2))

    rng = np.random.default_rng(spec.seed)
    noise = np.zeros(len(clean))
    for nid, offset in zip(spec.noise_ids, spec.level_offsets):
        src = corpus.noise[nid]
        if src.sample_rate != rate:
            raise DataError(f"noise {nid} is {src.sample_rate} Hz, speech is {rate} Hz")
        noise += fit_length(src.samples, len(clean), rng) * 10 ** (offset / 20)
    pn = np.mean(noise[mask] ** 2)
    if pn <= 0:
        raise DataError(f"noise {spec.noise_ids} is silent over the speech-active region")
    ps = np.mean(clean[mask] ** 2)
    noise *= np.sqrt(ps / (pn * 10 ** (spec.snr / 10)))

    noisy = clean + noise
    target = clean + noise * 10 ** (-spec.delta_snr_t / 20)
    peak = np.max(np.abs(noisy))
    if peak > PEAK_LIMIT:
        g = PEAK_LIMIT / peak
        clean, noise, noisy, target = clean * g, noise * g, noisy * g, target * g
    return Mixture(spec, Waveform(clean, rate), Waveform(noise, rate),
                   Waveform(noisy, rate), Waveform(target, rate))


def sample_spec(rng, split, cfg: MixConfig = MixConfig()) -> MixtureSpec:
    """Draw a uniformly random mixture recipe from the ids of one split.

    ``split`` needs ``speech`` and ``noise`` id sequences.
    """
    speech_ids = sorted(split.speech)
    noise_ids = sorted(split.noise)
    if not speech_ids or not noise_ids:
        raise DataError("split has no speech or no noise signals")
    speech_id = speech_ids[int(rng.integers(len(speech_ids)))]
    count = int(rng.integers(1, cfg.max_noises + 1))
    replace = count > len(noise_ids)
    picks = rng.choice(len(noise_ids), size=count, replace=replace)
    snr = float(cfg.snrs[int(rng.integers(len(cfg.snrs)))])
    offsets = tuple(float(cfg.offsets[int(i)]) for i in rng.integers(len(cfg.offsets), size=count))
    return MixtureSpec(
        speech_id=speech_id,
        noise_ids=tuple(noise_ids[int(i)] for i in picks),
        snr=snr,
        level_offsets=offsets,
        delta_snr_t=float(cfg.delta_snr_t),
        seed=int(rng.integers(2**31)),
    )
