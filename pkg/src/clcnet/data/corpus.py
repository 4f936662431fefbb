"""Corpus containers, the synthetic corpus and the WAV directory loader."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError
from ..filterbank import SAMPLE_RATE, Waveform
from .synth import NOISE_KINDS, synth_noise, synth_speech
from .wav import read_wav

SPLITS = ("train", "validation", "test")
DEFAULT_FRACTIONS = (0.70, 0.15, 0.15)


@dataclass
class SplitIds:
    speech: list = field(default_factory=list)
    noise: list = field(default_factory=list)


@dataclass
class CorpusSplit:
    train: SplitIds = field(default_factory=SplitIds)
    validation: SplitIds = field(default_factory=SplitIds)
    test: SplitIds = field(default_factory=SplitIds)

    def __getitem__(self, name) -> SplitIds:
        if name not in SPLITS:
            raise KeyError(name)
        return getattr(self, name)

    def membership(self) -> dict:
        out = {}
        for name in SPLITS:
            for kind in ("speech", "noise"):
                for i in getattr(self[name], kind):
                    out[f"{kind}/{i}"] = name
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "split"])
            for key, name in sorted(self.membership().items()):
                w.writerow([key, name])


@dataclass
class Corpus:
    speech: dict
    noise: dict
    split: CorpusSplit


def hash_split(name: str, fractions=DEFAULT_FRACTIONS) -> str:
    """Split assignment from the file name alone, so moving files around
    never changes membership."""
    h = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big") / 2.0**64
    edge = 0.0
    for split_name, frac in zip(SPLITS, fractions):
        edge += frac
        if h < edge:
            return split_name
    return SPLITS[-1]


def load_corpus(root, sample_rate: int = SAMPLE_RATE, fractions=DEFAULT_FRACTIONS) -> Corpus:
    root = Path(root)
    signals = {}
    for kind in ("speech", "noise"):
        files = sorted((root / kind).glob("*.wav"))
        if not files:
            raise DataError(f"{root / kind}: no WAV files")
        signals[kind] = {f.stem: read_wav(f, sample_rate) for f in files}
    split = CorpusSplit()
    for kind in ("speech", "noise"):
        for name in sorted(signals[kind]):
            getattr(split[hash_split(f"{name}.wav", fractions)], kind).append(name)
    return Corpus(signals["speech"], signals["noise"], split)


def synthetic_corpus(seed: int = 0, n_speech: int = 12, n_noise: int = 8, duration: float = 3.0,
                     noise_duration: float | None = None, f0_range=(85.0, 125.0),
                     kinds=NOISE_KINDS, sample_rate: int = SAMPLE_RATE) -> Corpus:
    """Generated corpus with an index-based split that keeps every split
    populated (for n >= 3 of each kind)."""
    noise_duration = noise_duration or duration
    speech = {
        f"s{i:03d}": synth_speech(seed * 10007 + i, duration, f0_range, sample_rate)
        for i in range(n_speech)
    }
    noise = {
        f"n{i:03d}_{kinds[i % len(kinds)]}": synth_noise(
            seed * 10007 + 5000 + i, noise_duration, kinds[i % len(kinds)], sample_rate)
        for i in range(n_noise)
    }
    split = CorpusSplit()
    for kind, ids in (("speech", sorted(speech)), ("noise", sorted(noise))):
        for j, name in enumerate(ids):
            getattr(split[_cycle_split(j, len(ids))], kind).append(name)
    return Corpus(speech, noise, split)


def _cycle_split(j: int, n: int) -> str:
    n_val = max(1, round(n * DEFAULT_FRACTIONS[1]))
    n_test = max(1, round(n * DEFAULT_FRACTIONS[2]))
    if j >= n - n_test:
        return "test"
    if j >= n - n_test - n_val:
        return "validation"
    return "train"
