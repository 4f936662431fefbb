from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from ..clc import DEFAULT_OFFSET, DEFAULT_ORDER, NORM_EPSILON, NORM_TIME_CONSTANT
from ..errors import ConfigError
from ..filterbank import FRAME_LEN, HOP, N_BANDS, SAMPLE_RATE
from ..data.mixing import DELTA_SNR_T, MAX_NOISES, OFFSET_SET, SNR_SET


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple = (512, 512, 512)
    n_bins: int = N_BANDS
    order: int = DEFAULT_ORDER
    offset: int = DEFAULT_OFFSET
    lookback_ms: float = 200.0
    lookahead_ms: float = 2.0
    norm_time_constant: float = NORM_TIME_CONSTANT
    norm_epsilon: float = NORM_EPSILON
    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch_size: int = 8
    max_steps: int = 10000
    seed: int = 0
    w_rmse: float = 1.0
    w_sdr: float = 1.0
    delta_snr_t: float = DELTA_SNR_T
    snippet_s: float = 2.0
    val_every: int = 50
    val_count: int = 8
    ckpt_every: int = 50
    snrs: tuple = SNR_SET
    level_offsets: tuple = OFFSET_SET
    max_noises: int = MAX_NOISES
    hop: int = HOP
    frame_len: int = FRAME_LEN
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        object.__setattr__(self, "snrs", tuple(float(s) for s in self.snrs))
        object.__setattr__(self, "level_offsets", tuple(float(s) for s in self.level_offsets))
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.offset < -1:
            raise ConfigError(f"offset must be >= -1, got {self.offset}")
        if self.order < 0 or self.n_bins < 1:
            raise ConfigError("order must be >= 0 and n_bins >= 1")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigError("batch_size must be >= 1 and max_steps >= 0")
        for name in ("lookback_ms", "lookahead_ms"):
            frames = getattr(self, name) / self.hop_ms
            if frames < 0 or abs(frames - round(frames)) > 1e-9:
                raise ConfigError(f"{name}={getattr(self, name)} is not a whole number of "
                                  f"{self.hop_ms} ms hops")

    @property
    def hop_ms(self) -> float:
        return 1000.0 * self.hop / self.sample_rate

    @property
    def lookback_frames(self) -> int:
        return int(round(self.lookback_ms / self.hop_ms))

    @property
    def lookahead_frames(self) -> int:
        return int(round(self.lookahead_ms / self.hop_ms))

    @property
    def context_frames(self) -> int:
        return self.lookback_frames + 1 + self.lookahead_frames

    @property
    def n_features(self) -> int:
        return 2 * self.n_bins * self.context_frames

    @property
    def n_outputs(self) -> int:
        return 2 * self.n_bins * (self.order + 1)

    @property
    def norm_decay(self) -> float:
        return math.exp(-(self.hop / self.sample_rate) / self.norm_time_constant)

    @property
    def snippet_samples(self) -> int:
        return int(round(self.snippet_s * self.sample_rate))

    @property
    def pipeline_lookahead(self) -> int:
        """Frames of future input needed before a frame can be emitted."""
        return max(self.offset, self.lookahead_frames, 0)

    def loss_region(self, n_samples: int) -> tuple[int, int]:
        """Samples with a full look-back context and complete overlap-add."""
        start = self.frame_len + self.lookback_frames * self.hop
        end = n_samples - self.frame_len
        if end <= start:
            raise ConfigError(
                f"snippet of {n_samples} samples leaves no loss region after the "
                f"{start}-sample context warm-up"
            )
        return start, end

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **kw) -> "TrainConfig":
        return TrainConfig.from_dict({**self.to_dict(), **kw})
