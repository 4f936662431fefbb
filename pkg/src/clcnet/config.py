"""Run configuration: INI-style ``key = value`` file merged with CLI overrides.

Sections are ``filterbank``, ``model``, ``train``, ``data`` and
``metrics``.  Values are Python literals (numbers, tuples) or bare
strings.  Unknown sections and keys are rejected.  A ``[run]`` section is
tolerated and ignored so an echoed config can be fed back in verbatim.
"""

from __future__ import annotations

import ast
import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .filterbank import FRAME_LEN, HOP, SAMPLE_RATE
from .model.config import TrainConfig

# section -> key -> (default, help)
SCHEMA = {
    "filterbank": {
        "sample_rate": (SAMPLE_RATE, "sample rate in Hz; inputs at other rates are rejected"),
        "frame_len": (FRAME_LEN, "analysis frame length in samples"),
        "hop": (HOP, "frame hop in samples"),
    },
    "model": {
        "hidden_sizes": ((512, 512, 512), "hidden layer widths"),
        "n_bins": (48, "processed frequency bins (Nyquist is passed through)"),
        "order": (5, "CLC order N (N+1 taps per bin)"),
        "offset": (1, "CLC offset l in frames; -1 is pure prediction"),
        "lookback_ms": (200.0, "feature context before the current frame"),
        "lookahead_ms": (2.0, "feature context after the current frame"),
        "norm_time_constant": (1.0, "running-mean time constant in seconds"),
        "norm_epsilon": (1e-6, "floor of the running mean"),
    },
    "train": {
        "learning_rate": (3e-4, "Adam step size"),
        "beta1": (0.9, "Adam first-moment decay"),
        "beta2": (0.999, "Adam second-moment decay"),
        "adam_epsilon": (1e-8, "Adam denominator epsilon"),
        "batch_size": (8, "snippets per step"),
        "max_steps": (10000, "optimizer steps"),
        "seed": (0, "training seed (init and data sampling)"),
        "w_rmse": (1.0, "weight of the RMSE loss term"),
        "w_sdr": (1.0, "weight of the -SI-SDR/10 loss term"),
        "snippet_s": (2.0, "training snippet length in seconds"),
        "val_every": (50, "steps between validation passes"),
        "val_count": (8, "validation snippets"),
        "ckpt_every": (50, "steps between last-checkpoint writes"),
    },
    "data": {
        "corpus": ("synthetic", "'synthetic' or a directory with speech/ and noise/ WAVs"),
        "synth_seed": (0, "seed of the synthetic corpus"),
        "n_speech": (12, "synthetic speech signals"),
        "n_noise": (12, "synthetic noise signals"),
        "duration_s": (3.0, "synthetic speech length in seconds"),
        "noise_duration_s": (6.0, "synthetic noise length in seconds"),
        "snrs": ((-100.0, -5.0, 0.0, 5.0, 10.0, 20.0), "mixture SNR set in dB"),
        "level_offsets": ((-6.0, 0.0, 6.0), "per-noise level offset set in dB"),
        "max_noises": (4, "noises per mixture, at most"),
        "delta_snr_t": (14.0, "target SNR improvement in dB"),
    },
    "metrics": {
        "buckets": ((20.0, 10.0, 5.0, 0.0, -5.0), "input SNR buckets for evaluation"),
        "per_bucket": (4, "generated test mixtures per bucket"),
        "eval_seed": (0, "seed of generated test mixtures"),
        "oracle_order": (5, "order of the least-squares CLC oracle"),
        "oracle_offset": (1, "offset of the least-squares CLC oracle"),
        "oracle_window": (9, "frames per least-squares window"),
        "oracle_ridge": (1e-6, "ridge relative to the window energy"),
        "iam_cap": (10.0, "upper bound of the amplitude mask"),
    },
}

IGNORED_SECTIONS = ("run",)
TRAIN_SECTIONS = {
    "filterbank": ("sample_rate", "frame_len", "hop"),
    "model": tuple(SCHEMA["model"]),
    "train": tuple(SCHEMA["train"]),
    "data": ("snrs", "level_offsets", "max_noises", "delta_snr_t"),
}

PROFILES = {
    "smoke": {
        "model.hidden_sizes": (64, 64, 64),
        "model.lookback_ms": 40.0,
        "train.learning_rate": 1e-3,
        "train.batch_size": 4,
        "train.snippet_s": 0.75,
        "train.max_steps": 200,
        "train.val_every": 50,
        "train.ckpt_every": 50,
    },
}


def parse_value(text: str):
    try:
        return ast.literal_eval(text.strip())
    except (ValueError, SyntaxError):
        return text.strip()


def _coerce(section: str, key: str, value):
    default = SCHEMA[section][key][0]
    try:
        if isinstance(default, tuple):
            seq = value if isinstance(value, (tuple, list)) else (value,)
            return tuple(type(default[0])(v) for v in seq)
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {value!r}: expected {type(default).__name__}") from exc


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: {k: d for k, (d, _) in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def get(self, dotted: str):
        section, key = _split(dotted)
        return self.values[section][key]

    def set(self, dotted: str, value):
        section, key = _split(dotted)
        if isinstance(value, str):
            value = parse_value(value)
        self.values[section][key] = _coerce(section, key, value)

    def update(self, overrides: dict):
        for k, v in overrides.items():
            self.set(k, v)
        return self

    @classmethod
    def load(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = cls()
        for section in parser.sections():
            if section in IGNORED_SECTIONS:
                continue
            if section not in SCHEMA:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, text in parser.items(section):
                cfg.set(f"{section}.{key}", text)
        return cfg

    @classmethod
    def from_train_config(cls, tcfg: TrainConfig) -> "RunConfig":
        cfg = cls()
        d = tcfg.to_dict()
        for section, keys in TRAIN_SECTIONS.items():
            for key in keys:
                cfg.set(f"{section}.{key}", d[key])
        return cfg

    def train_config(self) -> TrainConfig:
        kw = {}
        for section, keys in TRAIN_SECTIONS.items():
            for key in keys:
                kw[key] = self.values[section][key]
        fb = self.values["filterbank"]
        if (fb["sample_rate"], fb["frame_len"], fb["hop"]) != (SAMPLE_RATE, FRAME_LEN, HOP):
            raise ConfigError(
                f"only the {SAMPLE_RATE} Hz / {FRAME_LEN}-sample / {HOP}-hop filter bank is supported"
            )
        return TrainConfig(**kw)

    def echo(self, extra: dict | None = None) -> str:
        """INI text with every effective value; loadable with :meth:`load`."""
        lines = []
        if extra:
            lines.append("[run]")
            lines += [f"{k} = {v}" for k, v in extra.items()]
            lines.append("")
        for section in SCHEMA:
            lines.append(f"[{section}]")
            for key, value in self.values[section].items():
                lines.append(f"{key} = {value!r}" if not isinstance(value, str) else f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def write_echo(self, directory, extra: dict | None = None) -> Path:
        path = Path(directory) / "config.echo"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.echo(extra))
        return path


def _split(dotted: str):
    section, _, key = dotted.partition(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"unknown config key {dotted!r}")
    return section, key


def help_text() -> str:
    lines = ["config keys (section.key = default: meaning):"]
    for section, keys in SCHEMA.items():
        for key, (default, text) in keys.items():
            lines.append(f"  {section}.{key} = {default!r}: {text}")
    return "\n".join(lines)
