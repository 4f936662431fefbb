"""Training loop: on-line mixtures, time-domain loss, Adam, model selection."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.mixing import MixConfig, make_mixture, sample_spec
from ..errors import DataError, NumericError
from ..filterbank import DEFAULT_BANK
from ..metrics import rmse_with_grad, si_sdr_with_grad
from .checkpoint import Checkpoint
from .config import TrainConfig
from .network import ModelParams, init_params, run_backward, run_forward
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

METRICS_HEADER = ("step", "loss", "rmse", "neg_sisdr", "val_sisdr")
VALIDATION_HEADER = ("step", "val_loss", "val_rmse", "val_sisdr")


@dataclass
class Snippet:
    noisy: np.ndarray
    target: np.ndarray
    clean: np.ndarray


@dataclass
class TrainResult:
    last: Checkpoint
    best: Checkpoint
    history: list = field(default_factory=list)
    validation: list = field(default_factory=list)

    @property
    def final_val_loss(self) -> float:
        return self.validation[-1]["val_loss"]


def mix_config(cfg: TrainConfig) -> MixConfig:
    return MixConfig(cfg.snrs, cfg.level_offsets, cfg.max_noises, cfg.delta_snr_t)


def draw_snippet(rng, corpus, split_name: str, cfg: TrainConfig) -> Snippet:
    spec = sample_spec(rng, corpus.split[split_name], mix_config(cfg))
    mix = make_mixture(spec, corpus)
    n = cfg.snippet_samples
    total = len(mix.noisy)
    start = int(rng.integers(0, total - n + 1)) if total > n else 0
    sl = slice(start, start + n)
    return Snippet(mix.noisy.samples[sl], mix.target.samples[sl], mix.clean.samples[sl])


def validation_set(corpus, cfg: TrainConfig) -> list[Snippet]:
    rng = np.random.default_rng([cfg.seed, 7])
    return [draw_snippet(rng, corpus, "validation", cfg) for _ in range(cfg.val_count)]


def snippet_loss(params: ModelParams, snip: Snippet, cfg: TrainConfig, with_grad: bool = True):
    """Returns (total, rmse, neg_sisdr_term, si_sdr_db, grads or None)."""
    x = DEFAULT_BANK.analyze(snip.noisy)
    y, tape = run_forward(params, x, cfg, length=len(snip.noisy))
    lo, hi = cfg.loss_region(len(y))
    r, g_r = rmse_with_grad(snip.target[lo:hi], y[lo:hi])
    sdr, g_s = si_sdr_with_grad(snip.target[lo:hi], y[lo:hi])
    neg = -sdr / 10.0
    total = cfg.w_rmse * r + cfg.w_sdr * neg
    if not np.isfinite(total):
        raise NumericError(f"non-finite loss (rmse={r}, si_sdr={sdr})")
    grads = None
    if with_grad:
        gy = np.zeros(len(y))
        gy[lo:hi] = cfg.w_rmse * g_r - (cfg.w_sdr / 10.0) * g_s
        grads = run_backward(params, tape, gy, cfg)
    return total, r, neg, sdr, grads


def validate(params: ModelParams, snippets, cfg: TrainConfig) -> dict:
    vals = [snippet_loss(params, s, cfg, with_grad=False) for s in snippets]
    return {
        "val_loss": float(np.mean([v[0] for v in vals])),
        "val_rmse": float(np.mean([v[1] for v in vals])),
        "val_sisdr": float(np.mean([v[3] for v in vals])),
    }


def _fmt(v):
    return "" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _append_csv(path: Path, header, row: dict):
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(header)
        w.writerow([_fmt(row.get(k)) for k in header])


def _truncate_csv(path: Path, max_step: int):
    if not path.exists():
        return
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    keep = [rows[0]] + [r for r in rows[1:] if int(r[0]) <= max_step]
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(keep)


def train(corpus, cfg: TrainConfig, out_dir=None, resume: Checkpoint | None = None,
          stop_after: int | None = None) -> TrainResult:
    """Train from scratch or resume.

    Deterministic single-threaded reference path: batch items are drawn
    and accumulated in order.  ``stop_after`` ends the run early after
    that many total steps (used to exercise resumption); the checkpoint
    it leaves behind continues bit-exactly.
    """
    if not corpus.split.train.speech or not corpus.split.train.noise:
        raise DataError("training split is empty")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        (out_dir / "logs").mkdir(parents=True, exist_ok=True)

    if resume is None:
        params = init_params(cfg, np.random.default_rng([cfg.seed, 0]))
        adam = AdamState.zeros_like(params.flat())
        data_rng = np.random.default_rng([cfg.seed, 1])
        step, best_loss, best_step = 0, float("inf"), -1
        best = None
        if out_dir is not None:
            for name in ("metrics.csv", "validation.csv"):
                (out_dir / "logs" / name).unlink(missing_ok=True)
    else:
        cfg = resume.config
        params = resume.params.copy()
        adam = AdamState([m.copy() for m in resume.adam.m], [v.copy() for v in resume.adam.v],
                         resume.adam.step)
        data_rng = np.random.default_rng()
        data_rng.bit_generator.state = resume.rng_state
        step, best_loss, best_step = resume.step, resume.best_val_loss, resume.best_step
        best = None
        if out_dir is not None:
            best_path = out_dir / "checkpoints" / "best.ckpt"
            if best_path.exists():
                best = Checkpoint.load(best_path)
            for name in ("metrics.csv", "validation.csv"):
                _truncate_csv(out_dir / "logs" / name, step)

    val_snips = validation_set(corpus, cfg) if corpus.split.validation.speech else []
    names = [n for n, _ in params.arrays()]
    history, val_history = [], []

    def snapshot():
        return Checkpoint(cfg, params.copy(),
                          AdamState([m.copy() for m in adam.m], [v.copy() for v in adam.v],
                                    adam.step),
                          step, data_rng.bit_generator.state, best_loss, best_step)

    end = cfg.max_steps if stop_after is None else min(cfg.max_steps, stop_after)
    while step < end:
        totals = np.zeros(3)
        acc = None
        for _ in range(cfg.batch_size):
            snip = draw_snippet(data_rng, corpus, "train", cfg)
            total, r, neg, _, g = snippet_loss(params, snip, cfg)
            totals += (total, r, neg)
            flat = g.flat()
            acc = flat if acc is None else [a + b for a, b in zip(acc, flat)]
        grads = [a / cfg.batch_size for a in acc]
        totals /= cfg.batch_size
        adam_step(params.flat(), grads, adam, cfg.learning_rate, cfg.beta1, cfg.beta2,
                  cfg.adam_epsilon, names)
        step += 1
        row = {"step": step, "loss": totals[0], "rmse": totals[1], "neg_sisdr": totals[2],
               "val_sisdr": None}
        if val_snips and (step % cfg.val_every == 0 or step == cfg.max_steps):
            v = validate(params, val_snips, cfg)
            v["step"] = step
            val_history.append(v)
            row["val_sisdr"] = v["val_sisdr"]
            if v["val_loss"] < best_loss:
                best_loss, best_step = v["val_loss"], step
                best = snapshot()
                if out_dir is not None:
                    best.save(out_dir / "checkpoints" / "best.ckpt")
            if out_dir is not None:
                _append_csv(out_dir / "logs" / "validation.csv", VALIDATION_HEADER, v)
            log.info("step %d loss %.4f val_loss %.4f val_sisdr %.2f dB",
                     step, totals[0], v["val_loss"], v["val_sisdr"])
        history.append(row)
        if out_dir is not None:
            _append_csv(out_dir / "logs" / "metrics.csv", METRICS_HEADER, row)
            if step % cfg.ckpt_every == 0 or step == end:
                snapshot().save(out_dir / "checkpoints" / "last.ckpt")

    last = snapshot()
    if best is None:
        best = last
    return TrainResult(last, best, history, val_history)
