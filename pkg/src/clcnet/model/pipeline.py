"""End-to-end enhancement with a trained (or oracle) coefficient source."""

from __future__ import annotations

from collections import deque

import numpy as np

from .. import clc
from ..filterbank import DEFAULT_BANK, FilterBank, StreamingAnalyzer, StreamingSynthesizer, Waveform
from .config import TrainConfig
from .network import (
    ModelParams, check_geometry, featurize_all, mlp_forward, normalized_input, outputs_to_coeffs,
    ri_frames, run_forward,
)


class Enhancer:
    """Runs analysis -> normalize -> featurize -> MLP -> CLC -> synthesis.

    :meth:`enhance` returns a waveform of the input length that lags the
    input by :attr:`delay` samples, exactly like the streaming path in
    :meth:`stream`.  The delay covers one frame of buffering plus the
    frames of lookahead the model needs.
    """

    def __init__(self, params: ModelParams, cfg: TrainConfig, bank: FilterBank = DEFAULT_BANK):
        check_geometry(params, cfg)
        self.params = params
        self.cfg = cfg
        self.bank = bank

    @property
    def delay(self) -> int:
        return self.bank.latency_samples(self.cfg.pipeline_lookahead)

    @property
    def latency_ms(self) -> float:
        return 1000.0 * self.delay / self.bank.sample_rate

    def coefficients(self, x) -> clc.CoeffTensor:
        unit = normalized_input(x, self.cfg)
        out, _ = mlp_forward(self.params, featurize_all(unit * self.params.gamma, self.cfg))
        return clc.CoeffTensor(outputs_to_coeffs(out, self.cfg), self.cfg.offset)

    def enhance_aligned(self, w: Waveform) -> Waveform:
        x = self.bank.analyze(w)
        y, _ = run_forward(self.params, x, self.cfg, self.bank, length=len(w))
        return Waveform(y, w.sample_rate)

    def enhance(self, w: Waveform) -> Waveform:
        y = self.enhance_aligned(w).samples
        d = self.delay
        return Waveform(np.concatenate([np.zeros(d), y])[: len(w)], w.sample_rate)

    def stream(self, w: Waveform) -> Waveform:
        """Block-by-block processing, one hop in, one hop out."""
        hop = self.bank.hop
        n = len(w)
        x = np.concatenate([w.samples, np.zeros((-n) % hop)])
        proc = StreamingEnhancer(self.params, self.cfg, self.bank)
        out = [proc.push(x[i : i + hop]) for i in range(0, len(x), hop)]
        return Waveform(np.concatenate(out)[:n], w.sample_rate)


class StreamingEnhancer:
    """Frame-synchronous enhancer holding all state for one stream.

    Frame ``k`` is enhanced once frame ``k + lookahead`` has been
    analyzed.  Output is emitted through a FIFO primed with
    ``frame_len + lookahead * hop`` zeros, so sample ``n`` of the output
    is sample ``n - delay`` of the offline result.
    """

    def __init__(self, params: ModelParams, cfg: TrainConfig, bank: FilterBank = DEFAULT_BANK):
        self.params, self.cfg, self.bank = params, cfg, bank
        self.analyzer = StreamingAnalyzer(bank)
        self.synth = StreamingSynthesizer(bank)
        self.norm = clc.NormState.fresh(cfg.n_bins, decay=cfg.norm_decay, epsilon=cfg.norm_epsilon)
        self.look = cfg.pipeline_lookahead
        keep = cfg.lookback_frames + cfg.order + self.look + 2
        self.raw = deque(maxlen=keep)       # analyzed frames, all bins
        self.feat = deque(maxlen=keep)      # normalized processed bins, as re/im rows
        self.n_analyzed = 0
        delay = bank.latency_samples(self.look)
        self.fifo = deque(np.zeros(delay))

    def push(self, block: np.ndarray) -> np.ndarray:
        frame = self.analyzer.push(block)
        if frame is not None:
            nb = self.cfg.n_bins
            mu = self.norm.update(np.abs(frame[:nb]))
            self.raw.append(frame)
            self.feat.append(ri_frames((frame[:nb] / mu * self.params.gamma)[None])[0])
            self.n_analyzed += 1
            k = self.n_analyzed - 1 - self.look
            if k >= 0:
                self.fifo.extend(self.synth.push(self._enhance_frame(k)))
        return np.array([self.fifo.popleft() for _ in range(self.bank.hop)])

    def _frame(self, store, k, default):
        idx = k - (self.n_analyzed - len(store))
        if k < 0 or k >= self.n_analyzed or idx < 0:
            return default
        return store[idx]

    def _enhance_frame(self, k: int) -> np.ndarray:
        cfg = self.cfg
        zero_feat = np.zeros(2 * cfg.n_bins)
        rows = [self._frame(self.feat, j, zero_feat)
                for j in range(k - cfg.lookback_frames, k + cfg.lookahead_frames + 1)]
        out, _ = mlp_forward(self.params, np.concatenate(rows)[None])
        a = outputs_to_coeffs(out, cfg)[0]
        zero = np.zeros(self.bank.n_bins, dtype=np.complex128)
        current = self._frame(self.raw, k, zero)
        y = current.copy()
        acc = np.zeros(cfg.n_bins, dtype=np.complex128)
        for i in range(cfg.order + 1):
            acc += a[i] * self._frame(self.raw, k - i + cfg.offset, zero)[: cfg.n_bins]
        y[: cfg.n_bins] = acc
        return y
