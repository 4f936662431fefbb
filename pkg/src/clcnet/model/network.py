"""MLP coefficient predictor and its reverse-mode pass.

The forward chain for one utterance is::

    X --normalize--> Xn --featurize--> F --MLP--> tanh --> A
    A, X --apply_clc--> S_hat --synthesize--> y

CLC and synthesis are the same code used everywhere else (known
operators); the backward pass below differentiates them as the linear
maps they are.  The running means in ``normalize`` are treated as
constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import clc
from ..errors import GeometryError, NumericError
from ..filterbank import DEFAULT_BANK, FilterBank, Spectrogram
from .config import TrainConfig


@dataclass
class ModelParams:
    weights: list
    biases: list
    gamma: np.ndarray

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Parameters in checkpoint order: W0, b0, ..., W_out, b_out, gamma."""
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out += [(f"W{i}", w), (f"b{i}", b)]
        out.append(("gamma", self.gamma))
        return out

    def flat(self) -> list[np.ndarray]:
        return [a for _, a in self.arrays()]

    def copy(self) -> "ModelParams":
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                           self.gamma.copy())

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.flat())


def layer_sizes(cfg: TrainConfig) -> list[int]:
    return [cfg.n_features, *cfg.hidden_sizes, cfg.n_outputs]


def parameter_count(cfg: TrainConfig) -> int:
    """sum(in*out + out) over layers, plus one gain per processed bin."""
    sizes = layer_sizes(cfg)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])) + cfg.n_bins


def init_params(cfg: TrainConfig, rng) -> ModelParams:
    """He-uniform hidden layers, fan-in uniform output layer, zero biases."""
    sizes = layer_sizes(cfg)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        limit = np.sqrt((1.0 if last else 6.0) / fan_in)
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(weights, biases, np.ones(cfg.n_bins))


def zero_params(cfg: TrainConfig) -> ModelParams:
    sizes = layer_sizes(cfg)
    return ModelParams([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                       [np.zeros(b) for b in sizes[1:]], np.ones(cfg.n_bins))


def check_geometry(params: ModelParams, cfg: TrainConfig):
    sizes = layer_sizes(cfg)
    got = [params.weights[0].shape[0]] + [w.shape[1] for w in params.weights]
    if got != sizes or params.gamma.shape != (cfg.n_bins,):
        raise GeometryError(f"parameter geometry {got} does not match config {sizes}")


def ri_frames(z: np.ndarray) -> np.ndarray:
    """frames x bins complex -> frames x (bins*2) with real/imag interleaved."""
    return np.stack([z.real, z.imag], axis=-1).reshape(z.shape[0], -1)


def featurize_all(xn: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    """Feature matrix, one row per frame.

    Row ``k`` holds frames ``k - lookback .. k + lookahead`` (oldest
    first, zero outside the utterance); within a frame, bins ascend and
    each bin contributes its real then imaginary part.
    """
    nb = cfg.n_bins
    rows = ri_frames(xn[:, :nb])
    padded = np.concatenate([
        np.zeros((cfg.lookback_frames, 2 * nb)), rows, np.zeros((cfg.lookahead_frames, 2 * nb))
    ])
    win = np.lib.stride_tricks.sliding_window_view(padded, cfg.context_frames, axis=0)
    return np.ascontiguousarray(win.transpose(0, 2, 1)).reshape(len(rows), cfg.n_features)


def featurize(xn: Spectrogram | np.ndarray, k: int, cfg: TrainConfig) -> np.ndarray:
    data = xn.data if isinstance(xn, Spectrogram) else np.asarray(xn)
    nb = cfg.n_bins
    out = np.zeros((cfg.context_frames, nb), dtype=np.complex128)
    for j in range(cfg.context_frames):
        src = k - cfg.lookback_frames + j
        if 0 <= src < data.shape[0]:
            out[j] = data[src, :nb]
    return ri_frames(out).reshape(-1)


def featurize_adjoint(g: np.ndarray, n_frames: int, cfg: TrainConfig) -> np.ndarray:
    """Scatter feature gradients back onto the normalized frames."""
    nb = cfg.n_bins
    g = g.reshape(n_frames, cfg.context_frames, nb, 2)
    out = np.zeros((n_frames, nb, 2))
    for j in range(cfg.context_frames):
        shift = j - cfg.lookback_frames
        lo = max(0, -shift)
        hi = min(n_frames, n_frames - shift)
        if hi > lo:
            out[lo + shift : hi + shift] += g[lo:hi, j]
    return out[..., 0] + 1j * out[..., 1]


def mlp_forward(params: ModelParams, features: np.ndarray):
    """Returns (tanh outputs, list of hidden activations incl. input)."""
    acts = [features]
    h = features
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    out = np.tanh(h @ params.weights[-1] + params.biases[-1])
    if not np.all(np.isfinite(out)):
        raise NumericError("network produced non-finite coefficients; check the parameters")
    return out, acts


def outputs_to_coeffs(out: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    """(frames, (N+1)*bins*2) -> complex (frames, N+1, bins)."""
    out = out.reshape(out.shape[0], cfg.order + 1, cfg.n_bins, 2)
    return out[..., 0] + 1j * out[..., 1]


def forward(params: ModelParams, features: np.ndarray, cfg: TrainConfig) -> np.ndarray:
    """Coefficients for one frame (1-D features) or many (2-D)."""
    f = np.atleast_2d(features)
    if f.shape[1] != params.weights[0].shape[0]:
        raise GeometryError(
            f"feature length {f.shape[1]} does not match input layer {params.weights[0].shape[0]}"
        )
    out, _ = mlp_forward(params, f)
    a = outputs_to_coeffs(out, cfg)
    return a[0] if np.ndim(features) == 1 else a


@dataclass
class Tape:
    """Everything the backward pass needs from one forward pass."""

    x: Spectrogram
    unit_norm: np.ndarray
    acts: list
    out: np.ndarray
    taps: np.ndarray
    length: int
    coeffs: clc.CoeffTensor = field(repr=False, default=None)


def normalized_input(x: Spectrogram, cfg: TrainConfig):
    """X / mu for the processed bins, with a fresh running-mean state."""
    state = clc.NormState.fresh(cfg.n_bins, decay=cfg.norm_decay, epsilon=cfg.norm_epsilon)
    mu = clc.running_means(x.data[:, : cfg.n_bins], state)
    return x.data[:, : cfg.n_bins] / mu


def enhance_with_coeffs(x: Spectrogram, coeffs: clc.CoeffTensor, bank: FilterBank = DEFAULT_BANK,
                        length: int | None = None) -> np.ndarray:
    """The known-operator tail of the network: CLC, then synthesis."""
    length = length if length is not None else x.n_samples
    return bank.synthesize(clc.apply_clc(x, coeffs), length).samples


def run_forward(params: ModelParams, x: Spectrogram, cfg: TrainConfig,
                bank: FilterBank = DEFAULT_BANK, length: int | None = None):
    """Full utterance forward pass.  Returns (enhanced samples, tape)."""
    unit = normalized_input(x, cfg)
    feats = featurize_all(unit * params.gamma, cfg)
    out, acts = mlp_forward(params, feats)
    coeffs = clc.CoeffTensor(outputs_to_coeffs(out, cfg), cfg.offset)
    y = enhance_with_coeffs(x, coeffs, bank, length)
    taps = clc.shifted_frames(x.data[:, : cfg.n_bins], cfg.order, cfg.offset)
    return y, Tape(x, unit, acts, out, taps, len(y), coeffs)


def run_backward(params: ModelParams, tape: Tape | None, grad_y: np.ndarray,
                 cfg: TrainConfig, bank: FilterBank = DEFAULT_BANK) -> ModelParams:
    """Gradients of the loss w.r.t. every parameter, given dL/dy."""
    if tape is None:
        raise NumericError("backward called without a recorded forward pass")
    n_frames = tape.x.n_frames
    g_shat = bank.synthesize_adjoint(grad_y, n_frames)[:, : cfg.n_bins]
    # d/dA of A * X is G * conj(X) in the dL/dRe + j dL/dIm convention
    g_a = g_shat[:, None, :] * np.conj(tape.taps)
    g_out = np.stack([g_a.real, g_a.imag], axis=-1).reshape(n_frames, -1)
    g_h = g_out * (1.0 - tape.out**2)

    gw = [None] * len(params.weights)
    gb = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = tape.acts[i].T @ g_h
        gb[i] = g_h.sum(axis=0)
        g_in = g_h @ params.weights[i].T
        if i > 0:
            g_h = g_in * (tape.acts[i] > 0)
    g_xn = featurize_adjoint(g_in, n_frames, cfg)
    g_gamma = np.sum(np.real(g_xn * np.conj(tape.unit_norm)), axis=0)
    return ModelParams(gw, gb, g_gamma)
