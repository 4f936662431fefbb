"""Complex linear coding: normalization, the CLC operator and oracles.

The operator combines neighbouring frames of a single band::

    S_hat(k, f) = sum_{i=0..N} A(k, i, f) * X(k - i + l, f)

Frames outside ``[0, n_frames)`` are zero.  A coefficient tensor with
``B`` bins acts on bins ``0..B-1``; any remaining stored bins (the Nyquist
bin for the 48-band model) are copied from the input unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .filterbank import HOP, N_BANDS, SAMPLE_RATE, Spectrogram

DEFAULT_ORDER = 5
DEFAULT_OFFSET = 1
NORM_TIME_CONSTANT = 1.0
NORM_EPSILON = 1e-6
ORACLE_WINDOW = 9
ORACLE_RIDGE = 1e-6
IAM_CAP = 10.0
MASK_FLOOR = 1e-6


def decay_from_time_constant(tau_s: float = NORM_TIME_CONSTANT, hop: int = HOP,
                             sample_rate: int = SAMPLE_RATE) -> float:
    return math.exp(-(hop / sample_rate) / tau_s)


@dataclass
class CoeffTensor:
    """Per-frame, per-bin coefficients, stored as ``frames x (N+1) x bins``."""

    data: np.ndarray
    offset: int = DEFAULT_OFFSET

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise GeometryError(f"coefficients must be 3-D, got shape {self.data.shape}")
        if self.offset < -1:
            raise GeometryError(f"offset must be >= -1, got {self.offset}")

    @property
    def order(self) -> int:
        return self.data.shape[1] - 1

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]


@dataclass
class NormState:
    """Running per-bin magnitude mean.

    ``mu`` is the raw exponential moving average; ``weight`` tracks
    ``1 - decay**frames_seen`` so the mean used for division is debiased
    during start-up instead of creeping up from zero.
    """

    mu: np.ndarray
    decay: float = field(default_factory=decay_from_time_constant)
    epsilon: float = NORM_EPSILON
    weight: float = 0.0

    @classmethod
    def fresh(cls, n_bins: int = N_BANDS, decay: float | None = None,
              epsilon: float = NORM_EPSILON) -> "NormState":
        if decay is None:
            decay = decay_from_time_constant()
        if not 0.0 < decay < 1.0:
            raise ValueError(f"decay must be in (0, 1), got {decay}")
        return cls(np.zeros(n_bins), decay, epsilon, 0.0)

    def mean(self) -> np.ndarray:
        if self.weight <= 0.0:
            return np.full_like(self.mu, self.epsilon)
        return np.maximum(self.mu / self.weight, self.epsilon)

    def update(self, magnitude: np.ndarray) -> np.ndarray:
        self.mu = self.decay * self.mu + (1.0 - self.decay) * magnitude
        self.weight = self.decay * self.weight + (1.0 - self.decay)
        return self.mean()

    def copy(self) -> "NormState":
        return NormState(self.mu.copy(), self.decay, self.epsilon, self.weight)


def running_means(x: np.ndarray, state: NormState) -> np.ndarray:
    """Advance ``state`` over every frame of ``x`` (frames x bins) and
    return the per-frame divisor used for each frame."""
    mags = np.abs(x)
    out = np.empty(mags.shape)
    for k in range(mags.shape[0]):
        out[k] = state.update(mags[k])
    return out


def normalize(x: Spectrogram, state: NormState, gamma: np.ndarray | None = None):
    """Scale each processed bin by ``gamma / mu``.  Only a real positive
    factor multiplies each value, so phase is preserved exactly."""
    n = len(state.mu)
    if x.n_bins < n:
        raise GeometryError(f"spectrogram has {x.n_bins} bins, normalizer expects {n}")
    if gamma is None:
        gamma = np.ones(n)
    state = state.copy()
    mu = running_means(x.data[:, :n], state)
    out = x.data.copy()
    out[:, :n] = x.data[:, :n] * (np.asarray(gamma) / mu)
    return x.with_data(out), state


def shifted_frames(x: np.ndarray, order: int, offset: int) -> np.ndarray:
    """Stack ``X(k - i + l)`` for i = 0..order as ``frames x (order+1) x bins``,
    zero outside the valid frame range."""
    n_frames, n_bins = x.shape
    out = np.zeros((n_frames, order + 1, n_bins), dtype=np.complex128)
    for i in range(order + 1):
        shift = offset - i
        lo = max(0, -shift)
        hi = min(n_frames, n_frames - shift)
        if hi > lo:
            out[lo:hi, i] = x[lo + shift : hi + shift]
    return out


def shifted_frames_adjoint(g: np.ndarray, offset: int) -> np.ndarray:
    n_frames, n_taps, n_bins = g.shape
    out = np.zeros((n_frames, n_bins), dtype=np.complex128)
    for i in range(n_taps):
        shift = offset - i
        lo = max(0, -shift)
        hi = min(n_frames, n_frames - shift)
        if hi > lo:
            out[lo + shift : hi + shift] += g[lo:hi, i]
    return out


def apply_clc(x: Spectrogram, a: CoeffTensor) -> Spectrogram:
    if a.n_bins > x.n_bins:
        raise GeometryError(f"coefficients cover {a.n_bins} bins, spectrogram has {x.n_bins}")
    if a.n_frames > x.n_frames:
        raise GeometryError(f"coefficients cover {a.n_frames} frames, spectrogram has {x.n_frames}")
    nb = a.n_bins
    taps = shifted_frames(x.data[:, :nb], a.order, a.offset)[: a.n_frames]
    out = x.data.copy()
    out[: a.n_frames, :nb] = np.einsum("kif,kif->kf", a.data, taps)
    return x.with_data(out)


def identity_coeffs(n_frames: int, n_bins: int = N_BANDS, order: int = DEFAULT_ORDER,
                    offset: int = DEFAULT_OFFSET) -> CoeffTensor:
    if not 0 <= offset <= order:
        raise ValueError("identity needs a tap at i == offset")
    data = np.zeros((n_frames, order + 1, n_bins), dtype=np.complex128)
    data[:, offset, :] = 1.0
    return CoeffTensor(data, offset)


def _windowed_normal_equations(x, s, order, offset, window):
    """Per (frame, bin) Gram matrix and right-hand side accumulated over a
    centered window of frames."""
    taps = shifted_frames(x, order, offset)
    # gram[k, f, i, j] = conj(taps_i) * taps_j, rhs[k, f, i] = conj(taps_i) * s
    gram = np.einsum("kif,kjf->kfij", taps.conj(), taps)
    rhs = np.einsum("kif,kf->kfi", taps.conj(), s)
    energy = np.abs(s) ** 2
    half = window // 2
    n_frames = x.shape[0]

    def window_sum(a):
        c = np.concatenate([np.zeros((1,) + a.shape[1:], a.dtype), np.cumsum(a, axis=0)])
        k = np.arange(n_frames)
        lo = np.clip(k - half, 0, n_frames)
        hi = np.clip(k + (window - half), 0, n_frames)
        return c[hi] - c[lo]

    return window_sum(gram), window_sum(rhs), window_sum(energy), taps


def solve_ridge(gram: np.ndarray, rhs: np.ndarray, ridge) -> np.ndarray:
    """Batched ``(G + ridge I) a = rhs``; rows with zero ridge fall back
    to the minimum-norm pseudo-inverse solution."""
    n = gram.shape[-1]
    ridge = np.broadcast_to(np.asarray(ridge, dtype=np.float64), gram.shape[:-2])
    sol = np.empty(rhs.shape, dtype=np.complex128)
    pos = ridge > 0
    if np.any(pos):
        g = gram[pos] + ridge[pos][:, None, None] * np.eye(n)
        sol[pos] = np.linalg.solve(g, rhs[pos][..., None])[..., 0]
    if np.any(~pos):
        pinv = np.linalg.pinv(gram[~pos], hermitian=True)
        sol[~pos] = np.einsum("bij,bj->bi", pinv, rhs[~pos])
    return sol


def oracle_clc_coeffs(x: Spectrogram, s: Spectrogram, order: int = DEFAULT_ORDER,
                      offset: int = DEFAULT_OFFSET, ridge: float | None = ORACLE_RIDGE,
                      window: int = ORACLE_WINDOW) -> CoeffTensor:
    """Least-squares CLC coefficients fitting ``s`` from ``x``.

    For frame ``k`` and bin ``f`` the coefficients minimize the squared
    error summed over the ``window`` frames centered on ``k``.  The
    Tikhonov term is ``ridge`` times the input energy in that window;
    ``ridge=0`` gives the minimum-norm least-squares solution.
    All stored bins are solved.
    """
    if x.data.shape != s.data.shape:
        raise GeometryError(f"noisy {x.data.shape} and target {s.data.shape} differ")
    gram, rhs, _, _ = _windowed_normal_equations(x.data, s.data, order, offset, window)
    ridge = ridge or 0.0
    # scale the ridge to the input energy in each window
    lam = ridge * np.real(np.trace(gram, axis1=-2, axis2=-1)) / (order + 1)
    if ridge > 0:
        lam = np.where(lam > 0, lam, ridge)
    coeffs = solve_ridge(gram, rhs, lam)
    return CoeffTensor(np.transpose(coeffs, (0, 2, 1)), offset)


def real_gain_window_residuals(x: np.ndarray, s: np.ndarray, window: int = ORACLE_WINDOW):
    """Residual energy of the best real scalar gain per centered window
    (same windows as :func:`oracle_clc_coeffs`)."""
    num = np.real(np.conj(x) * s)
    den = np.abs(x) ** 2
    energy = np.abs(s) ** 2
    cs = lambda a: np.concatenate([np.zeros((1,) + a.shape[1:]), np.cumsum(a, axis=0)])
    n_frames = x.shape[0]
    half = window // 2
    k = np.arange(n_frames)
    lo = np.clip(k - half, 0, n_frames)
    hi = np.clip(k + (window - half), 0, n_frames)
    w = lambda a: cs(a)[hi] - cs(a)[lo]
    num, den, energy = w(num), w(den), w(energy)
    gain = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return energy - gain * num


def clc_window_residuals(x: np.ndarray, s: np.ndarray, order: int = DEFAULT_ORDER,
                         offset: int = DEFAULT_OFFSET, window: int = ORACLE_WINDOW):
    """Residual energy of the unregularized least-squares CLC fit per
    centered window, evaluated at the minimum-norm solution."""
    gram, rhs, energy, _ = _windowed_normal_equations(x, s, order, offset, window)
    a = solve_ridge(gram, rhs, 0.0)
    cross = np.real(np.einsum("kfi,kfi->kf", a.conj(), rhs))
    quad = np.real(np.einsum("kfi,kfij,kfj->kf", a.conj(), gram, a))
    return energy - 2.0 * cross + quad


def oracle_wiener_gain(s: Spectrogram, n: Spectrogram) -> np.ndarray:
    ps = np.abs(s.data) ** 2
    pn = np.abs(n.data) ** 2
    total = ps + pn
    return np.divide(ps, total, out=np.zeros_like(ps), where=total > 0)


def oracle_masks(s: Spectrogram, m: Spectrogram, iam_cap: float = IAM_CAP,
                 floor: float = MASK_FLOOR) -> dict:
    if s.data.shape != m.data.shape:
        raise GeometryError(f"clean {s.data.shape} and mixture {m.data.shape} differ")
    mag_m = np.abs(m.data)
    mag_s = np.abs(s.data)
    iam = np.minimum(np.divide(mag_s, mag_m, out=np.full_like(mag_s, iam_cap), where=mag_m > 0),
                     iam_cap)
    iam[mag_s == 0] = 0.0
    # floor |M| without touching its phase
    denom = np.where(mag_m > floor, m.data, floor * np.exp(1j * np.angle(m.data)))
    cirm = s.data / denom
    return {"iam": iam, "cirm": cirm}


def apply_mask(m: Spectrogram, mask: np.ndarray) -> Spectrogram:
    if mask.shape != m.data.shape:
        raise GeometryError(f"mask {mask.shape} does not match spectrogram {m.data.shape}")
    return m.with_data(m.data * mask)
