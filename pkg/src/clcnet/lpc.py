"""Linear predictive coding for real and complex sequences.

Prediction convention: ``x_hat[k] = sum_{i=1..N} a[i-1] * x[k-i]``.
Autocorrelation is the biased (divide-free) estimator
``r[tau] = sum_k x[k] * conj(x[k - tau])``, so the Toeplitz system is
Hermitian positive semi-definite.  No windowing happens here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateSignalError, IllConditionedError

# relative prediction-error power below which a signal counts as exactly
# predictable at the current order
EXACT_FIT_TOL = 1e-12


@dataclass
class LpcCoeffs:
    a: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a)
        if self.a.ndim != 1:
            raise DataError("LPC coefficients must be a 1-D sequence")

    @property
    def order(self) -> int:
        return len(self.a)


def autocorrelation(x, max_lag: int) -> np.ndarray:
    x = np.asarray(x)
    if x.size == 0:
        raise DataError("autocorrelation of an empty sequence")
    if not 0 <= max_lag < len(x):
        raise DataError(f"max_lag must be in [0, {len(x) - 1}], got {max_lag}")
    r = np.array([np.vdot(x[: len(x) - tau], x[tau:]) for tau in range(max_lag + 1)])
    # vdot conjugates its first argument: sum conj(x[k-tau]) * x[k]
    if not np.iscomplexobj(x):
        r = r.real
    else:
        r[0] = r[0].real
    return r


def levinson_durbin(r, order: int) -> tuple[LpcCoeffs, float]:
    """Solve the autocorrelation normal equations by the Levinson-Durbin
    recursion (Hermitian form).

    Returns the coefficients and the final prediction-error power.  If the
    error power collapses to (numerically) zero before ``order`` is reached
    the signal is exactly predictable; the remaining reflection
    coefficients are zero and the error power is reported as 0.
    """
    r = np.asarray(r)
    if len(r) < order + 1:
        raise DataError(f"need {order + 1} correlation lags, got {len(r)}")
    r0 = float(np.real(r[0]))
    if not r0 > 0:
        raise DegenerateSignalError(f"r[0] = {r0} must be positive")
    dtype = np.complex128 if np.iscomplexobj(r) else np.float64
    a = np.zeros(order, dtype=dtype)
    err = r0
    for m in range(1, order + 1):
        if err <= EXACT_FIT_TOL * r0:
            err = 0.0
            break
        acc = r[m] - np.dot(a[: m - 1], r[m - 1 : 0 : -1])
        k = acc / err
        mag2 = float(np.abs(k) ** 2)
        # |k| may exceed 1 by rounding when the fit becomes exact at this lag;
        # only an overshoot that drives the error power clearly negative is fatal
        new_err = err * (1.0 - mag2)
        if new_err < -EXACT_FIT_TOL * r0:
            raise IllConditionedError(
                f"reflection coefficient |k|={np.sqrt(mag2):.6g} > 1 at lag {m}; "
                "correlation sequence is not positive definite",
                lag=m,
            )
        prev = a[: m - 1].copy()
        a[: m - 1] = prev - k * np.conj(prev[::-1])
        a[m - 1] = k
        err = new_err
    return LpcCoeffs(a), max(float(err), 0.0)


def predict(x, coeffs: LpcCoeffs) -> np.ndarray:
    """``x_hat[k]`` for ``k >= order``; entries before that are zero."""
    x = np.asarray(x)
    n = coeffs.order
    if len(x) < n:
        raise DataError(f"sequence of length {len(x)} shorter than order {n}")
    dtype = np.result_type(x, coeffs.a, np.float64)
    x_hat = np.zeros(len(x), dtype=dtype)
    for i in range(1, n + 1):
        x_hat[n:] += coeffs.a[i - 1] * x[n - i : len(x) - i]
    return x_hat


def residual(x, coeffs: LpcCoeffs) -> np.ndarray:
    """Prediction error ``d[k] = x[k] - x_hat[k]`` for ``k >= order``."""
    x = np.asarray(x)
    n = coeffs.order
    return (x - predict(x, coeffs))[n:]


def fit(x, order: int) -> tuple[LpcCoeffs, float]:
    return levinson_durbin(autocorrelation(x, order), order)
