import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve, toeplitz

from clcnet.errors import DataError, DegenerateSignalError, IllConditionedError
from clcnet.lpc import LpcCoeffs, autocorrelation, fit, levinson_durbin, predict, residual


def exponential_mixture(rng, p, n, real=False):
    """Unit-modulus exponentials; returns signal and its ensemble autocorrelation function."""
    freqs = rng.uniform(-np.pi, np.pi, p)
    amps = rng.uniform(0.5, 2.0, p) * np.exp(1j * rng.uniform(0, 2 * np.pi, p))
    if real:
        freqs = np.abs(freqs)
        k = np.arange(n)
        x = np.sum(np.abs(amps)[:, None] * np.cos(np.outer(freqs, k) + np.angle(amps)[:, None]), axis=0)
        power = np.abs(amps) ** 2 / 2

        def acf(m):
            return np.array([np.sum(power * np.cos(freqs * t)) for t in range(m + 1)])
    else:
        k = np.arange(n)
        x = np.sum(amps[:, None] * np.exp(1j * np.outer(freqs, k)), axis=0)
        power = np.abs(amps) ** 2

        def acf(m):
            return np.array([np.sum(power * np.exp(1j * freqs * t)) for t in range(m + 1)])
    return x, acf


def naive_autocorrelation(x, max_lag):
    return np.array([sum(x[k] * np.conj(x[k - t]) for k in range(t, len(x)))
                     for t in range(max_lag + 1)])


def dense_solve(r, order):
    r = np.asarray(r)
    # R[i, j] = r[i - j], Hermitian; equations sum_j a_j r[i - j] = r[i]
    col = r[:order]
    R = toeplitz(col, np.conj(col))
    return solve(R, r[1 : order + 1])


def test_autocorrelation_small_case():
    assert np.allclose(autocorrelation([1, 1, 1, 1], 1), [4, 3])


def test_autocorrelation_of_rotation_has_linear_magnitude():
    k = np.arange(50)
    r = autocorrelation(np.exp(0.7j * k), 10)
    assert np.allclose(np.abs(r), 50 - np.arange(11))


@pytest.mark.parametrize("complex_input", [False, True])
def test_autocorrelation_matches_naive(complex_input, rng):
    x = rng.standard_normal(64)
    if complex_input:
        x = x + 1j * rng.standard_normal(64)
    r = autocorrelation(x, 12)
    ref = naive_autocorrelation(x, 12)
    assert np.max(np.abs(r - ref)) <= 1e-12 * np.abs(ref[0])
    assert np.isreal(r[0]) and r[0].real >= 0


def test_autocorrelation_errors():
    with pytest.raises(DataError):
        autocorrelation([], 0)
    with pytest.raises(DataError):
        autocorrelation([1.0, 2.0], 2)


def test_sinusoid_recurrence():
    w = 0.9
    x = np.cos(w * np.arange(4000))
    coeffs, err = fit(x, 2)
    assert np.allclose(coeffs.a, [2 * np.cos(w), -1], atol=2e-3)
    # the ensemble autocorrelation of a sinusoid is cos(w * tau) / 2
    exact, err = levinson_durbin(np.cos(w * np.arange(3)) / 2, 2)
    assert np.allclose(exact.a, [2 * np.cos(w), -1], atol=1e-12)
    assert err == pytest.approx(0.0, abs=1e-12)
    assert np.max(np.abs(residual(x, exact))) < 1e-9


def test_complex_rotation_identity():
    w = 1.3
    exact, err = levinson_durbin(np.exp(1j * w * np.arange(2)), 1)
    assert exact.a[0] == pytest.approx(np.exp(1j * w))
    x = np.exp(1j * w * np.arange(200))
    assert np.max(np.abs(residual(x, exact))) < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_matches_dense_solve_on_random_ar4(seed):
    r_ = np.random.default_rng(seed)
    poles = r_.uniform(0.3, 0.9, 2) * np.exp(1j * r_.uniform(0.2, 3.0, 2))
    poly = np.real(np.poly(np.concatenate([poles, poles.conj()])))
    e = r_.standard_normal(6000)
    x = np.zeros_like(e)
    for k in range(len(e)):
        x[k] = e[k] - sum(poly[i] * x[k - i] for i in range(1, 5) if k >= i)
    r = autocorrelation(x, 4)
    coeffs, _ = levinson_durbin(r, 4)
    ref = dense_solve(r, 4)
    assert np.max(np.abs(coeffs.a - ref)) <= 1e-8 * np.max(np.abs(ref))
    # AR(4) coefficients are recovered statistically
    assert np.allclose(coeffs.a, -poly[1:], atol=0.1)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
@pytest.mark.parametrize("extra", [0, 2])
def test_order_sufficiency_complex(p, extra):
    r_ = np.random.default_rng(100 + p)
    x, acf = exponential_mixture(r_, p, 2000)
    coeffs, err = levinson_durbin(acf(p + extra), p + extra)
    d = residual(x, coeffs)
    assert np.sqrt(np.mean(np.abs(d) ** 2) / np.mean(np.abs(x) ** 2)) < 1e-6
    assert err == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_order_sufficiency_real(p):
    r_ = np.random.default_rng(200 + p)
    x, acf = exponential_mixture(r_, p, 2000, real=True)
    coeffs, _ = levinson_durbin(acf(2 * p), 2 * p)
    assert np.isrealobj(coeffs.a)
    d = residual(x, coeffs)
    assert np.sqrt(np.mean(d**2) / np.mean(x**2)) < 1e-6


def test_three_exponentials_exact_fit():
    r_ = np.random.default_rng(7)
    x, acf = exponential_mixture(r_, 3, 5000)
    coeffs, _ = levinson_durbin(acf(3), 3)
    d = residual(x, coeffs)
    assert np.sqrt(np.mean(np.abs(d) ** 2) / np.mean(np.abs(x) ** 2)) < 1e-6
    # data-based fit is close, limited by the finite-sample estimator bias
    est, _ = fit(x, 3)
    assert np.sqrt(np.mean(np.abs(residual(x, est)) ** 2) / np.mean(np.abs(x) ** 2)) < 0.05


def test_residual_power_matches_reported_error(rng):
    e = rng.standard_normal(200000)
    x = e.copy()
    x[1:] += 0.6 * e[:-1]
    coeffs, err = fit(x, 6)
    d = residual(x, coeffs)
    assert np.sum(d**2) == pytest.approx(err, rel=0.05)


def test_reported_error_equals_zero_extended_residual(rng):
    x = rng.standard_normal(300) + 1j * rng.standard_normal(300)
    coeffs, err = fit(x, 5)
    padded = np.concatenate([np.zeros(5), x, np.zeros(5)])
    d = padded - predict(padded, coeffs)
    assert np.sum(np.abs(d[5:]) ** 2) == pytest.approx(err, rel=1e-10)


def test_predict_special_cases(rng):
    x = rng.standard_normal(20)
    p = predict(x, LpcCoeffs(np.array([1.0])))
    assert np.array_equal(p[1:], x[:-1])
    assert np.all(predict(x, LpcCoeffs(np.zeros(3))) == 0)
    assert np.array_equal(residual(x, LpcCoeffs(np.zeros(3))), x[3:])
    with pytest.raises(DataError):
        predict(x[:2], LpcCoeffs(np.zeros(3)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), c=st.floats(0.01, 100.0), order=st.integers(1, 8))
def test_scale_equivariance(seed, c, order):
    r_ = np.random.default_rng(seed)
    x = r_.standard_normal(256) + 1j * r_.standard_normal(256)
    a1, _ = fit(x, order)
    a2, _ = fit(c * x, order)
    assert np.max(np.abs(a1.a - a2.a)) <= 1e-10 * max(1.0, np.max(np.abs(a1.a)))
    d1, d2 = residual(x, a1), residual(c * x, a2)
    assert np.max(np.abs(c * d1 - d2)) <= 1e-10 * np.max(np.abs(c * d1))


def test_degenerate_and_ill_conditioned():
    with pytest.raises(DegenerateSignalError):
        levinson_durbin([0.0, 0.0], 1)
    with pytest.raises(IllConditionedError) as info:
        levinson_durbin([1.0, 2.0, 0.0], 2)
    assert info.value.lag == 1
    with pytest.raises(DataError):
        levinson_durbin([1.0, 0.5], 3)
