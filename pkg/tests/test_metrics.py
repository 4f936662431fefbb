import csv

import numpy as np
import pytest
from conftest import harmonic_mixture
from hypothesis import given, settings
from hypothesis import strategies as st

from clcnet.errors import DataError
from clcnet.metrics import (
    SI_SDR_CAP, TABLE_BUCKETS, EvalReport, evaluate, rmse, rmse_with_grad, score_utterance, si_sdr,
    si_sdr_with_grad, stoi,
)
from clcnet.oracles import oracle_enhance


def orthogonal_pair(rng, n=4000):
    ref = rng.standard_normal(n)
    e = rng.standard_normal(n)
    e -= np.dot(e, ref) / np.dot(ref, ref) * ref
    return ref, e


# --- RMSE / SI-SDR ------------------------------------------------------------------------

def test_rmse_cases(rng):
    x = rng.standard_normal(100)
    assert rmse(x, x) == 0.0
    assert rmse(x, x + 0.1) == pytest.approx(0.1)
    y = rng.standard_normal(100)
    assert rmse(x, y) == pytest.approx(np.sqrt(np.sum((x - y) ** 2) / 100), rel=1e-14)
    with pytest.raises(DataError):
        rmse(x, y[:-1])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_rmse_triangle_inequality(seed):
    r = np.random.default_rng(seed)
    a, b, c = r.standard_normal((3, 50))
    assert rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12


def test_si_sdr_cap_cases(rng):
    ref = rng.standard_normal(1000)
    assert si_sdr(ref, ref) == SI_SDR_CAP
    assert si_sdr(ref, 3.5 * ref) == SI_SDR_CAP
    assert si_sdr(ref, -ref) == SI_SDR_CAP
    with pytest.raises(DataError):
        si_sdr(np.zeros(10), np.ones(10))


def test_si_sdr_orthogonal_20db(rng):
    ref, e = orthogonal_pair(rng)
    e *= np.sqrt(np.dot(ref, ref) / 100 / np.dot(e, e))
    assert si_sdr(ref, ref + e) == pytest.approx(20.0, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(0.1, 10), b=st.floats(0.01, 10),
       c=st.floats(1e-3, 1e3))
def test_si_sdr_closed_form_and_scale_invariance(seed, a, b, c):
    r = np.random.default_rng(seed)
    ref, orth = orthogonal_pair(r, 500)
    est = a * ref + b * orth
    closed = 10 * np.log10(a**2 * np.dot(ref, ref) / (b**2 * np.dot(orth, orth)))
    assert si_sdr(ref, est) == pytest.approx(np.clip(closed, -100, 100), abs=1e-8)
    assert abs(si_sdr(ref, c * est) - si_sdr(ref, est)) <= 1e-9


def test_rmse_gradient(rng):
    ref, est = rng.standard_normal((2, 30))
    _, g = rmse_with_grad(ref, est)
    h = 1e-6
    for i in range(0, 30, 7):
        e1, e2 = est.copy(), est.copy()
        e1[i] += h
        e2[i] -= h
        assert g[i] == pytest.approx((rmse(ref, e1) - rmse(ref, e2)) / (2 * h), rel=1e-6)


def test_si_sdr_gradient(rng):
    ref = rng.standard_normal(40)
    est = ref + 0.3 * rng.standard_normal(40)
    value, g = si_sdr_with_grad(ref, est)
    assert value == pytest.approx(si_sdr(ref, est), abs=1e-6)
    h = 1e-6
    for i in range(0, 40, 5):
        e1, e2 = est.copy(), est.copy()
        e1[i] += h
        e2[i] -= h
        num = (si_sdr_with_grad(ref, e1)[0] - si_sdr_with_grad(ref, e2)[0]) / (2 * h)
        assert g[i] == pytest.approx(num, rel=1e-5, abs=1e-8)


def test_loss_si_sdr_is_finite_at_extremes(rng):
    ref = rng.standard_normal(100)
    assert np.isfinite(si_sdr_with_grad(ref, ref)[0])
    value, g = si_sdr_with_grad(ref, np.zeros(100))
    assert np.isfinite(value) and np.all(np.isfinite(g))


# --- STOI ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def speech():
    clean, noisy = harmonic_mixture(11, 0.0, duration=2.0)
    return clean.samples


def test_stoi_identity(speech):
    assert stoi(speech, speech) == pytest.approx(1.0, abs=1e-6)


def test_stoi_scale_invariant(speech, rng):
    est = speech + 0.3 * rng.standard_normal(len(speech)) * np.std(speech)
    assert stoi(speech, 7.0 * est) == pytest.approx(stoi(speech, est), abs=1e-9)


def test_stoi_monotone_in_snr(rng):
    values = {}
    for snr in (20, -5):
        clean, noisy = harmonic_mixture(4, snr, duration=2.0)
        values[snr] = stoi(clean.samples, noisy.samples)
    assert values[20] > values[-5]
    assert all(-1 <= v <= 1 for v in values.values())


def test_stoi_errors(speech):
    with pytest.raises(DataError):
        stoi(speech, speech[:-1])
    with pytest.raises(DataError):
        stoi(np.zeros(48000), np.ones(48000))
    with pytest.raises(DataError):
        stoi(speech[:2400], speech[:2400])


def test_stoi_matches_reference_implementation(rng):
    pystoi = pytest.importorskip("pystoi")
    clean, noisy = harmonic_mixture(8, 0.0, duration=2.0)
    # compare at 10 kHz so both sides skip their (different) resamplers
    from scipy.signal import resample_poly

    x = resample_poly(clean.samples, 5, 12)
    y = resample_poly(noisy.samples, 5, 12)
    assert stoi(x, y, sample_rate=10000) == pytest.approx(pystoi.stoi(x, y, 10000), abs=1e-9)


# --- evaluation report ------------------------------------------------------------------

@pytest.fixture(scope="module")
def bucket_items():
    items = []
    for j, snr in enumerate(TABLE_BUCKETS):
        for i in range(2):
            clean, noisy = harmonic_mixture(100 + 10 * j + i, snr, duration=1.5)
            clean.samples[:48] = 0.0
            items.append((f"u{j}{i}", clean, noisy, snr))
    return items


def test_enhanced_equals_clean(bucket_items):
    report = evaluate([(u, c, n, c, s) for u, c, n, s in bucket_items])
    assert all(r.si_sdr == SI_SDR_CAP for r in report.rows)
    assert all(r.delta_stoi >= 0 for r in report.rows)


def test_enhanced_equals_noisy(bucket_items):
    report = evaluate([(u, c, n, n, s) for u, c, n, s in bucket_items])
    assert all(r.delta_stoi == 0 and r.si_sdr == r.si_sdr_noisy for r in report.rows)


def test_wiener_oracle_improves_every_bucket(bucket_items):
    report = evaluate([(u, c, n, oracle_enhance("wf", c, n), s) for u, c, n, s in bucket_items])
    assert report.buckets() == list(TABLE_BUCKETS)
    for b in report.buckets():
        assert report.mean("si_sdr", b) >= report.mean("si_sdr_noisy", b)


def test_aggregates_ignore_order_and_csv_round_trips(bucket_items, tmp_path):
    rows = evaluate([(u, c, n, n, s) for u, c, n, s in bucket_items]).rows
    a = EvalReport(rows).aggregates()
    b = EvalReport(rows[::-1]).aggregates()
    assert a == b
    EvalReport(rows).write_csv(tmp_path / "u.csv")
    EvalReport(rows).write_aggregate_csv(tmp_path / "a.csv")
    with open(tmp_path / "u.csv", newline="") as fh:
        got = list(csv.DictReader(fh))
    assert list(got[0]) == ["utt_id", "snr_db", "si_sdr_noisy", "si_sdr", "stoi_noisy", "stoi",
                            "delta_stoi"]
    assert len(got) == len(rows)
    for g, r in zip(got, rows):
        assert float(g["delta_stoi"]) == pytest.approx(float(g["stoi"]) - float(g["stoi_noisy"]),
                                                       abs=1e-9)
    with open(tmp_path / "a.csv", newline="") as fh:
        agg = list(csv.DictReader(fh))
    assert {"q25", "median", "q75", "mean"} <= set(agg[0])


def test_delay_compensation(rng):
    clean, _ = harmonic_mixture(3, 10.0, duration=1.5)
    delayed = np.concatenate([np.zeros(144), clean.samples])[: len(clean)]
    row = score_utterance("d", clean, clean, delayed, 10.0, delay=144)
    assert row.si_sdr == SI_SDR_CAP
