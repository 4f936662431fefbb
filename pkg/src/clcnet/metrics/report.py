"""Per-utterance scoring and per-SNR aggregation."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .distortion import si_sdr
from .stoi import stoi

TABLE_BUCKETS = (20, 10, 5, 0, -5)
ROW_FIELDS = ("utt_id", "snr_db", "si_sdr_noisy", "si_sdr", "stoi_noisy", "stoi", "delta_stoi")
AGG_STATS = ("mean", "median", "q25", "q75", "min", "max")


@dataclass
class EvalRow:
    utt_id: str
    snr_db: float
    si_sdr_noisy: float
    si_sdr: float
    stoi_noisy: float
    stoi: float
    delta_stoi: float


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def buckets(self):
        return sorted({r.snr_db for r in self.rows}, key=lambda s: -s)

    def aggregates(self) -> list[dict]:
        """One dict per (snr bucket, metric) with mean/median/quartiles."""
        out = []
        for bucket in self.buckets():
            sel = [r for r in self.rows if r.snr_db == bucket]
            for metric in ("si_sdr_noisy", "si_sdr", "stoi_noisy", "stoi", "delta_stoi"):
                v = np.array([getattr(r, metric) for r in sel])
                q25, med, q75 = np.percentile(v, [25, 50, 75])
                out.append({
                    "snr_db": bucket, "metric": metric, "count": len(v),
                    "mean": float(v.mean()), "median": float(med),
                    "q25": float(q25), "q75": float(q75),
                    "min": float(v.min()), "max": float(v.max()),
                })
        return out

    def mean(self, metric: str, snr_db=None) -> float:
        v = [getattr(r, metric) for r in self.rows if snr_db is None or r.snr_db == snr_db]
        return float(np.mean(v))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: _fmt(v) for k, v in asdict(r).items()})

    def write_aggregate_csv(self, path):
        fields = ("snr_db", "metric", "count") + AGG_STATS
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in self.aggregates():
                w.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 10))
    return v


def score_utterance(utt_id, clean, noisy, enhanced, snr_db, delay: int = 0,
                    sample_rate: int = 24000) -> EvalRow:
    """Score one utterance.  ``enhanced`` lags the input by ``delay``
    samples; it is shifted back and all signals are cut to the common
    region before scoring."""
    clean = np.asarray(getattr(clean, "samples", clean), dtype=np.float64)
    noisy = np.asarray(getattr(noisy, "samples", noisy), dtype=np.float64)
    enhanced = np.asarray(getattr(enhanced, "samples", enhanced), dtype=np.float64)
    n = len(clean) - delay
    clean, noisy, enhanced = clean[:n], noisy[:n], enhanced[delay : delay + n]
    s_noisy = stoi(clean, noisy, sample_rate)
    s_enh = stoi(clean, enhanced, sample_rate)
    return EvalRow(
        utt_id=str(utt_id),
        snr_db=float(snr_db),
        si_sdr_noisy=si_sdr(clean, noisy),
        si_sdr=si_sdr(clean, enhanced),
        stoi_noisy=s_noisy,
        stoi=s_enh,
        delta_stoi=s_enh - s_noisy,
    )


def evaluate(items, delay: int = 0, sample_rate: int = 24000) -> EvalReport:
    """``items``: iterable of ``(utt_id, clean, noisy, enhanced, snr_db)``.
    Rows keep the input order."""
    report = EvalReport()
    for utt_id, clean, noisy, enhanced, snr_db in items:
        report.rows.append(score_utterance(utt_id, clean, noisy, enhanced, snr_db,
                                           delay=delay, sample_rate=sample_rate))
    return report
