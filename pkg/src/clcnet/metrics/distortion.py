"""Waveform distortion measures and their gradients."""

from __future__ import annotations

import numpy as np

from ..errors import DataError

SI_SDR_CAP = 100.0
LOSS_EPS = 1e-8


def _pair(ref, est):
    ref = np.asarray(getattr(ref, "samples", ref), dtype=np.float64)
    est = np.asarray(getattr(est, "samples", est), dtype=np.float64)
    if ref.shape != est.shape:
        raise DataError(f"length mismatch: {ref.shape} vs {est.shape}")
    return ref, est


def rmse(ref, est) -> float:
    ref, est = _pair(ref, est)
    return float(np.sqrt(np.mean((ref - est) ** 2)))


def si_sdr(ref, est, cap: float = SI_SDR_CAP) -> float:
    """Scale-invariant SDR in dB, capped at ``cap`` (exact matches and
    pure rescalings of ``ref`` return the cap)."""
    ref, est = _pair(ref, est)
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise DataError("SI-SDR reference is all zeros")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    noise = target - est
    num = np.dot(target, target)
    den = np.dot(noise, noise)
    if den == 0:
        return cap
    if num == 0:
        return -cap
    return float(np.clip(10.0 * np.log10(num / den), -cap, cap))


def rmse_with_grad(ref, est):
    ref, est = _pair(ref, est)
    diff = est - ref
    value = np.sqrt(np.mean(diff**2))
    if value == 0:
        return 0.0, np.zeros_like(est)
    return float(value), diff / (len(diff) * value)


def si_sdr_with_grad(ref, est, eps: float = LOSS_EPS):
    """Differentiable SI-SDR (dB) used in the training loss.

    Both numerator and denominator carry ``eps`` so silent estimates and
    perfect reconstructions stay finite.
    """
    ref, est = _pair(ref, est)
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise DataError("SI-SDR reference is all zeros")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    resid = est - target
    p = np.dot(target, target) + eps
    q = np.dot(resid, resid) + eps
    value = 10.0 * np.log10(p / q)
    c = 10.0 / np.log(10.0)
    grad = c * (2.0 * target / p - 2.0 * resid / q)
    return float(value), grad
