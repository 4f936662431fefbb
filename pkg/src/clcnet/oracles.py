"""Oracle enhancement baselines that see the clean signal.

All four act on every stored bin, Nyquist included: they are reference
upper bounds, not constrained enhancement.
"""

from __future__ import annotations

from . import clc
from .filterbank import DEFAULT_BANK, Waveform
from .model.network import enhance_with_coeffs

ORACLE_MODES = ("wf", "clc", "iam", "cirm")


def oracle_enhance(mode: str, clean: Waveform, noisy: Waveform, order: int = clc.DEFAULT_ORDER,
                   offset: int = clc.DEFAULT_OFFSET, window: int = clc.ORACLE_WINDOW,
                   ridge: float = clc.ORACLE_RIDGE, iam_cap: float = clc.IAM_CAP,
                   bank=DEFAULT_BANK) -> Waveform:
    """Enhanced waveform, time-aligned with the input (no delay)."""
    s = bank.analyze(clean)
    m = bank.analyze(noisy)
    if mode == "wf":
        n = m.with_data(m.data - s.data)
        out = clc.apply_mask(m, clc.oracle_wiener_gain(s, n))
    elif mode == "iam":
        out = clc.apply_mask(m, clc.oracle_masks(s, m, iam_cap=iam_cap)["iam"])
    elif mode == "cirm":
        out = clc.apply_mask(m, clc.oracle_masks(s, m, iam_cap=iam_cap)["cirm"])
    elif mode == "clc":
        coeffs = clc.oracle_clc_coeffs(m, s, order, offset, ridge, window)
        return Waveform(enhance_with_coeffs(m, coeffs, bank, len(noisy)), noisy.sample_rate)
    else:
        raise ValueError(f"unknown oracle {mode!r}; expected one of {ORACLE_MODES}")
    return bank.synthesize(out, len(noisy))
