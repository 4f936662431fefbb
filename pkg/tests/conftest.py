import numpy as np
import pytest

from clcnet.config import PROFILES, RunConfig
from clcnet.data import synthetic_corpus


def smoke_config(**kw):
    return RunConfig().update(PROFILES["smoke"]).train_config().replace(**kw)


@pytest.fixture(scope="session")
def corpus():
    return synthetic_corpus(seed=0, n_speech=12, n_noise=12, duration=3.0, noise_duration=6.0)


@pytest.fixture(scope="session")
def small_corpus():
    return synthetic_corpus(seed=3, n_speech=6, n_noise=6, duration=1.5, noise_duration=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def harmonic_mixture(seed, snr_db, duration=1.0, f0_range=(85.0, 125.0)):
    """Speech-like harmonic signal (>= 2 harmonics per 250 Hz band) in white noise."""
    from clcnet.data import synth_speech
    from clcnet.filterbank import Waveform

    clean = synth_speech(seed, duration, f0_range, pauses=False).samples
    noise = np.random.default_rng(10_000 + seed).standard_normal(len(clean))
    noise *= np.sqrt(np.mean(clean**2) / np.mean(noise**2) / 10 ** (snr_db / 10))
    return Waveform(clean), Waveform(clean + noise)


# --- acceptance report -------------------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _CRITERIA.get(number, ("PASS", ""))
    detail = dict(report.user_properties).get("detail", prev[1])
    if failed or prev[0] == "FAIL":
        _CRITERIA[number] = ("FAIL", detail)
    elif report.when == "call":
        _CRITERIA[number] = ("PASS", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
