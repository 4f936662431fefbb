import numpy as np
import pytest
from conftest import harmonic_mixture

from clcnet import clc
from clcnet.errors import ConfigError, GeometryError, NumericError
from clcnet.filterbank import DEFAULT_BANK, HOP, Spectrogram, Waveform
from clcnet.model import (
    AdamState, Checkpoint, Enhancer, ModelParams, TrainConfig, adam_step, featurize, featurize_all,
    forward, init_params, parameter_count, run_backward, run_forward, train, zero_params,
)
from clcnet.model.network import enhance_with_coeffs
from clcnet.model.train import draw_snippet
from clcnet.oracles import oracle_enhance

TINY = dict(hidden_sizes=(8, 8, 8), n_bins=4, order=2, offset=1, lookback_ms=4.0, lookahead_ms=2.0)


def tiny_cfg(**kw):
    return TrainConfig(**{**TINY, **kw})


def random_spectrogram(rng, n_frames, n_bins=49):
    return Spectrogram(rng.standard_normal((n_frames, n_bins)) + 1j * rng.standard_normal((n_frames, n_bins)))


# --- configuration ------------------------------------------------------------------------

def test_default_geometry():
    cfg = TrainConfig()
    assert cfg.lookback_frames == 100 and cfg.lookahead_frames == 1
    assert cfg.n_features == 9792
    assert cfg.n_outputs == 2 * 48 * 6
    sizes = [9792, 512, 512, 512, 576]
    expected = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])) + 48
    assert parameter_count(cfg) == expected
    assert init_params(cfg, np.random.default_rng(0)).n_params == expected


@pytest.mark.parametrize("kw", [
    {"learning_rate": 0.0}, {"offset": -2}, {"order": -1}, {"batch_size": 0},
    {"lookback_ms": 3.0}, {"lookahead_ms": -2.0},
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_config_round_trip():
    cfg = tiny_cfg(seed=4)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"bogus": 1})


def test_pipeline_lookahead():
    assert TrainConfig(offset=1, lookahead_ms=0.0).pipeline_lookahead == 1
    assert TrainConfig(offset=-1, lookahead_ms=0.0).pipeline_lookahead == 0
    assert TrainConfig(offset=-1, lookahead_ms=4.0).pipeline_lookahead == 2


# --- features -----------------------------------------------------------------------------

def test_zero_input_gives_zero_features():
    cfg = tiny_cfg()
    assert np.all(featurize_all(np.zeros((5, 4), dtype=complex), cfg) == 0)


def test_feature_layout(rng):
    cfg = tiny_cfg()
    xn = rng.standard_normal((7, 4)) + 1j * rng.standard_normal((7, 4))
    rows = featurize_all(xn, cfg)
    for k in range(7):
        assert np.array_equal(rows[k], featurize(xn, k, cfg))
    # row k, context slot j, bin b: real at 2*(j*nb+b), imag right after
    k, j, b = 3, 0, 2
    src = k - cfg.lookback_frames + j
    assert rows[k][2 * (j * 4 + b)] == xn[src, b].real
    assert rows[k][2 * (j * 4 + b) + 1] == xn[src, b].imag
    shifted = np.concatenate([np.zeros((1, 4)), xn])
    for k in range(1, 6):
        assert np.array_equal(featurize(shifted, k + 1, cfg), featurize(xn, k, cfg))


# --- forward ------------------------------------------------------------------------------

def test_zero_params_give_silence(rng):
    cfg = tiny_cfg()
    params = zero_params(cfg)
    assert np.all(forward(params, rng.standard_normal(cfg.n_features), cfg) == 0)
    x = DEFAULT_BANK.analyze(Waveform(rng.standard_normal(960)))
    cfg48 = tiny_cfg(n_bins=48)
    y, _ = run_forward(zero_params(cfg48), x, cfg48, length=960)
    # only the unprocessed Nyquist bin survives
    nyquist = np.zeros_like(x.data)
    nyquist[:, 48] = x.data[:, 48]
    expected = DEFAULT_BANK.synthesize(x.with_data(nyquist), 960).samples
    assert np.max(np.abs(y - expected)) < 1e-12


def test_forward_is_bounded_and_deterministic(rng):
    cfg = tiny_cfg()
    params = init_params(cfg, np.random.default_rng(0))
    for w in params.weights:
        w *= 50
    f = rng.standard_normal((10, cfg.n_features)) * 100
    a = forward(params, f, cfg)
    assert a.shape == (10, cfg.order + 1, cfg.n_bins)
    assert np.all(np.abs(a.real) <= 1) and np.all(np.abs(a.imag) <= 1)
    assert np.array_equal(a, forward(params, f, cfg))
    p2 = init_params(cfg, np.random.default_rng(0))
    p3 = init_params(cfg, np.random.default_rng(0))
    assert all(np.array_equal(u, v) for u, v in zip(p2.flat(), p3.flat()))


def test_forward_geometry_error():
    cfg = tiny_cfg()
    with pytest.raises(GeometryError):
        forward(zero_params(cfg), np.zeros(cfg.n_features + 1), cfg)
    with pytest.raises(GeometryError):
        Enhancer(zero_params(cfg), tiny_cfg(order=3))


# --- backward -----------------------------------------------------------------------------

def quadratic_loss(params, x, target, cfg):
    y, tape = run_forward(params, x, cfg, length=len(target))
    return 0.5 * np.sum((y - target) ** 2), y - target, tape


def test_gradient_matches_finite_differences(rng):
    cfg = tiny_cfg()
    x = random_spectrogram(rng, 6)
    target = rng.standard_normal(6 * HOP)
    params = init_params(cfg, np.random.default_rng(2))
    for b in params.biases:
        b += rng.uniform(-0.1, 0.1, b.shape)
    params.gamma = rng.uniform(0.5, 1.5, cfg.n_bins)
    _, gy, tape = quadratic_loss(params, x, target, cfg)
    grads = run_backward(params, tape, gy, cfg)
    h = 1e-5
    worst = 0.0
    for (name, p), g in zip(params.arrays(), grads.flat()):
        for idx in list(np.ndindex(p.shape))[:: max(1, p.size // 12)]:
            orig = p[idx]
            p[idx] = orig + h
            lp = quadratic_loss(params, x, target, cfg)[0]
            p[idx] = orig - h
            lm = quadratic_loss(params, x, target, cfg)[0]
            p[idx] = orig
            num = (lp - lm) / (2 * h)
            worst = max(worst, abs(num - g[idx]) / max(abs(num), abs(g[idx]), 1e-6))
    assert worst < 1e-4


def test_backward_zero_upstream(rng):
    cfg = tiny_cfg()
    x = random_spectrogram(rng, 6)
    params = init_params(cfg, np.random.default_rng(0))
    y, tape = run_forward(params, x, cfg)
    grads = run_backward(params, tape, np.zeros(len(y)), cfg)
    assert all(np.all(g == 0) for g in grads.flat())


def test_gamma_gradient_zero_for_silent_bin(rng):
    cfg = tiny_cfg()
    data = random_spectrogram(rng, 8).data
    data[:, 2] = 0
    x = Spectrogram(data)
    params = init_params(cfg, np.random.default_rng(0))
    y, tape = run_forward(params, x, cfg)
    grads = run_backward(params, tape, rng.standard_normal(len(y)), cfg)
    assert grads.gamma[2] == 0 and np.all(grads.gamma[[0, 1, 3]] != 0)


def test_backward_without_tape():
    cfg = tiny_cfg()
    with pytest.raises(NumericError):
        run_backward(zero_params(cfg), None, np.zeros(10), cfg)


# --- optimizer ----------------------------------------------------------------------------

def test_adam_zero_gradient_is_noop(rng):
    p = [rng.standard_normal(5)]
    before = p[0].copy()
    adam_step(p, [np.zeros(5)], AdamState.zeros_like(p), lr=0.1)
    assert np.array_equal(p[0], before)


def test_adam_first_step_is_signed_lr(rng):
    p = [np.zeros(6)]
    g = rng.standard_normal(6)
    adam_step(p, [g], AdamState.zeros_like(p), lr=1e-3)
    assert np.allclose(p[0], -1e-3 * np.sign(g), rtol=1e-4)


def test_adam_minimizes_quadratic(rng):
    c = rng.standard_normal(10)
    p = [np.zeros(10)]
    state = AdamState.zeros_like(p)
    for _ in range(2000):
        adam_step(p, [2 * (p[0] - c)], state, lr=1e-2)
    assert np.sum((p[0] - c) ** 2) < 1e-6


def test_adam_rejects_nonfinite():
    p = [np.zeros(3)]
    with pytest.raises(NumericError, match="W0"):
        adam_step(p, [np.array([0, np.nan, 0])], AdamState.zeros_like(p), names=["W0"])
    assert np.all(p[0] == 0)


# --- checkpoints and training -------------------------------------------------------------

def train_cfg(**kw):
    base = dict(n_bins=48, hidden_sizes=(16, 16), snippet_s=0.1, batch_size=2, max_steps=4,
                val_every=2, val_count=2, ckpt_every=2, learning_rate=1e-3)
    return tiny_cfg(**{**base, **kw})


def test_checkpoint_round_trip_is_byte_exact(small_corpus, tmp_path):
    result = train(small_corpus, train_cfg(max_steps=2), tmp_path)
    blob = result.last.to_bytes()
    assert blob[:8] == b"CLCNETCK"
    again = Checkpoint.from_bytes(blob)
    assert again.to_bytes() == blob
    loaded = Checkpoint.load(tmp_path / "checkpoints" / "last.ckpt")
    assert loaded.to_bytes() == blob
    assert (tmp_path / "checkpoints" / "best.ckpt").exists()


def test_training_is_deterministic(small_corpus):
    a = train(small_corpus, train_cfg())
    b = train(small_corpus, train_cfg())
    assert a.last.to_bytes() == b.last.to_bytes()
    c = train(small_corpus, train_cfg(seed=1))
    assert c.last.to_bytes() != a.last.to_bytes()


def test_resume_is_bit_exact(small_corpus, tmp_path):
    full = train(small_corpus, train_cfg(), tmp_path / "full")
    part = train(small_corpus, train_cfg(), tmp_path / "part", stop_after=2)
    assert part.last.step == 2
    resumed = train(small_corpus, train_cfg(), tmp_path / "part",
                    resume=Checkpoint.load(tmp_path / "part" / "checkpoints" / "last.ckpt"))
    assert resumed.last.to_bytes() == full.last.to_bytes()
    for name in ("metrics.csv", "validation.csv"):
        assert (tmp_path / "part" / "logs" / name).read_text() == \
            (tmp_path / "full" / "logs" / name).read_text()


def test_delta_100_target_is_clean(small_corpus):
    cfg = train_cfg(delta_snr_t=100.0)
    snip = draw_snippet(np.random.default_rng(0), small_corpus, "train", cfg)
    noise = snip.noisy - snip.clean
    err = snip.target - snip.clean
    assert np.max(np.abs(err - 1e-5 * noise)) <= 1e-9 * np.max(np.abs(noise))


# --- known operator and streaming ---------------------------------------------------------

def test_clc_tail_matches_oracle_pipeline():
    clean, noisy = harmonic_mixture(2, 0.0, duration=0.5)
    m, s = DEFAULT_BANK.analyze(noisy), DEFAULT_BANK.analyze(clean)
    coeffs = clc.oracle_clc_coeffs(m, s)
    y = enhance_with_coeffs(m, coeffs, length=len(noisy))
    assert np.array_equal(y, oracle_enhance("clc", clean, noisy).samples)


@pytest.mark.parametrize("offset,lookahead_ms", [(-1, 0.0), (0, 2.0), (1, 2.0), (2, 0.0)])
def test_streaming_equals_delayed_offline(offset, lookahead_ms):
    cfg = tiny_cfg(n_bins=48, hidden_sizes=(16,), offset=offset, lookahead_ms=lookahead_ms, order=3)
    params = init_params(cfg, np.random.default_rng(5))
    w = Waveform(np.random.default_rng(6).standard_normal(40 * HOP + 17))
    enh = Enhancer(params, cfg)
    offline = enh.enhance(w).samples
    streamed = enh.stream(w).samples
    assert len(streamed) == len(w)
    assert np.max(np.abs(offline - streamed)) < 1e-10
    assert enh.delay == 96 + max(offset, cfg.lookahead_frames, 0) * HOP


def test_identity_network_reproduces_input():
    # a network whose output is the identity coefficient set returns the delayed input
    cfg = tiny_cfg(n_bins=48, hidden_sizes=(4,), order=2, offset=1)
    params = zero_params(cfg)
    ident = clc.identity_coeffs(1, 48, 2, 1).data[0]
    out_bias = np.stack([ident.real, ident.imag], axis=-1).reshape(-1)
    params.biases[-1] = np.arctanh(np.clip(out_bias, -0.999999999, 0.999999999))
    w = Waveform(np.random.default_rng(1).standard_normal(20 * HOP))
    enh = Enhancer(params, cfg)
    y = enh.enhance(w).samples
    d = enh.delay
    assert np.max(np.abs(y[d + HOP :] - w.samples[HOP : len(w) - d])) < 1e-6
    assert isinstance(params, ModelParams)
