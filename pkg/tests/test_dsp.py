import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stemscribe.audio_io import Waveform
from stemscribe.dsp import (ComplexSpectrogram, CqtConfig, LogMagParams, StftConfig,
                            WindowError, cqt, cqt_kernels, istft, log_magnitude,
                            make_window, num_cqt_frames, num_stft_frames, stft)


def dft_oracle(frame):
    """Direct O(N^2) DFT, the reference for the FFT path."""
    n = frame.size
    k = np.arange(n // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, np.arange(n)) / n)
    return basis @ frame


def tone(freq, duration, sr, phase=0.3):
    # nonzero phase so the first sample is nonzero too
    t = np.arange(int(duration * sr)) / sr
    return Waveform(np.sin(2 * np.pi * freq * t + phase)[None, :], sr)


# ---------------------------------------------------------------- windows

def test_make_window_names():
    assert np.array_equal(make_window("rectangular", 8), np.ones(8))
    hann = make_window("hann", 8)
    assert hann[0] == 0.0 and hann.max() <= 1.0
    with pytest.raises(WindowError):
        make_window("blackman-harris", 8)


def test_stft_config_validation():
    with pytest.raises(ValueError):
        StftConfig(fft_size=512, hop=0)
    with pytest.raises(ValueError):
        StftConfig(fft_size=512, hop=513)
    with pytest.raises(WindowError):
        StftConfig(window="nope")
    assert StftConfig().num_bins == 257


# ------------------------------------------------------------------ stft

def test_stft_constant_frame():
    cfg = StftConfig(fft_size=512, hop=512, window="rectangular")
    s = stft(Waveform(np.ones((1, 512)), 8000), cfg)
    assert s.bins.shape == (1, 257)
    assert abs(s.bins[0, 0]) == pytest.approx(512.0)
    assert np.abs(s.bins[0, 1:]).max() < 1e-9


def test_stft_zero_signal():
    s = stft(Waveform(np.zeros((1, 2000)), 8000), StftConfig())
    assert not s.bins.any()


def test_stft_single_frame_matches_direct_dft():
    cfg = StftConfig(fft_size=512, hop=512, window="rectangular")
    sr = 8192
    w = tone(16 * sr / 512, 512 / sr, sr, phase=0.0)  # exactly bin 16
    s = stft(w, cfg)
    assert np.argmax(np.abs(s.bins[0])) == 16
    expected = dft_oracle(w.samples[0])
    assert np.abs(s.bins[0] - expected).max() < 1e-9 * np.abs(expected).max()


def test_stft_frame_count_and_tail_padding():
    cfg = StftConfig()
    assert num_stft_frames(512, cfg) == 1
    assert num_stft_frames(100, cfg) == 1  # shorter than one window
    assert num_stft_frames(513, cfg) == 2
    assert num_stft_frames(512 + 128, cfg) == 2
    assert num_stft_frames(512 + 129, cfg) == 3
    s = stft(Waveform(np.ones((1, 513)), 8000), cfg)
    assert s.num_frames == 2


def test_stft_empty_input_rejected():
    with pytest.raises(ValueError):
        stft(Waveform(np.zeros((1, 0)), 8000), StftConfig())


@given(st.integers(0, 10_000))
@settings(max_examples=20)
def test_stft_linearity(seed):
    rng = np.random.default_rng(seed)
    cfg = StftConfig(fft_size=64, hop=16)
    x = rng.standard_normal(200)
    y = rng.standard_normal(200)
    a, b = rng.uniform(-2, 2, size=2)
    left = stft(Waveform((a * x + b * y)[None, :], 8000), cfg).bins
    right = (a * stft(Waveform(x[None, :], 8000), cfg).bins
             + b * stft(Waveform(y[None, :], 8000), cfg).bins)
    scale = np.abs(right).max() or 1.0
    assert np.abs(left - right).max() < 1e-9 * scale


def test_parseval_per_frame(rng):
    cfg = StftConfig(fft_size=64, hop=64, window="hann")
    x = rng.standard_normal(64)
    s = stft(Waveform(x[None, :], 8000), cfg).bins[0]
    windowed = x * make_window("hann", 64)
    # rfft keeps half the spectrum; double the shared bins before comparing
    power = np.abs(s) ** 2
    full = power[0] + power[-1] + 2 * power[1:-1].sum()
    assert full / 64 == pytest.approx((windowed**2).sum(), rel=1e-6)


def test_spectrogram_validation():
    cfg = StftConfig()
    with pytest.raises(ValueError):
        ComplexSpectrogram(np.zeros((4, 100), dtype=complex), cfg, 8000)
    with pytest.raises(ValueError):
        ComplexSpectrogram(np.full((2, 257), np.nan, dtype=complex), cfg, 8000)


# ----------------------------------------------------------------- istft

def interior(x, cfg):
    return x[cfg.fft_size : x.size - cfg.fft_size]


def test_istft_roundtrip_noise_interior(rng):
    cfg = StftConfig()
    x = rng.standard_normal(22050)
    back = istft(stft(Waveform(x[None, :], 22050), cfg)).samples[0][: x.size]
    err = np.linalg.norm(interior(back - x, cfg)) / np.linalg.norm(interior(x, cfg))
    assert err < 1e-6


def test_istft_roundtrip_tone():
    cfg = StftConfig()
    w = tone(440.0, 1.0, 22050)
    back = istft(stft(w, cfg)).samples[0][: w.num_samples]
    x = w.samples[0]
    err = np.linalg.norm(interior(back - x, cfg)) / np.linalg.norm(interior(x, cfg))
    assert err < 1e-6


def test_istft_zero_spectrogram():
    cfg = StftConfig()
    s = ComplexSpectrogram(np.zeros((10, 257), dtype=complex), cfg, 8000)
    assert not istft(s).samples.any()


def test_istft_gap_detection():
    # Hann at hop == fft_size leaves every frame-boundary sample uncovered.
    cfg = StftConfig(fft_size=64, hop=64, window="hann")
    s = stft(Waveform(np.ones((1, 64 * 10)), 8000), cfg)
    with pytest.raises(WindowError):
        istft(s)
    # rectangular tiles exactly at the same hop
    cfg_rect = StftConfig(fft_size=64, hop=64, window="rectangular")
    back = istft(stft(Waveform(np.ones((1, 64 * 10)), 8000), cfg_rect))
    assert np.abs(back.samples[0] - 1.0).max() < 1e-9


# --------------------------------------------------------- log magnitude

def test_log_magnitude_reference_points():
    p = LogMagParams(a_min=1e-10, ref=1.0)
    assert log_magnitude(np.array(1.0), p) == pytest.approx(0.0, abs=1e-9)
    assert log_magnitude(np.array(np.sqrt(10.0)), p) == pytest.approx(10.0, abs=1e-9)
    assert log_magnitude(np.array(0.0), p) == pytest.approx(-100.0, abs=1e-9)


def test_log_magnitude_params_validated():
    with pytest.raises(ValueError):
        LogMagParams(a_min=0.0)
    with pytest.raises(ValueError):
        LogMagParams(ref=-1.0)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_log_magnitude_monotone_and_bounded(s1, s2):
    p = LogMagParams()
    lo, hi = sorted([s1, s2])
    a, b = log_magnitude(np.array(lo), p), log_magnitude(np.array(hi), p)
    assert a <= b + 1e-12
    floor = 10 * (np.log10(p.a_min) - np.log10(max(p.a_min, p.ref**2)))
    assert a >= floor - 1e-12
    assert np.isfinite(a) and np.isfinite(b)


# ------------------------------------------------------------------- cqt

def test_cqt_config_validation():
    with pytest.raises(ValueError):
        CqtConfig(n_bins=0)
    with pytest.raises(ValueError):
        CqtConfig(n_bins=108)  # top bin would pass Nyquist at 22050


def test_cqt_center_frequencies():
    cfg = CqtConfig()
    assert cfg.center_frequency(0) == 27.5
    assert cfg.center_frequency(12) == pytest.approx(55.0)
    ratios = [cfg.center_frequency(k + 1) / cfg.center_frequency(k)
              for k in range(cfg.n_bins - 1)]
    assert np.allclose(ratios, 2 ** (1 / 12), rtol=0, atol=1e-12)


def test_cqt_tone_bins():
    cfg = CqtConfig(n_bins=36)
    for k in (0, 12, 24):
        w = tone(cfg.center_frequency(k), 2.0, cfg.sample_rate)
        out = cqt(w, cfg)
        assert out.shape == (36, num_cqt_frames(w.num_samples, cfg))
        mid = out[:, out.shape[1] // 2]  # stay clear of edge taper
        assert np.argmax(mid) == k


def test_cqt_zero_signal():
    cfg = CqtConfig(n_bins=24)
    assert not cqt(Waveform(np.zeros((1, 4000)), cfg.sample_rate), cfg).any()


def test_cqt_matches_direct_inner_products(rng):
    # Sliding-window implementation against a literal per-frame dot product.
    cfg = CqtConfig(n_bins=24, f_min=110.0, hop=256, sample_rate=8000)
    x = rng.standard_normal(2000)
    out = cqt(Waveform(x[None, :], cfg.sample_rate), cfg)
    kernels = cqt_kernels(cfg)
    pad = max(k.size for k in kernels) // 2 + 1
    n_frames = num_cqt_frames(x.size, cfg)
    padded = np.pad(x, (pad, pad + cfg.hop * n_frames))
    for k in (0, 11, 23):
        kern = kernels[k]
        for t in (0, n_frames // 2, n_frames - 1):
            start = cfg.hop * t + pad - kern.size // 2
            seg = padded[start : start + kern.size]
            assert out[k, t] == pytest.approx(abs(np.vdot(kern, seg)), abs=1e-12)


def test_num_cqt_frames_formula():
    cfg = CqtConfig()
    assert num_cqt_frames(512, cfg) == 1
    assert num_cqt_frames(513, cfg) == 2
    assert num_cqt_frames(180 * 22050, cfg) == 7752
