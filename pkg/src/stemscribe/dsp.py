"""Time-frequency transforms: STFT, overlap-add inverse, log-magnitude
scaling, and a direct constant-Q filterbank.

Spectrogram layout conventions:
  * STFT grids are (frames, bins) with bins = fft_size // 2 + 1.
  * CQT grids are (bins, frames), one row per log-spaced bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform


class WindowError(ValueError):
    """Window/hop pair unusable for analysis or reconstruction."""


def make_window(name: str, length: int) -> np.ndarray:
    if name == "hann":
        # Periodic Hann; sums to a constant at hop = length / 4.
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    if name == "rectangular":
        return np.ones(length)
    raise WindowError(f"unknown window {name!r}")


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    hop: int = 128
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"need 0 < hop <= fft_size, got hop={self.hop}, fft_size={self.fft_size}")
        make_window(self.window, self.fft_size)

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1


@dataclass
class ComplexSpectrogram:
    """(frames, bins) complex STFT grid plus the analysis parameters."""

    bins: np.ndarray
    config: StftConfig
    sample_rate: int

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.complex128)
        if self.bins.ndim != 2 or self.bins.shape[1] != self.config.num_bins:
            raise ValueError(
                f"expected (frames, {self.config.num_bins}) grid, got {self.bins.shape}"
            )
        if not np.all(np.isfinite(self.bins)):
            raise ValueError("spectrogram contains NaN or Inf")

    @property
    def num_frames(self) -> int:
        return self.bins.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.bins)


@dataclass(frozen=True)
class LogMagParams:
    a_min: float = 1e-10
    ref: float = 1.0

    def __post_init__(self):
        if self.a_min <= 0 or self.ref <= 0:
            raise ValueError("a_min and ref must be positive")


def num_stft_frames(n_samples: int, cfg: StftConfig) -> int:
    if n_samples <= cfg.fft_size:
        return 1
    return 1 + int(np.ceil((n_samples - cfg.fft_size) / cfg.hop))


def stft(w: Waveform, cfg: StftConfig) -> ComplexSpectrogram:
    """Windowed rFFT over sliding frames; the last frame is zero-padded."""
    x = w.mono_samples()
    if x.size == 0:
        raise ValueError("cannot transform an empty waveform")
    n_frames = num_stft_frames(x.size, cfg)
    padded_len = (n_frames - 1) * cfg.hop + cfg.fft_size
    x = np.pad(x, (0, padded_len - x.size))
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = x[idx] * make_window(cfg.window, cfg.fft_size)[None, :]
    return ComplexSpectrogram(np.fft.rfft(frames, axis=1), cfg, w.sample_rate)


def _window_norm(cfg: StftConfig, n_frames: int) -> np.ndarray:
    win = make_window(cfg.window, cfg.fft_size)
    out_len = (n_frames - 1) * cfg.hop + cfg.fft_size
    norm = np.zeros(out_len)
    for t in range(n_frames):
        norm[t * cfg.hop : t * cfg.hop + cfg.fft_size] += win**2
    return norm


def istft(s: ComplexSpectrogram) -> Waveform:
    """Weighted overlap-add inverse; exact for unmodified spectrograms
    wherever the squared-window sum is nonzero."""
    cfg = s.config
    win = make_window(cfg.window, cfg.fft_size)
    norm = _window_norm(cfg, s.num_frames)
    if norm.size > 2 * cfg.fft_size:
        # Away from the edges, overlapping squared windows must tile the
        # signal or frames were lost between hops.
        if norm[cfg.fft_size : -cfg.fft_size].min() < 1e-10:
            raise WindowError(
                f"window {cfg.window!r} with hop {cfg.hop} leaves gaps; cannot invert"
            )
    frames = np.fft.irfft(s.bins, n=cfg.fft_size, axis=1) * win[None, :]
    out = np.zeros(norm.size)
    for t in range(s.num_frames):
        out[t * cfg.hop : t * cfg.hop + cfg.fft_size] += frames[t]
    nonzero = norm > 1e-12
    out[nonzero] /= norm[nonzero]
    return Waveform(out[None, :], s.sample_rate)


def log_magnitude(magnitudes: np.ndarray, params: LogMagParams = LogMagParams()) -> np.ndarray:
    """Decibel scaling of a magnitude grid, floored at a_min for stability."""
    s = np.asarray(magnitudes, dtype=np.float64)
    power = np.maximum(s**2, params.a_min)
    ref = max(params.a_min, params.ref**2)
    return 10.0 * (np.log10(power) - np.log10(ref))


@dataclass(frozen=True)
class CqtConfig:
    n_bins: int = 84
    bins_per_octave: int = 12
    f_min: float = 27.5
    hop: int = 512
    sample_rate: int = 22050

    def __post_init__(self):
        if self.n_bins <= 0 or self.bins_per_octave <= 0 or self.f_min <= 0 or self.hop <= 0:
            raise ValueError("CQT parameters must be positive")
        if self.max_frequency() >= self.sample_rate / 2:
            raise ValueError(
                f"top bin {self.max_frequency():.1f} Hz reaches Nyquist "
                f"({self.sample_rate / 2:.1f} Hz)"
            )

    def center_frequency(self, k: int) -> float:
        return self.f_min * 2.0 ** (k / self.bins_per_octave)

    def max_frequency(self) -> float:
        return self.center_frequency(self.n_bins - 1)


def cqt_kernels(cfg: CqtConfig) -> list[np.ndarray]:
    """One complex kernel per bin, Hann-windowed and L1-normalized, with
    length set by the constant quality factor Q = 1 / (2^(1/bpo) - 1)."""
    q = 1.0 / (2.0 ** (1.0 / cfg.bins_per_octave) - 1.0)
    kernels = []
    for k in range(cfg.n_bins):
        f_k = cfg.center_frequency(k)
        n_k = int(np.ceil(q * cfg.sample_rate / f_k))
        win = make_window("hann", n_k)
        t = np.arange(n_k) - (n_k - 1) / 2.0
        kernel = win * np.exp(-2j * np.pi * f_k * t / cfg.sample_rate)
        kernels.append(kernel / win.sum())
    return kernels


def num_cqt_frames(n_samples: int, cfg: CqtConfig) -> int:
    return int(np.ceil(n_samples / cfg.hop))


def cqt(w: Waveform, cfg: CqtConfig) -> np.ndarray:
    """Constant-Q magnitudes, shape (n_bins, frames), frames centered at
    multiples of the hop."""
    x = w.mono_samples()
    if x.size == 0:
        raise ValueError("cannot transform an empty waveform")
    kernels = cqt_kernels(cfg)
    n_frames = num_cqt_frames(x.size, cfg)
    pad = max(k.size for k in kernels) // 2 + 1
    padded = np.pad(x, (pad, pad + cfg.hop * n_frames))
    out = np.empty((cfg.n_bins, n_frames))
    for k, kernel in enumerate(kernels):
        n_k = kernel.size
        starts = cfg.hop * np.arange(n_frames) + pad - n_k // 2
        segs = padded[starts[:, None] + np.arange(n_k)[None, :]]
        out[k] = np.abs(segs @ np.conj(kernel))
    return out
