"""PCM WAV decode/encode and sample-rate conversion.

Supports RIFF/WAVE containers with 16-bit integer PCM or 32-bit IEEE
float payloads, little-endian throughout. Integer samples are mapped to
[-1, 1] on read and quantized back on write, so a read/write round trip
is exact to within one LSB of the chosen bit depth.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

WAVE_FORMAT_PCM = 1
WAVE_FORMAT_IEEE_FLOAT = 3


class WavFormatError(ValueError):
    """Raised when a file is not a well-formed RIFF/WAVE container."""


class UnsupportedCodecError(WavFormatError):
    """Raised for WAVE payloads other than PCM16 or IEEE float32."""


@dataclass
class Waveform:
    """Sampled audio. ``samples`` has shape (channels, n_samples)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 2:
            raise ValueError("samples must be a (channels, n) array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain NaN or Inf")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def to_mono(self) -> "Waveform":
        """Downmix by channel mean. Identity for mono input."""
        if self.channels == 1:
            return self
        return Waveform(self.samples.mean(axis=0, keepdims=True), self.sample_rate)

    def mono_samples(self) -> np.ndarray:
        """1-D view of the channel-mean signal."""
        return self.to_mono().samples[0]


def read_wav(path) -> Waveform:
    """Decode a PCM16 or float32 WAV file.

    Raises FileNotFoundError for a missing file, WavFormatError for a
    malformed RIFF container, UnsupportedCodecError for other codecs.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavFormatError(f"{path}: too short for a RIFF header")
    if data[0:4] != b"RIFF":
        raise WavFormatError(f"{path}: missing RIFF magic (got {data[0:4]!r})")
    if data[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a WAVE form (got {data[8:12]!r})")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)  # chunks are word-aligned

    if fmt is None:
        raise WavFormatError(f"{path}: no fmt chunk")
    if payload is None:
        raise WavFormatError(f"{path}: no data chunk")

    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if n_channels < 1:
        raise WavFormatError(f"{path}: invalid channel count {n_channels}")

    if audio_format == WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(
            f"{path}: unsupported codec (format={audio_format}, bits={bits})"
        )

    n_frames = samples.size // n_channels
    samples = samples[: n_frames * n_channels].reshape(n_frames, n_channels).T
    return Waveform(samples, sample_rate)


def write_wav(w: Waveform, path, bit_depth: int = 16) -> None:
    """Encode as PCM16 (default) or IEEE float32."""
    if bit_depth == 16:
        audio_format, sample_width = WAVE_FORMAT_PCM, 2
        quantized = np.clip(np.round(w.samples * 32768.0), -32768, 32767)
        payload = quantized.T.astype("<i2").tobytes()
    elif bit_depth == 32:
        audio_format, sample_width = WAVE_FORMAT_IEEE_FLOAT, 4
        payload = w.samples.T.astype("<f4").tobytes()
    else:
        raise ValueError(f"bit_depth must be 16 or 32, got {bit_depth}")

    block_align = w.channels * sample_width
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH",
        16,
        audio_format,
        w.channels,
        w.sample_rate,
        w.sample_rate * block_align,
        block_align,
        sample_width * 8,
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Polyphase windowed-sinc resampling (Kaiser window).

    Output length is round(n * target_rate / source_rate); equal rates
    return the input unchanged.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == w.sample_rate:
        return w
    ratio = Fraction(target_rate, w.sample_rate)
    out_len = int(round(w.num_samples * target_rate / w.sample_rate))
    out = resample_poly(
        w.samples, ratio.numerator, ratio.denominator, axis=1, window=("kaiser", 8.0)
    )
    if out.shape[1] < out_len:
        out = np.pad(out, ((0, 0), (0, out_len - out.shape[1])))
    return Waveform(out[:, :out_len], target_rate)
