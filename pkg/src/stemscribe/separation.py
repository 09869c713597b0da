"""Vocals/accompaniment separation: mask algebra, on-the-fly remixing,
and the LSTM mask-estimator model.

A mask is a plain (frames, bins) float array in [0, 1]; applying m and
1 - m to the same spectrogram and summing reconstructs it exactly, so the
two estimated stems always add back to the mixture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .audio_io import Waveform
from .dsp import ComplexSpectrogram, LogMagParams, StftConfig, istft, log_magnitude, stft

STEM_NAMES = ("vocals", "bass", "drums", "other")

GAIN_LOW, GAIN_HIGH = 0.5, 1.25


@dataclass
class SourceSet:
    """Aligned stems of one track."""

    vocals: Waveform
    bass: Waveform
    drums: Waveform
    other: Waveform

    def __post_init__(self):
        stems = self.stems()
        rates = {w.sample_rate for w in stems.values()}
        lengths = {w.num_samples for w in stems.values()}
        if len(rates) != 1 or len(lengths) != 1:
            raise ValueError("stems must share sample rate and length")

    def stems(self) -> dict[str, Waveform]:
        return {name: getattr(self, name) for name in STEM_NAMES}

    @property
    def sample_rate(self) -> int:
        return self.vocals.sample_rate


def sum_accompaniment(s: SourceSet) -> Waveform:
    """Samplewise bass + drums + other."""
    total = s.bass.samples + s.drums.samples + s.other.samples
    return Waveform(total, s.sample_rate)


def mixture_of(s: SourceSet) -> Waveform:
    return Waveform(s.vocals.samples + sum_accompaniment(s).samples, s.sample_rate)


def remix(sets: list[SourceSet], gains: dict[str, float] | None = None,
          rng: np.random.Generator | int | None = None) -> tuple[Waveform, SourceSet]:
    """Draw each stem from a random set, scale, and sum into a new mixture.

    The returned targets are the scaled stems, so the mixture equals their
    sum exactly. Gains default to uniform draws from [0.5, 1.25].
    """
    if not sets:
        raise ValueError("need at least one source set")
    lengths = {s.vocals.num_samples for s in sets}
    if len(lengths) != 1:
        raise ValueError("source sets must have aligned clip lengths")
    rng = np.random.default_rng(rng)
    picked = {name: sets[rng.integers(len(sets))].stems()[name] for name in STEM_NAMES}
    if gains is None:
        gains = {name: float(rng.uniform(GAIN_LOW, GAIN_HIGH)) for name in STEM_NAMES}
    scaled = {
        name: Waveform(gains[name] * w.samples, w.sample_rate) for name, w in picked.items()
    }
    targets = SourceSet(**scaled)
    return mixture_of(targets), targets


def apply_mask(mask: np.ndarray, s: ComplexSpectrogram) -> ComplexSpectrogram:
    """Elementwise scaling of the complex bins; phase is untouched."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != s.bins.shape:
        raise ValueError(f"mask shape {mask.shape} does not match spectrogram {s.bins.shape}")
    return ComplexSpectrogram(mask * s.bins, s.config, s.sample_rate)


def ideal_ratio_mask(target: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Oracle mask target / (target + residual), with 0/0 mapped to 0."""
    target = np.asarray(target, dtype=np.float64)
    residual = np.asarray(residual, dtype=np.float64)
    if target.shape != residual.shape:
        raise ValueError(f"shape mismatch: {target.shape} vs {residual.shape}")
    denom = target + residual
    out = np.zeros_like(denom)
    np.divide(target, denom, out=out, where=denom > 0)
    return out


class SeparatorModel:
    """Mask estimator: per-bin batch norm over frames, an LSTM stack, and a
    time-distributed dense+sigmoid head emitting one mask value per bin."""

    def __init__(self, num_bins: int, hidden: int = 64, layers: int = 2, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.num_bins = num_bins
        self.norm = nn.BatchNorm(num_bins)
        self.lstms = [
            nn.Lstm(num_bins if i == 0 else hidden, hidden, rng) for i in range(layers)
        ]
        self.head = nn.Dense(hidden, num_bins, rng)
        self.out = nn.Sigmoid()
        self.log_params = LogMagParams()
        self._layers = [self.norm, *self.lstms, self.head, self.out]

    def forward_mask(self, log_mag: np.ndarray, training: bool = False) -> np.ndarray:
        h = log_mag
        for layer in self._layers:
            h = layer.forward(h, training)
        return h

    def backward(self, grad_mask: np.ndarray) -> None:
        g = grad_mask
        for layer in reversed(self._layers):
            g = layer.backward(g)

    def predict_mask(self, s: ComplexSpectrogram) -> np.ndarray:
        return self.forward_mask(log_magnitude(s.magnitude(), self.log_params))

    def params(self) -> dict[str, np.ndarray]:
        out = {f"norm.{k}": v for k, v in self.norm.params().items()}
        for i, lstm in enumerate(self.lstms):
            out.update({f"lstm{i}.{k}": v for k, v in lstm.params().items()})
        out.update({f"head.{k}": v for k, v in self.head.params().items()})
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {f"norm.{k}": v for k, v in self.norm.grads().items()}
        for i, lstm in enumerate(self.lstms):
            out.update({f"lstm{i}.{k}": v for k, v in lstm.grads().items()})
        out.update({f"head.{k}": v for k, v in self.head.grads().items()})
        return out

    def zero_grads(self) -> None:
        for layer in self._layers:
            layer.zero_grads()

    def state(self) -> dict[str, np.ndarray]:
        out = self.params()
        out["norm.running_mean"] = self.norm.running_mean
        out["norm.running_var"] = self.norm.running_var
        return out

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        nn.restore_params(self.state(), tensors)

    def loss_and_grad(self, example: "TrainingClip") -> float:
        """L1 spectrogram-magnitude loss on both estimated stems."""
        mask = self.forward_mask(example.log_mag, training=True)
        est_vocal = mask * example.mix_mag
        est_accomp = (1.0 - mask) * example.mix_mag
        d_vocal = est_vocal - example.vocal_mag
        d_accomp = est_accomp - example.accomp_mag
        n = d_vocal.size
        loss = float(np.abs(d_vocal).mean() + np.abs(d_accomp).mean())
        grad_mask = (np.sign(d_vocal) - np.sign(d_accomp)) * example.mix_mag / n
        self.backward(grad_mask)
        return loss


@dataclass
class TrainingClip:
    """Precomputed spectrogram features for one remixed clip."""

    log_mag: np.ndarray
    mix_mag: np.ndarray
    vocal_mag: np.ndarray
    accomp_mag: np.ndarray


def make_training_clip(mixture: Waveform, vocals: Waveform, accompaniment: Waveform,
                       cfg: StftConfig, log_params: LogMagParams = LogMagParams()) -> TrainingClip:
    mix_spec = stft(mixture, cfg)
    mix_mag = mix_spec.magnitude()
    return TrainingClip(
        log_mag=log_magnitude(mix_mag, log_params),
        mix_mag=mix_mag,
        vocal_mag=stft(vocals, cfg).magnitude(),
        accomp_mag=stft(accompaniment, cfg).magnitude(),
    )


def analysis_spectrogram(w: Waveform, cfg: StftConfig) -> ComplexSpectrogram:
    """STFT of the signal with one FFT length of zeros on each side.

    Masking makes the spectrogram inconsistent, and the overlap-add
    divisor is tiny at the tapered ends, so inverting a masked edge
    frame amplifies the inconsistency by orders of magnitude.  Padding
    keeps every real sample in the flat interior; callers trim
    [fft_size : fft_size + n] after inversion.  Any mask handed to
    separate() must be built against this grid.
    """
    x = np.pad(w.to_mono().samples[0], (cfg.fft_size, cfg.fft_size))
    return stft(Waveform(x[None, :], w.sample_rate), cfg)


def separate(mixture: Waveform, model: SeparatorModel, stft_cfg: StftConfig,
             mask: np.ndarray | None = None) -> tuple[Waveform, Waveform, np.ndarray]:
    """Mask the mixture spectrogram and invert both sides.

    Returns (vocals, accompaniment, mask); the stems sum back to the
    mixture because the two masks are complementary.  A caller-supplied
    mask overrides the model (oracle or debug paths) and must match the
    analysis_spectrogram grid of the mixture.
    """
    spec = analysis_spectrogram(mixture, stft_cfg)
    if mask is None:
        mask = model.predict_mask(spec)
    n = mixture.num_samples
    lo, hi = stft_cfg.fft_size, stft_cfg.fft_size + n
    vocals = istft(apply_mask(mask, spec)).samples[:, lo:hi]
    accomp = istft(apply_mask(1.0 - mask, spec)).samples[:, lo:hi]
    rate = mixture.sample_rate
    return Waveform(vocals, rate), Waveform(accomp, rate), mask


def train_separator(clips: list[TrainingClip], model: SeparatorModel, epochs: int,
                    lr: float = 1e-3, batch_size: int = 10, seed: int = 0,
                    epoch_callback=None) -> list[float]:
    """Adam over the L1 magnitude loss; returns the per-epoch loss trace."""
    return nn.fit(
        model,
        clips,
        nn.Adam(lr=lr),
        epochs=epochs,
        batch_size=batch_size,
        rng=np.random.default_rng(seed),
        epoch_callback=epoch_callback,
    )
