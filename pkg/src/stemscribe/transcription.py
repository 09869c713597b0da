"""Piano transcription: feature windowing, the conv/BiLSTM note model,
focal-loss training, probability stitching, and frame/onset scoring.

The feature pipeline is log-scaled constant-Q magnitudes at 22050 Hz with
a 512-sample hop, cut into 512-frame windows that overlap by half. The
model emits 88 per-frame key probabilities; overlapping window outputs are
averaged and binarized strictly above 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .audio_io import Waveform, resample
from .dsp import CqtConfig, LogMagParams, cqt, log_magnitude
from .nn.loss import FocalLossParams, focal_loss
from .pianoroll import N_KEYS, FrameTiming, PianoRoll, active_runs, rasterize_notes

SEGMENT_WINDOW = 512
SEGMENT_HOP = 256
DEFAULT_CLIP_SECONDS = 180.0


@dataclass
class SegmentedFeatures:
    """Overlapping fixed-width windows cut from one feature grid."""

    segments: list[np.ndarray]
    hop_frames: int
    source_length: int

    def __post_init__(self):
        if not self.segments:
            raise ValueError("need at least one segment")
        widths = {s.shape for s in self.segments}
        if len(widths) != 1:
            raise ValueError(f"segments disagree on shape: {sorted(widths)}")
        if self.hop_frames <= 0 or self.source_length <= 0:
            raise ValueError("hop_frames and source_length must be positive")

    @property
    def window(self) -> int:
        return self.segments[0].shape[1]


def segment(features: np.ndarray, window: int = SEGMENT_WINDOW,
            hop: int = SEGMENT_HOP) -> SegmentedFeatures:
    """Cut a (bins, N) grid into overlapping (bins, window) slices.

    Inputs shorter than one window are zero-padded up to it; the count is
    then (N_padded - window) // hop + 1, so a trailing partial window is
    not emitted. Stitching zero-fills whatever the last window misses.
    """
    if features.ndim != 2 or features.shape[1] < 1:
        raise ValueError(f"expected a (bins, N >= 1) grid, got {features.shape}")
    n = features.shape[1]
    if n < window:
        features = np.pad(features, ((0, 0), (0, window - n)))
    count = (features.shape[1] - window) // hop + 1
    segs = [features[:, i * hop : i * hop + window].copy() for i in range(count)]
    return SegmentedFeatures(segs, hop, n)


@dataclass(frozen=True)
class AmtConfig:
    n_bins: int = 84
    conv_channels: int = 16
    kernel: tuple[int, int] = (3, 3)
    pool_freq: int = 2
    hidden: int = 64
    n_keys: int = N_KEYS
    threshold: float = 0.5

    def __post_init__(self):
        if self.n_bins % self.pool_freq:
            raise ValueError(f"pool_freq {self.pool_freq} must divide n_bins {self.n_bins}")
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError(f"threshold {self.threshold} out of range")

    @property
    def seq_features(self) -> int:
        """Feature width per frame after pooling and the time-major reshape."""
        return self.conv_channels * (self.n_bins // self.pool_freq)


@dataclass
class AmtExample:
    """One training window: (bins, W) features, (W, keys) binary targets."""

    features: np.ndarray
    targets: np.ndarray


class AmtModel:
    """Frame-wise key-activation estimator over one feature window.

    Per-bin batch norm, a 3x3 conv bank, frequency-only max pooling, a
    time-major reshape, a BiLSTM, then a shared dense+sigmoid head giving
    88 probabilities per frame.
    """

    def __init__(self, cfg: AmtConfig = AmtConfig(), seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.norm = nn.BatchNorm(cfg.n_bins)
        self.conv = nn.Conv2d(1, cfg.conv_channels, cfg.kernel, rng)
        self.pool = nn.MaxPool2d((cfg.pool_freq, 1))
        self.blstm = nn.BiLstm(cfg.seq_features, cfg.hidden, rng)
        self.head = nn.Dense(2 * cfg.hidden, cfg.n_keys, rng)
        self.out = nn.Sigmoid()
        self.loss_params = FocalLossParams()
        self._pooled_shape = None

    def forward(self, seg: np.ndarray, training: bool = False) -> np.ndarray:
        if seg.ndim != 2 or seg.shape[0] != self.cfg.n_bins:
            raise ValueError(f"expected ({self.cfg.n_bins}, W) features, got {seg.shape}")
        x = self.norm.forward(seg.T, training).T  # stats per bin, over frames
        pooled = self.pool.forward(self.conv.forward(x[None], training), training)
        self._pooled_shape = pooled.shape
        c, b, w = pooled.shape
        seq = pooled.transpose(2, 0, 1).reshape(w, c * b)
        h = self.blstm.forward(seq, training)
        return self.out.forward(self.head.forward(h, training), training)

    def backward(self, grad: np.ndarray) -> None:
        g = self.blstm.backward(self.head.backward(self.out.backward(grad)))
        c, b, w = self._pooled_shape
        g = self.conv.backward(self.pool.backward(g.reshape(w, c, b).transpose(1, 2, 0)))
        self.norm.backward(g[0].T)  # input gradient ends here

    def predict(self, seg: np.ndarray) -> np.ndarray:
        return self.forward(seg, training=False)

    def loss_and_grad(self, example: AmtExample) -> float:
        probs = self.forward(example.features, training=True)
        loss, grad = focal_loss(probs, example.targets, self.loss_params)
        self.backward(grad)
        return loss

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in (("norm", self.norm), ("conv", self.conv),
                            ("blstm", self.blstm), ("head", self.head)):
            out.update({f"{name}.{k}": v for k, v in layer.params().items()})
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out = {}
        for name, layer in (("norm", self.norm), ("conv", self.conv),
                            ("blstm", self.blstm), ("head", self.head)):
            out.update({f"{name}.{k}": v for k, v in layer.grads().items()})
        return out

    def zero_grads(self) -> None:
        for layer in (self.norm, self.conv, self.blstm, self.head):
            layer.zero_grads()

    def state(self) -> dict[str, np.ndarray]:
        out = self.params()
        out["norm.running_mean"] = self.norm.running_mean
        out["norm.running_var"] = self.norm.running_var
        return out

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        nn.restore_params(self.state(), tensors)


def stitch_and_threshold(outputs: list[np.ndarray], hop_frames: int, source_length: int,
                         threshold: float = 0.5,
                         timing: FrameTiming = FrameTiming()) -> PianoRoll:
    """Average overlapping window outputs, binarize strictly above the
    threshold, and trim (or zero-fill) to the source frame count."""
    if not outputs:
        raise ValueError("nothing to stitch")
    window, n_keys = outputs[0].shape
    total = max(source_length, (len(outputs) - 1) * hop_frames + window)
    accum = np.zeros((total, n_keys))
    count = np.zeros(total)
    for i, probs in enumerate(outputs):
        if probs.shape != (window, n_keys):
            raise ValueError(f"window {i} has shape {probs.shape}, expected {(window, n_keys)}")
        start = i * hop_frames
        accum[start : start + window] += probs
        count[start : start + window] += 1.0
    covered = count > 0
    accum[covered] /= count[covered, None]
    grid = (accum.T > threshold).astype(np.uint8)
    return PianoRoll(grid[:, :source_length], timing.time_per_frame)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    undefined: frozenset = frozenset()
    """Names of scores whose denominator was empty (reported as 0)."""


def f1_from(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _scores_from_counts(tp: int, fp: int, fn: int) -> Scores:
    undefined = set()
    precision = recall = 0.0
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        undefined.add("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        undefined.add("recall")
    if precision + recall == 0.0:
        undefined.add("f1")
    return Scores(precision, recall, f1_from(precision, recall), frozenset(undefined))


def frame_metrics(pred: PianoRoll, truth: PianoRoll) -> Scores:
    """Cell-wise precision/recall/F1 restricted to frames where either
    roll has any active key; all-silent frames do not inflate the scores."""
    if pred.grid.shape != truth.grid.shape:
        raise ValueError(f"shape mismatch: {pred.grid.shape} vs {truth.grid.shape}")
    active = (pred.grid.any(axis=0)) | (truth.grid.any(axis=0))
    p = pred.grid[:, active].astype(bool)
    t = truth.grid[:, active].astype(bool)
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    return _scores_from_counts(tp, fp, fn)


def _onset_times(roll: PianoRoll) -> list[list[float]]:
    """Per pitch row, the start times of each contiguous active run."""
    dt = roll.frame_time
    return [[a * dt for a, _ in active_runs(row)] for row in roll.grid]


def onset_metrics(pred: PianoRoll, truth: PianoRoll, tolerance: float = 0.05) -> Scores:
    """Onset precision/recall/F1 with greedy earliest-first matching of
    same-pitch onsets within the tolerance (seconds, inclusive)."""
    if pred.grid.shape[0] != truth.grid.shape[0]:
        raise ValueError(f"shape mismatch: {pred.grid.shape} vs {truth.grid.shape}")
    if abs(pred.frame_time - truth.frame_time) > 1e-12:
        raise ValueError("rolls disagree on frame timing")
    tp = fp = fn = 0
    for pred_onsets, truth_onsets in zip(_onset_times(pred), _onset_times(truth)):
        j = 0
        matched = 0
        for t in truth_onsets:
            while j < len(pred_onsets) and pred_onsets[j] < t - tolerance:
                j += 1  # too early for this and every later reference
            if j < len(pred_onsets) and pred_onsets[j] <= t + tolerance:
                matched += 1
                j += 1
        tp += matched
        fp += len(pred_onsets) - matched
        fn += len(truth_onsets) - matched
    return _scores_from_counts(tp, fp, fn)


def build_training_pair(audio: Waveform, notes, cqt_cfg: CqtConfig = CqtConfig(),
                        log_params: LogMagParams = LogMagParams(),
                        duration: float = DEFAULT_CLIP_SECONDS,
                        window: int = SEGMENT_WINDOW,
                        hop_frames: int = SEGMENT_HOP) -> tuple[SegmentedFeatures, PianoRoll]:
    """Aligned (features, target roll) for one clip.

    Audio is resampled if needed, then padded or truncated to the fixed
    duration before the transform, so every pair lands on the same frame
    grid; notes are rasterized onto that grid.
    """
    if audio.sample_rate != cqt_cfg.sample_rate:
        audio = resample(audio, cqt_cfg.sample_rate)
    x = audio.mono_samples()
    n_target = int(round(duration * cqt_cfg.sample_rate))
    if x.size < n_target:
        x = np.pad(x, (0, n_target - x.size))
    else:
        x = x[:n_target]
    feats = log_magnitude(cqt(Waveform(x[None, :], cqt_cfg.sample_rate), cqt_cfg), log_params)
    timing = FrameTiming(cqt_cfg.hop, cqt_cfg.sample_rate)
    roll = rasterize_notes(notes, timing, feats.shape[1])
    return segment(feats, window, hop_frames), roll


def examples_from_pair(segmented: SegmentedFeatures, roll: PianoRoll) -> list[AmtExample]:
    """Align one target window to each feature window (tail zero-padded)."""
    window = segmented.window
    examples = []
    for i, seg in enumerate(segmented.segments):
        start = i * segmented.hop_frames
        target = roll.grid[:, start : start + window]
        if target.shape[1] < window:
            target = np.pad(target, ((0, 0), (0, window - target.shape[1])))
        examples.append(AmtExample(seg, target.T.astype(np.float64)))
    return examples


def train_amt(pairs, model: AmtModel, epochs: int,
              loss: FocalLossParams = FocalLossParams(), lr: float = 1e-3,
              batch_size: int = 10, seed: int = 0, epoch_callback=None) -> list[float]:
    """Adam over focal loss on all windows of all pairs; per-epoch trace."""
    model.loss_params = loss
    examples = [ex for segmented, roll in pairs for ex in examples_from_pair(segmented, roll)]
    return nn.fit(
        model,
        examples,
        nn.Adam(lr=lr),
        epochs=epochs,
        batch_size=batch_size,
        rng=np.random.default_rng(seed),
        epoch_callback=epoch_callback,
    )


def transcribe_waveform(audio: Waveform, model: AmtModel,
                        cqt_cfg: CqtConfig = CqtConfig(),
                        log_params: LogMagParams = LogMagParams(),
                        window: int = SEGMENT_WINDOW,
                        hop_frames: int = SEGMENT_HOP) -> PianoRoll:
    """Audio in, binary piano roll out; the full untrimmed clip is used."""
    if audio.sample_rate != cqt_cfg.sample_rate:
        audio = resample(audio, cqt_cfg.sample_rate)
    feats = log_magnitude(cqt(audio.to_mono(), cqt_cfg), log_params)
    segmented = segment(feats, window, hop_frames)
    outputs = [model.predict(seg) for seg in segmented.segments]
    timing = FrameTiming(cqt_cfg.hop, cqt_cfg.sample_rate)
    return stitch_and_threshold(outputs, segmented.hop_frames, segmented.source_length,
                                model.cfg.threshold, timing)
