"""Train both desk-scale models on synthetic audio and report progress.

The separator learns soft masks from remixed stem sets; the transcriber
learns piano-key activations from rendered tone clips. Both runs finish
in well under ten minutes on a laptop CPU.

    python scripts/train_desk_models.py --out-dir /tmp/desk_models
"""

import argparse
import time
from pathlib import Path

import numpy as np

from stemscribe import nn, synth
from stemscribe.dsp import CqtConfig, StftConfig
from stemscribe.nn.loss import FocalLossParams
from stemscribe.pianoroll import FrameTiming, rasterize_notes
from stemscribe.separation import (SeparatorModel, make_training_clip, remix,
                                   sum_accompaniment, train_separator)
from stemscribe.transcription import (AmtConfig, AmtModel, build_training_pair,
                                      frame_metrics, train_amt, transcribe_waveform)


def run_separator(out: Path, epochs: int, seed: int):
    cfg = StftConfig()
    sets = synth.make_source_sets(4, 1.5, 8000, seed=seed)
    rng = np.random.default_rng(seed)
    clips = []
    for _ in range(6):
        mixture, targets = remix(sets, rng=rng)
        clips.append(make_training_clip(
            mixture, targets.vocals, sum_accompaniment(targets), cfg))
    model = SeparatorModel(num_bins=cfg.num_bins, hidden=32, layers=2, seed=seed)
    t0 = time.time()
    trace = train_separator(clips, model, epochs=epochs, lr=1e-3,
                            batch_size=10, seed=seed)
    nn.save_checkpoint(out / "separator.ssnn", model.state())
    print(f"separator: loss {trace[0]:.4f} -> {trace[-1]:.4f} "
          f"({epochs} epochs, {time.time() - t0:.1f} s)")


def run_amt(out: Path, epochs: int, seed: int):
    cqt_cfg = CqtConfig()
    train_clips = synth.make_tone_clips(12, 3.0, cqt_cfg.sample_rate, seed=seed)
    test_clips = synth.make_tone_clips(4, 3.0, cqt_cfg.sample_rate, seed=seed + 100)
    pairs = [build_training_pair(audio, notes, cqt_cfg, duration=3.0,
                                 window=128, hop_frames=64)
             for audio, notes in train_clips]
    model = AmtModel(AmtConfig(conv_channels=4, hidden=16), seed=seed)
    t0 = time.time()
    trace = train_amt(pairs, model, epochs=epochs, loss=FocalLossParams(),
                      lr=5e-3, batch_size=4, seed=seed)
    nn.save_checkpoint(out / "amt.ssnn", model.state())
    print(f"amt: loss {trace[0]:.6f} -> {trace[-1]:.6f} "
          f"({epochs} epochs, {time.time() - t0:.1f} s)")

    timing = FrameTiming(cqt_cfg.hop, cqt_cfg.sample_rate)
    scores = []
    for audio, notes in test_clips:
        pred = transcribe_waveform(audio, model, cqt_cfg, window=128, hop_frames=64)
        truth = rasterize_notes(notes, timing, pred.num_frames)
        scores.append(frame_metrics(pred, truth).f1)
    print("held-out frame F1:", " ".join(f"{s:.4f}" for s in scores))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="desk_models")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sep-epochs", type=int, default=50)
    ap.add_argument("--amt-epochs", type=int, default=100)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_separator(out, args.sep_epochs, args.seed)
    run_amt(out, args.amt_epochs, args.seed)


if __name__ == "__main__":
    main()
