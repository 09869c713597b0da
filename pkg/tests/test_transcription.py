import numpy as np
import pytest

from stemscribe.audio_io import Waveform
from stemscribe.dsp import CqtConfig, num_cqt_frames
from stemscribe.nn import grad_check
from stemscribe.nn.loss import FocalLossParams
from stemscribe.pianoroll import FrameTiming, N_KEYS, NoteEvent, PianoRoll, empty_roll
from stemscribe.transcription import (AmtConfig, AmtExample, AmtModel,
                                      SegmentedFeatures, build_training_pair,
                                      examples_from_pair, f1_from,
                                      frame_metrics, onset_metrics, segment,
                                      stitch_and_threshold, train_amt,
                                      transcribe_waveform)

TIMING = FrameTiming(512, 22050)


# --------------------------------------------------------------- segment

@pytest.mark.parametrize("n, expected", [(512, 1), (1024, 3), (7752, 29)])
def test_segment_counts(n, expected):
    segs = segment(np.zeros((4, n)), window=512, hop=256)
    assert len(segs.segments) == expected
    assert segs.source_length == n


def test_segment_count_formula_property(rng):
    for _ in range(30):
        n = int(rng.integers(1, 3000))
        segs = segment(np.zeros((2, n)), window=512, hop=256)
        assert len(segs.segments) == (max(n, 512) - 512) // 256 + 1


def test_segment_short_input_zero_padded():
    feats = np.ones((3, 100))
    segs = segment(feats, window=512, hop=256)
    assert len(segs.segments) == 1
    assert segs.source_length == 100
    np.testing.assert_array_equal(segs.segments[0][:, :100], feats)
    assert not segs.segments[0][:, 100:].any()


def test_segment_slices_match_source(rng):
    feats = rng.standard_normal((5, 50))
    segs = segment(feats, window=16, hop=8)
    for i, s in enumerate(segs.segments):
        np.testing.assert_array_equal(s, feats[:, i * 8 : i * 8 + 16])


def test_segment_rejects_bad_input():
    with pytest.raises(ValueError):
        segment(np.zeros((4, 0)))
    with pytest.raises(ValueError):
        segment(np.zeros(16))
    with pytest.raises(ValueError):
        SegmentedFeatures([], 8, 10)
    with pytest.raises(ValueError):
        SegmentedFeatures([np.zeros((2, 4)), np.zeros((2, 5))], 8, 10)


# ---------------------------------------------------------------- stitch

def test_stitch_uniform_high_probability_is_all_ones():
    outputs = [np.full((8, N_KEYS), 0.9) for _ in range(3)]
    roll = stitch_and_threshold(outputs, 4, 16, threshold=0.5, timing=TIMING)
    assert roll.grid.all()
    assert roll.num_frames == 16


def test_stitch_threshold_is_strict():
    outputs = [np.full((4, N_KEYS), 0.5)]
    roll = stitch_and_threshold(outputs, 4, 4, threshold=0.5, timing=TIMING)
    assert not roll.grid.any()


def test_stitch_averages_overlap():
    a = np.full((4, N_KEYS), 0.4)
    b = np.full((4, N_KEYS), 0.8)
    roll = stitch_and_threshold([a, b], 2, 6, threshold=0.5, timing=TIMING)
    # frames 0-1 see only 0.4; 2-3 average to 0.6; 4-5 see only 0.8
    np.testing.assert_array_equal(roll.grid[0], [0, 0, 1, 1, 1, 1])


def test_stitch_trims_and_zero_fills():
    outputs = [np.full((8, N_KEYS), 0.9)]
    roll = stitch_and_threshold(outputs, 4, 5, timing=TIMING)
    assert roll.num_frames == 5  # trimmed below the window width
    roll = stitch_and_threshold(outputs, 4, 12, timing=TIMING)
    assert roll.num_frames == 12
    assert roll.grid[:, :8].all() and not roll.grid[:, 8:].any()


def test_stitch_rejects_mismatched_windows():
    with pytest.raises(ValueError):
        stitch_and_threshold([np.zeros((4, N_KEYS)), np.zeros((5, N_KEYS))], 2, 8)
    with pytest.raises(ValueError):
        stitch_and_threshold([], 2, 8)


# ----------------------------------------------------------------- model

TINY = AmtConfig(n_bins=6, conv_channels=2, pool_freq=2, hidden=3, n_keys=5)


def test_model_outputs_probabilities():
    model = AmtModel(TINY, seed=0)
    probs = model.predict(np.random.default_rng(1).standard_normal((6, 9)))
    assert probs.shape == (9, 5)
    assert ((probs > 0.0) & (probs < 1.0)).all()


def test_model_rejects_wrong_bin_count():
    with pytest.raises(ValueError):
        AmtModel(TINY).predict(np.zeros((7, 9)))


def test_config_validation():
    with pytest.raises(ValueError):
        AmtConfig(n_bins=5, pool_freq=2)
    with pytest.raises(ValueError):
        AmtConfig(threshold=1.0)
    assert TINY.seq_features == 2 * 3


def test_model_gradient_matches_finite_differences(rng):
    model = AmtModel(TINY, seed=1)
    features = np.random.default_rng(2).standard_normal((6, 7))
    targets = (np.random.default_rng(3).random((7, 5)) > 0.6).astype(float)
    rel = grad_check(model, AmtExample(features, targets))
    assert rel < 1e-4


def test_model_state_round_trip(tmp_path):
    from stemscribe.nn import load_checkpoint, save_checkpoint
    model = AmtModel(TINY, seed=4)
    x = np.random.default_rng(5).standard_normal((6, 8))
    before = model.predict(x)
    path = tmp_path / "amt.ckpt"
    save_checkpoint(path, model.state())
    other = AmtModel(TINY, seed=99)
    other.load_state(load_checkpoint(path))
    np.testing.assert_allclose(other.predict(x), before, atol=1e-6)


# ---------------------------------------------------------------- scores

def test_f1_reference_points():
    assert f1_from(0.7632, 0.5408) == pytest.approx(0.6330, abs=1e-4)
    assert f1_from(0.6824, 0.4583) == pytest.approx(0.5484, abs=1e-4)
    assert f1_from(0.0, 0.0) == 0.0
    assert f1_from(1.0, 1.0) == 1.0


def roll_with(pitch_frames, frames=30):
    roll = empty_roll(frames, TIMING)
    for pitch, span in pitch_frames:
        roll.grid[pitch - 21, span] = 1
    return roll


def test_frame_metrics_perfect_prediction():
    truth = roll_with([(60, slice(2, 9)), (64, slice(4, 6))])
    s = frame_metrics(truth, truth)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)
    assert not s.undefined


def test_frame_metrics_hand_counts():
    truth = roll_with([(60, slice(0, 2))])          # pitch 60 at frames 0,1
    pred = roll_with([(60, slice(0, 1)), (62, slice(1, 2))])
    s = frame_metrics(pred, truth)
    # tp=1 (60@0), fp=1 (62@1), fn=1 (60@1)
    assert s.precision == pytest.approx(0.5)
    assert s.recall == pytest.approx(0.5)
    assert s.f1 == pytest.approx(0.5)


def test_frame_metrics_silent_frames_do_not_dilute():
    truth_small = roll_with([(60, slice(0, 2))], frames=4)
    pred_small = roll_with([(60, slice(0, 1))], frames=4)
    truth_big = roll_with([(60, slice(0, 2))], frames=400)
    pred_big = roll_with([(60, slice(0, 1))], frames=400)
    assert frame_metrics(pred_small, truth_small) == frame_metrics(pred_big, truth_big)


def test_frame_metrics_empty_prediction_flags_precision():
    truth = roll_with([(60, slice(0, 5))])
    s = frame_metrics(empty_roll(30, TIMING), truth)
    assert s.recall == 0.0 and s.precision == 0.0 and s.f1 == 0.0
    assert "precision" in s.undefined and "f1" in s.undefined


def test_frame_metrics_swap_exchanges_precision_and_recall():
    a = roll_with([(60, slice(0, 7)), (65, slice(3, 9))])
    b = roll_with([(60, slice(2, 7)), (70, slice(1, 4))])
    assert frame_metrics(a, b).precision == pytest.approx(frame_metrics(b, a).recall)


def test_frame_metrics_shape_mismatch():
    with pytest.raises(ValueError):
        frame_metrics(empty_roll(10, TIMING), empty_roll(11, TIMING))


def test_onset_metrics_identical_rolls():
    roll = roll_with([(60, slice(5, 12)), (72, slice(2, 4))])
    s = onset_metrics(roll, roll, tolerance=0.0)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


def test_onset_metrics_one_frame_shift_within_tolerance():
    truth = roll_with([(60, slice(10, 16))])
    pred = roll_with([(60, slice(11, 17))])
    s = onset_metrics(pred, truth, tolerance=0.05)  # shift ~23 ms
    assert s.f1 == 1.0


def test_onset_metrics_three_frame_shift_unmatched():
    truth = roll_with([(60, slice(10, 16))])
    pred = roll_with([(60, slice(13, 19))])
    s = onset_metrics(pred, truth, tolerance=0.05)  # shift ~70 ms
    assert s.f1 == 0.0 and s.precision == 0.0 and s.recall == 0.0


def test_onset_metrics_greedy_matches_each_onset_once():
    truth = roll_with([(60, slice(10, 12)), (60, slice(13, 15))])
    pred = roll_with([(60, slice(10, 12))])  # one prediction, two references
    s = onset_metrics(pred, truth, tolerance=0.2)
    assert s.precision == 1.0
    assert s.recall == pytest.approx(0.5)


def test_onset_metrics_rejects_timing_mismatch():
    a = empty_roll(10, FrameTiming(512, 22050))
    b = empty_roll(10, FrameTiming(256, 22050))
    with pytest.raises(ValueError):
        onset_metrics(a, b)


# -------------------------------------------------------------- pipeline

CQT_SMALL = CqtConfig()


def test_build_training_pair_silence_gives_zero_roll():
    audio = Waveform(np.zeros((1, 22050)), 22050)
    segs, roll = build_training_pair(audio, [], duration=1.0, window=16, hop_frames=8)
    n_frames = num_cqt_frames(22050, CQT_SMALL)
    assert segs.source_length == n_frames
    assert roll.num_frames == n_frames
    assert not roll.grid.any()


def test_build_training_pair_rasterizes_notes_onto_frames():
    audio = Waveform(np.zeros((1, 22050)), 22050)
    note = NoteEvent(60, 0.2, 0.5)
    _, roll = build_training_pair(audio, [note], duration=1.0, window=16, hop_frames=8)
    dt = 512 / 22050
    first = int(np.floor(0.2 / dt + 0.5))
    last = int(np.floor(0.5 / dt + 0.5))
    np.testing.assert_array_equal(np.flatnonzero(roll.grid[39]),
                                  np.arange(first, last + 1))


def test_build_training_pair_pads_short_audio_to_duration():
    audio = Waveform(np.zeros((1, 4000)), 22050)
    segs, roll = build_training_pair(audio, [], duration=1.0, window=16, hop_frames=8)
    assert segs.source_length == num_cqt_frames(22050, CQT_SMALL)


def test_examples_align_targets_to_windows(rng):
    feats = rng.standard_normal((6, 20))
    segs = segment(feats, window=8, hop=4)
    roll = empty_roll(20, TIMING)
    roll.grid[39, 18:20] = 1
    examples = examples_from_pair(segs, roll)
    assert len(examples) == len(segs.segments)
    for ex in examples:
        assert ex.targets.shape == (8, N_KEYS)
    # last window starts at frame 12 and sees the active tail at 18..19
    assert examples[-1].targets[6:8, 39].all()
    assert not examples[-1].targets[:6, 39].any()


def test_examples_zero_pad_roll_tail(rng):
    # a sub-window clip pads features to one window; targets must follow
    feats = rng.standard_normal((6, 10))
    segs = segment(feats, window=16, hop=8)
    roll = empty_roll(10, TIMING)
    roll.grid[39, :] = 1
    (example,) = examples_from_pair(segs, roll)
    assert example.targets.shape == (16, N_KEYS)
    assert example.targets[:10, 39].all()
    assert not example.targets[10:, 39].any()


def test_transcribe_waveform_matches_source_frame_count(rng):
    audio = Waveform(rng.standard_normal((1, 6615)) * 0.1, 22050)
    cfg = AmtConfig(n_bins=84, conv_channels=2, pool_freq=2, hidden=4)
    model = AmtModel(cfg, seed=0)
    roll = transcribe_waveform(audio, model, window=8, hop_frames=4)
    assert roll.num_frames == num_cqt_frames(6615, CQT_SMALL)
    assert roll.frame_time == pytest.approx(512 / 22050)


def test_train_amt_loss_decreases(rng):
    cfg = AmtConfig(n_bins=6, conv_channels=2, pool_freq=2, hidden=4)
    model = AmtModel(cfg, seed=0)
    feats = rng.standard_normal((6, 12))
    segs = segment(feats, window=6, hop=3)
    roll = empty_roll(12, TIMING)
    roll.grid[39, 2:9] = 1
    trace = train_amt([(segs, roll)], model, epochs=5,
                      loss=FocalLossParams(alpha=0.35, gamma=2.0), lr=5e-3)
    assert len(trace) == 5
    assert all(np.isfinite(trace))
    assert trace[-1] < trace[0]
