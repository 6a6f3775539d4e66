"""Walkthrough: Doppler-time segments and the LSTM detector, desk scale.

Generates a small balanced corpus of UAV and distractor captures, preprocesses
each into one aligned 3.6 s Doppler-time segment (DC removal, feature
alignment, folding filter), trains the two-layer LSTM briefly and reports the
held-out confusion metrics. A small run finishes in about two minutes; the
full acceptance experiment uses 200 + 200 segments.

Run: python demos/04_identification.py
"""

import numpy as np

from rotorsense import RadarConfig, derive, process_frames, synthesize_frames
from rotorsense.echo import frame_mid_times
from rotorsense.folding import build_folding_map
from rotorsense.identify import (LABELS, calibrate_threshold, classify, dc_removal,
                                 diagram_at_bins, feature_alignment,
                                 noise_window_max_folds, normalize_segment,
                                 segment_split_filter, segment_window_frames)
from rotorsense.lstm import LstmDetector, lstm_train
from rotorsense.rdmap import beat_range_bin
from rotorsense import scenarios

radar = RadarConfig().validate()
derived = derive(radar, v_max_m_per_s=4.0)
window = segment_window_frames(derived)
times = frame_mid_times(radar, window)
rng = np.random.default_rng(2024)

print(f"segment window: {window} frames = {window * derived.frame_duration_s:.1f} s")

print("calibrating the folding threshold from a noise-only capture ...")
bg = scenarios.background_scene(seed=1)
bg_fmap = build_folding_map(process_frames(synthesize_frames(bg, radar, window)))
threshold = calibrate_threshold(noise_window_max_folds(bg_fmap, window))
print(f"threshold (noise mean + 5 sigma): {threshold:.2f}")


def one_segment(scene, bins, label):
    maps = process_frames(synthesize_frames(scene, radar, window))
    diagram = feature_alignment(dc_removal(diagram_at_bins(maps, bins, times)))
    seg = segment_split_filter(diagram, window, threshold)[0]
    seg.label = label
    return seg


print("synthesizing 18 UAV + 18 distractor captures ...")
segments = []
for i in range(18):
    scene = scenarios.sample_uav_scene(rng)
    traj = scene.emitters[0].trajectory
    bins = [beat_range_bin(radar, float(r)) for r in traj.range_at(times)]
    segments.append(one_segment(scene, bins, "uav"))

    scene = scenarios.sample_distractor_scene(rng)
    rng_m = scene.emitters[0].params["range_m"]
    segments.append(one_segment(scene, [beat_range_bin(radar, rng_m)] * window, "other"))

passed = sum(s.passed_filter for s in segments)
print(f"{passed}/{len(segments)} segments pass the folding filter "
      "(strong blobs legitimately pass; the detector must reject them)")

order = rng.permutation(len(segments))
split = int(0.7 * len(segments))
train_idx, test_idx = order[:split], order[split:]
x = np.stack([normalize_segment(segments[i].values) for i in range(len(segments))])
y = np.array([LABELS.index(segments[i].label) for i in range(len(segments))])

print("training the detector (two stacked recurrent layers, hidden 128) ...")
detector = LstmDetector(input_dim=x.shape[2], seed=0)
_, history = lstm_train(detector, x[train_idx], y[train_idx], epochs=40,
                        batch_size=10, learning_rate=5e-5, rng_seed=0)
print(f"train loss: {history[0]['train_loss']:.3f} -> {history[-1]['train_loss']:.3f}")

labels, metrics = classify(detector, [segments[i] for i in test_idx])
print("\nheld-out metrics:")
for key in ("accuracy", "precision", "recall", "f1"):
    print(f"  {key:9s}: {metrics[key]:.3f}")
print("(a desk-scale taste; the acceptance suite runs 200+200 segments)")
