"""Doppler-time diagrams, their preprocessing, segmentation and classification.

The tracked range bin's Doppler rows stacked over time form a Doppler-time
diagram. Before classification the diagram is normalized in two steps:

DC removal     -- frames whose global peak sits away from the zero-Doppler bin
                  carry no body return at DC, so their DC bins estimate the DC
                  noise floor; that average is subtracted from every frame's
                  DC bin (clamped at zero). If no frame qualifies (hover: the
                  body peak is at DC everywhere) nothing is subtracted and a
                  flag is set.
feature align  -- each column is shifted so its body-velocity peak (global
                  argmax, ties resolved toward DC) lands exactly on the DC
                  bin, stripping the body-velocity dependence; vacated bins
                  are filled with a linear taper from the surviving edge
                  value down to zero. Peak-to-peak comb spacings survive the
                  shift unchanged.

The diagram is then cut into fixed-length windows (3.6 s worth of frames) and
windows whose maximum per-column folding result stays below a threshold are
flagged as featureless. The threshold default (30000) matches raw captures of
the reference hardware scaling; for synthetic data calibrate it from
noise-only folding results (mean + 5 sigma).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .config import DerivedParams
from .folding import FoldingMap, folding_result
from .lstm import LstmDetector
from .rdmap import dc_bin, doppler_row
from .tracking import Track

LABELS = ("other", "uav")  # class index order; "uav" is the positive class

SEGMENT_SECONDS = 3.6
DEFAULT_THRESHOLD = 30000.0
SEGMENT_MAGIC = b"RSSEG1\n"
SEGMENT_SCHEMA_VERSION = 1


class IdentifyError(ValueError):
    """Identification precondition violated."""


@dataclass(frozen=True)
class DopplerTimeDiagram:
    """Doppler rows along a track, shape [frames, doppler bins]."""

    columns: np.ndarray
    frame_times: np.ndarray
    range_bins: np.ndarray
    flags: dict = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return self.columns.shape[0]

    @property
    def n_doppler_bins(self) -> int:
        return self.columns.shape[1]


@dataclass
class Segment:
    """Fixed-length window of a Doppler-time diagram."""

    values: np.ndarray  # [window frames, doppler bins]
    label: str = "unlabeled"
    max_folding_result: float = 0.0
    passed_filter: bool = True
    provenance: dict = field(default_factory=dict)


def segment_window_frames(derived: DerivedParams, seconds: float = SEGMENT_SECONDS) -> int:
    return int(round(seconds / derived.frame_duration_s))


def extract_doppler_time(maps, track: Track) -> DopplerTimeDiagram:
    """Column t is the Doppler row of map t at the tracked bin."""
    maps = list(maps)
    bins = np.asarray(track.range_bins)
    if len(maps) != bins.shape[0]:
        raise IdentifyError(
            f"track length {bins.shape[0]} does not match {len(maps)} maps")
    for t, rd in enumerate(maps):
        if rd.frame_index != t:
            raise IdentifyError(
                f"maps are not a contiguous capture: position {t} holds frame {rd.frame_index}")
    cols = np.stack([doppler_row(rd, int(bins[t])) for t, rd in enumerate(maps)])
    return DopplerTimeDiagram(columns=cols.astype(float),
                              frame_times=np.asarray(track.frame_times, dtype=float),
                              range_bins=bins.copy())


def diagram_at_bins(maps, range_bins, frame_times=None) -> DopplerTimeDiagram:
    """Diagram extraction at externally supplied bins (e.g. simulation truth)."""
    maps = list(maps)
    bins = np.asarray(range_bins, dtype=int)
    if len(maps) != bins.shape[0]:
        raise IdentifyError(f"{bins.shape[0]} bins for {len(maps)} maps")
    cols = np.stack([doppler_row(rd, int(bins[t])) for t, rd in enumerate(maps)])
    if frame_times is None:
        frame_times = np.array([float(m.frame_index) for m in maps])
    return DopplerTimeDiagram(columns=cols.astype(float),
                              frame_times=np.asarray(frame_times, dtype=float),
                              range_bins=bins.copy())


def dc_removal(diagram: DopplerTimeDiagram, epsilon_bins: int = 2) -> DopplerTimeDiagram:
    """Subtract the qualifying-frame mean from every DC bin, clamped at zero.

    A frame qualifies when its global argmax lies more than epsilon_bins away
    from the DC bin, i.e. the body-velocity peak is not parked on DC.
    """
    if diagram.n_frames == 0:
        raise IdentifyError("empty Doppler-time diagram")
    cols = diagram.columns.copy()
    dc = dc_bin(diagram.n_doppler_bins)
    peak_bins = np.argmax(cols, axis=1)
    qualifying = np.abs(peak_bins - dc) > epsilon_bins
    flags = dict(diagram.flags)
    if not np.any(qualifying):
        flags["dc_removal_skipped"] = True
        return replace(diagram, columns=cols, flags=flags)
    avg = float(cols[qualifying, dc].mean())
    cols[:, dc] = np.maximum(cols[:, dc] - avg, 0.0)
    flags["dc_removal_subtracted"] = avg
    return replace(diagram, columns=cols, flags=flags)


def _peak_bin_toward_dc(col: np.ndarray, dc: int) -> int:
    peaks = np.flatnonzero(col == col.max())
    if peaks.shape[0] == 1:
        return int(peaks[0])
    order = np.lexsort((peaks, np.abs(peaks - dc)))
    return int(peaks[order[0]])


def feature_alignment(diagram: DopplerTimeDiagram) -> DopplerTimeDiagram:
    """Shift every column so the body-velocity peak sits on the DC bin."""
    cols = diagram.columns.copy()
    n_bins = diagram.n_doppler_bins
    dc = dc_bin(n_bins)
    for t in range(cols.shape[0]):
        col = cols[t]
        shift = dc - _peak_bin_toward_dc(col, dc)
        if shift == 0:
            continue
        out = np.empty_like(col)
        if shift > 0:
            out[shift:] = col[:n_bins - shift]
            edge = col[0]
            out[:shift] = edge * (np.arange(1, shift + 1) / (shift + 1))
        else:
            s = -shift
            out[:n_bins - s] = col[s:]
            edge = col[-1]
            out[n_bins - s:] = edge * (np.arange(s, 0, -1) / (s + 1))
        cols[t] = out
    return replace(diagram, columns=cols)


def segment_split_filter(diagram: DopplerTimeDiagram, window_frames: int,
                         threshold: float, j_min: int = 2,
                         j_max: int = 20) -> list[Segment]:
    """Cut into non-overlapping windows; flag windows below the folding threshold.

    The tail remainder shorter than one window is dropped. Returns [] when the
    diagram is shorter than one window.
    """
    if window_frames < 2:
        raise IdentifyError("window_frames must be >= 2")
    n = diagram.n_frames // window_frames
    segments = []
    for k in range(n):
        block = diagram.columns[k * window_frames:(k + 1) * window_frames]
        max_fold = max(folding_result(col, j_min, j_max).folding_result
                       for col in block)
        segments.append(Segment(
            values=block.copy(),
            max_folding_result=float(max_fold),
            passed_filter=bool(max_fold >= threshold),
            provenance={"window": k,
                        "start_time_s": float(diagram.frame_times[k * window_frames])},
        ))
    return segments


def calibrate_threshold(noise_max_folds, n_sigma: float = 5.0) -> float:
    """Threshold = mean + n_sigma * std of noise-only segment max folding results."""
    vals = np.asarray(noise_max_folds, dtype=float)
    if vals.size == 0:
        raise IdentifyError("no noise folding samples to calibrate from")
    return float(vals.mean() + n_sigma * vals.std())


def noise_window_max_folds(fmap: FoldingMap, window_frames: int,
                           exclude_bins=None, guard_bins: int = 4) -> np.ndarray:
    """Noise-only per-window maxima of folding results, for threshold calibration.

    exclude_bins (e.g. a track) masks those bins plus a guard band around them.
    """
    keep = np.ones(fmap.n_range_bins, dtype=bool)
    if exclude_bins is not None:
        for b in np.unique(np.asarray(exclude_bins, dtype=int)):
            lo = max(0, b - guard_bins)
            keep[lo:b + guard_bins + 1] = False
    rows = fmap.values[keep]
    n_win = fmap.n_frames // window_frames
    if n_win == 0 or rows.shape[0] == 0:
        raise IdentifyError("not enough noise-only data to calibrate a threshold")
    trimmed = rows[:, :n_win * window_frames].reshape(rows.shape[0], n_win, window_frames)
    return trimmed.max(axis=2).ravel()


def normalize_segment(values: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(values)))
    return values / peak if peak > 0 else values.copy()


# --- classification and metrics ----------------------------------------------

def binary_metrics(tp: int, fp: int, fn: int, tn: int) -> dict:
    """Accuracy, precision, recall, F1 from a confusion table.

    Undefined ratios (empty denominator) are reported as 0.0 with a flag
    naming the degenerate quantity.
    """
    total = tp + fp + fn + tn
    if total == 0:
        raise IdentifyError("empty confusion table")
    flags = []
    accuracy = (tp + tn) / total
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, flags = 0.0, flags + ["precision_undefined"]
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, flags = 0.0, flags + ["recall_undefined"]
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1, flags = 0.0, flags + ["f1_undefined"]
    out = {"accuracy": accuracy, "precision": precision, "recall": recall,
           "f1": f1, "tp": tp, "fp": fp, "fn": fn, "tn": tn}
    if flags:
        out["flags"] = flags
    return out


def classify(detector: LstmDetector, segments, normalize: bool | None = None):
    """Predicted labels for the segments, plus metrics where truth is known.

    Returns (labels, metrics); metrics is None unless at least one segment
    carries a known label.
    """
    segments = list(segments)
    if not segments:
        raise IdentifyError("no segments to classify")
    if normalize is None:
        normalize = detector.normalize
    batch = np.stack([
        normalize_segment(s.values) if normalize else np.asarray(s.values, dtype=float)
        for s in segments])
    scores = detector.forward_batch(batch)
    pred_idx = np.argmax(scores, axis=1)
    labels = [LABELS[i] for i in pred_idx]

    tp = fp = fn = tn = 0
    any_truth = False
    for seg, pred in zip(segments, pred_idx):
        if seg.label not in LABELS:
            continue
        any_truth = True
        truth = LABELS.index(seg.label)
        if truth == 1 and pred == 1:
            tp += 1
        elif truth == 0 and pred == 1:
            fp += 1
        elif truth == 1 and pred == 0:
            fn += 1
        else:
            tn += 1
    metrics = binary_metrics(tp, fp, fn, tn) if any_truth else None
    return labels, metrics


# --- dataset file: one record per segment ------------------------------------

def save_segments(path, segments) -> None:
    with open(path, "wb") as fh:
        fh.write(SEGMENT_MAGIC)
        fh.write(struct.pack("<I", SEGMENT_SCHEMA_VERSION))
        for seg in segments:
            values = np.asarray(seg.values, dtype=np.float32)
            header = {
                "W": int(values.shape[0]),
                "L": int(values.shape[1]),
                "label": seg.label,
                "provenance": seg.provenance,
                "max_folding_result": float(seg.max_folding_result),
                "passed_filter": bool(seg.passed_filter),
            }
            blob = json.dumps(header, sort_keys=True).encode()
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(values.tobytes(order="C"))


def load_segments(path) -> list[Segment]:
    segments = []
    with open(path, "rb") as fh:
        magic = fh.read(len(SEGMENT_MAGIC))
        if magic != SEGMENT_MAGIC:
            raise IdentifyError(f"not a segment dataset file: bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SEGMENT_SCHEMA_VERSION:
            raise IdentifyError(f"unsupported dataset schema_version {version}")
        while True:
            raw = fh.read(4)
            if not raw:
                break
            if len(raw) < 4:
                raise IdentifyError("truncated dataset record header")
            (hlen,) = struct.unpack("<I", raw)
            header = json.loads(fh.read(hlen).decode())
            w, l = header["W"], header["L"]
            data = fh.read(w * l * 4)
            if len(data) < w * l * 4:
                raise IdentifyError("truncated dataset record payload")
            values = np.frombuffer(data, dtype=np.float32).reshape(w, l).astype(float)
            segments.append(Segment(
                values=values,
                label=header.get("label", "unlabeled"),
                max_folding_result=header.get("max_folding_result", 0.0),
                passed_filter=header.get("passed_filter", True),
                provenance=header.get("provenance", {}),
            ))
    return segments
