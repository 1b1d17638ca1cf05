"""Note boundary decoding under word-boundary constraints, segment pitch
decoding, and the learned-weight aggregation operator used when real
model features are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annotation import REST_CLASS, FrameSpec, NoteEvent, frame_to_time
from .posterior import PosteriorGrid

MIN_NOTE_SECONDS = 0.020


@dataclass(frozen=True)
class NoteDecoderConfig:
    threshold: float = 0.5
    min_gap_frames: int = 4  # 20 ms at 24 kHz / hop 128
    exclude_silent: bool = True

    @classmethod
    def for_spec(cls, spec: FrameSpec, threshold: float = 0.5, exclude_silent: bool = True):
        gap = max(1, int(math.floor(MIN_NOTE_SECONDS / spec.frame_period + 0.5)))
        return cls(threshold=threshold, min_gap_frames=gap, exclude_silent=exclude_silent)


@dataclass(frozen=True)
class NoteSegmentation:
    """Sorted boundary frames including 0 and T; every word boundary is a
    note boundary."""

    boundaries: tuple[int, ...]
    forced: frozenset[int]  # word boundaries plus the endpoints

    @property
    def segments(self) -> list[tuple[int, int]]:
        return list(zip(self.boundaries[:-1], self.boundaries[1:]))


def decode_note_boundaries(
    note_boundary_prob: np.ndarray,
    word_boundaries,
    cfg: NoteDecoderConfig = NoteDecoderConfig(),
) -> NoteSegmentation:
    """Threshold + non-maximum suppression on the boundary posterior, then
    force in every word boundary. Segments shorter than min_gap_frames are
    merged into a neighbor by dropping their weakest non-forced edge."""
    prob = np.asarray(note_boundary_prob, dtype=np.float64)
    if prob.ndim != 1:
        raise ValueError("note boundary probabilities must be 1-D")
    if prob.size and (prob.min() < 0 or prob.max() > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    T = prob.shape[0]
    forced = {0, T}
    for b in word_boundaries:
        if not 0 <= b <= T:
            raise ValueError(f"word boundary {b} outside [0, {T}]")
        forced.add(int(b))

    candidates = np.flatnonzero(prob >= cfg.threshold)
    # NMS: strongest peak wins inside each min_gap window (earlier frame on ties)
    order = sorted(candidates, key=lambda f: (-prob[f], f))
    kept: list[int] = []
    for f in order:
        if all(abs(f - g) >= cfg.min_gap_frames for g in kept):
            kept.append(int(f))

    bounds = sorted(forced | set(kept))

    # merge too-short segments, never dropping forced boundaries
    changed = True
    while changed:
        changed = False
        for i in range(len(bounds) - 1):
            if bounds[i + 1] - bounds[i] >= cfg.min_gap_frames:
                continue
            left, right = bounds[i], bounds[i + 1]
            removable = [b for b in (left, right) if b not in forced]
            if not removable:
                continue
            drop = min(removable, key=lambda b: prob[b] if b < T else 2.0)
            bounds.remove(drop)
            changed = True
            break

    return NoteSegmentation(boundaries=tuple(bounds), forced=frozenset(forced))


def cif_aggregate(features: np.ndarray, w_a: np.ndarray) -> np.ndarray:
    """Collapse a [L_j, D] segment to one vector using learned scalar
    weights: softmax over frames of features @ w_a, then the weighted sum.
    The output always lies in the convex hull of the input rows."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError("features must be [L_j, D] with L_j >= 1")
    w_a = np.asarray(w_a, dtype=np.float64).reshape(-1)
    if w_a.shape[0] != features.shape[1]:
        raise ValueError("projection length must match feature dimension")
    logits = features @ w_a
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    return weights @ features


def decode_pitch(
    grid: PosteriorGrid,
    seg: NoteSegmentation,
    silence_spans=(),
    exclude_silent: bool = True,
) -> list[NoteEvent]:
    """Per segment, average the pitch log-posteriors over its frames and
    take the argmax over the 129 classes (lowest class on ties). Segments
    decoded as rest, or mostly covered by silence, are dropped."""
    silence = np.zeros(grid.n_frames, dtype=bool)
    for lo, hi in silence_spans:
        silence[int(lo) : int(hi)] = True

    notes: list[NoteEvent] = []
    for start, end in seg.segments:
        mean_lp = grid.pitch_logprob[start:end].astype(np.float64).mean(axis=0)
        cls = int(np.argmax(mean_lp))
        if cls == REST_CLASS:
            continue
        if exclude_silent and silence[start:end].sum() * 2 > (end - start):
            continue
        notes.append(
            NoteEvent(frame_to_time(start, grid.spec), frame_to_time(end, grid.spec), cls)
        )
    return notes


def hz_to_midi(f: float) -> float:
    """Fractional MIDI number of a frequency (A4 = 440 Hz = 69)."""
    if f <= 0:
        raise ValueError("frequency must be positive")
    return 69.0 + 12.0 * math.log2(f / 440.0)


def midi_to_hz(m: float) -> float:
    return 440.0 * 2.0 ** ((m - 69.0) / 12.0)
