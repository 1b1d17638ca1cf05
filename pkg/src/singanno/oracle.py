"""Synthetic posterior grids built from ground-truth annotations.

The oracle stands in for a trained network so the decoders can be
verified end-to-end: with all noise knobs at zero, decoding its output
must reproduce the source annotation exactly. Each knob then corrupts one
channel in a controlled, seeded way so metric degradation is measurable
against the unmoved ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .annotation import (
    DEFAULT_STYLE_VOCABS,
    N_PITCH_CLASSES,
    REST_CLASS,
    SILENCE_TOKENS,
    STYLE_ATTRIBUTES,
    TECHNIQUE_NAMES,
    Annotation,
    FrameSpec,
    GlobalStyle,
    NoteEvent,
    PhonemeSegment,
    TechniqueMatrix,
    WordSegment,
    frame_to_time,
    is_silence,
    time_to_frame,
    validate,
)
from .ops import PROB_FLOOR
from .posterior import PosteriorGrid

DEFAULT_PHONE_VOCAB = (
    "a", "e", "i", "o", "u", "b", "d", "f", "g", "k",
    "l", "m", "n", "ng", "r", "s", "sh", "t", "w", "y",
)


@dataclass(frozen=True)
class OracleConfig:
    """Noise knobs; all-zero (with sharpness 1) is the exact regime."""

    label_smoothing: float = 0.0
    boundary_sharpness: float = 1.0
    boundary_jitter_frames: int = 0
    pitch_confusion: float = 0.0
    technique_flip_prob: float = 0.0
    style_confusion: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.label_smoothing < 1:
            raise ValueError("label_smoothing must be in [0, 1)")
        if not 0 < self.boundary_sharpness <= 1:
            raise ValueError("boundary_sharpness must be in (0, 1]")
        if self.boundary_jitter_frames < 0:
            raise ValueError("boundary_jitter_frames must be >= 0")
        if not 0 <= self.pitch_confusion < 1:
            raise ValueError("pitch_confusion must be in [0, 1)")
        if not 0 <= self.technique_flip_prob < 0.5:
            raise ValueError("technique_flip_prob must be in [0, 0.5)")
        if not 0 <= self.style_confusion < 1:
            raise ValueError("style_confusion must be in [0, 1)")


def _smoothed_rows(peaks: np.ndarray, n_classes: int, eps: float) -> np.ndarray:
    """Rows with 1-eps on the peak class and eps spread uniformly, floored
    and logged. Rows sum to 1 before the floor."""
    rows = np.full((len(peaks), n_classes), eps / n_classes, dtype=np.float64)
    rows[np.arange(len(peaks)), peaks] += 1.0 - eps
    return np.log(np.maximum(rows, PROB_FLOOR)).astype(np.float32)


def _jittered(frames: np.ndarray, jitter: int, lo: int, hi: int, rng) -> np.ndarray:
    if jitter == 0 or len(frames) == 0:
        return frames
    moved = frames + rng.integers(-jitter, jitter + 1, size=len(frames))
    return np.clip(moved, lo, hi)


def synthesize(a: Annotation, spec: FrameSpec, cfg: OracleConfig) -> PosteriorGrid:
    """Build a posterior grid whose noiseless argmax reproduces `a` exactly
    frame by frame. Deterministic for a fixed (annotation, cfg) pair."""
    rng = np.random.default_rng(cfg.seed)
    eps = cfg.label_smoothing
    sharp = cfg.boundary_sharpness

    vocab = tuple(
        dict.fromkeys(
            [s.label for s in a.phonemes if not is_silence(s.label)]
            + list(DEFAULT_PHONE_VOCAB)
            + list(SILENCE_TOKENS)
        )
    )
    label_to_id = {p: i for i, p in enumerate(vocab)}

    T = time_to_frame(a.duration, spec)
    bounds = [time_to_frame(s.onset, spec) for s in a.phonemes]
    bounds.append(time_to_frame(a.phonemes[-1].offset, spec))
    if any(b2 - b1 < 1 for b1, b2 in zip(bounds, bounds[1:])) or bounds[-1] > T:
        raise ValueError("annotation allots less than one frame to some phoneme")

    # frame -> phoneme segment index (frames past the span count as silence)
    seg_of_frame = np.searchsorted(np.array(bounds[1:]), np.arange(T), side="right")
    in_span = np.arange(T) < bounds[-1]

    peak = np.empty(T, dtype=np.int64)
    silent = np.empty(T, dtype=bool)
    for t in range(T):
        if in_span[t]:
            label = a.phonemes[int(seg_of_frame[t])].label
            peak[t] = label_to_id[label]
            silent[t] = is_silence(label)
        else:
            peak[t] = label_to_id[SILENCE_TOKENS[0]]
            silent[t] = True
    phoneme_logprob = _smoothed_rows(peak, len(vocab), eps)

    sil_prob = np.where(silent, 1.0 - eps, PROB_FLOOR)
    silence_logprob = np.log(np.maximum(sil_prob, PROB_FLOOR)).astype(np.float32)

    interior = np.array(bounds[1:-1], dtype=np.int64)
    ph_peaks = _jittered(interior, cfg.boundary_jitter_frames, 1, T - 1, rng)
    boundary_prob = np.full(T, 1.0 - sharp, dtype=np.float64)
    if len(ph_peaks):
        boundary_prob[ph_peaks] = sharp
    boundary_prob[0] = sharp

    note_bounds = sorted(
        {time_to_frame(n.onset, spec) for n in a.notes}
        | {time_to_frame(n.offset, spec) for n in a.notes}
    )
    nb_peaks = _jittered(np.array(note_bounds, dtype=np.int64), cfg.boundary_jitter_frames, 1, T - 1, rng)
    note_boundary_prob = np.full(T, 1.0 - sharp, dtype=np.float64)
    if len(nb_peaks):
        note_boundary_prob[np.clip(nb_peaks, 0, T - 1)] = sharp

    pitch_peak = np.full(T, REST_CLASS, dtype=np.int64)
    for n in a.notes:
        if n.is_rest:
            continue
        cls = n.pitch
        if cfg.pitch_confusion > 0 and rng.random() < cfg.pitch_confusion:
            cls = int(np.clip(cls + (1 if rng.random() < 0.5 else -1), 0, 127))
        pitch_peak[time_to_frame(n.onset, spec) : time_to_frame(n.offset, spec)] = cls
    pitch_logprob = _smoothed_rows(pitch_peak, N_PITCH_CLASSES, eps)

    truth = a.techniques.flags.astype(np.float64)
    flips = rng.random(truth.shape) < cfg.technique_flip_prob
    effective = np.where(flips, 1.0 - truth, truth)
    conf = max(cfg.technique_flip_prob, PROB_FLOOR)
    technique_prob = np.where(effective > 0, 1.0 - conf, conf).astype(np.float32)

    style_prob: dict[str, np.ndarray] = {}
    vocabs = dict(DEFAULT_STYLE_VOCABS)
    for attr in STYLE_ATTRIBUTES:
        size = len(vocabs[attr])
        target = getattr(a.style, attr)
        if cfg.style_confusion > 0 and size > 1 and rng.random() < cfg.style_confusion:
            target = (target + int(rng.integers(1, size))) % size
        vec = np.full(size, cfg.style_confusion / size, dtype=np.float64)
        vec[target] += 1.0 - cfg.style_confusion
        style_prob[attr] = np.maximum(vec, PROB_FLOOR).astype(np.float32)

    return PosteriorGrid(
        spec=spec,
        phoneme_vocab=vocab,
        phoneme_logprob=phoneme_logprob,
        silence_logprob=silence_logprob,
        boundary_prob=boundary_prob.astype(np.float32),
        note_boundary_prob=note_boundary_prob.astype(np.float32),
        pitch_logprob=pitch_logprob,
        technique_prob=technique_prob,
        style_prob=style_prob,
        technique_names=TECHNIQUE_NAMES,
        style_vocabs=vocabs,
    )


@dataclass(frozen=True)
class GeneratorConfig:
    n_phones: int = 12
    vocab: tuple[str, ...] = DEFAULT_PHONE_VOCAB
    tempo: float = 120.0
    seed: int = 0
    spec: FrameSpec = field(default_factory=FrameSpec)

    def __post_init__(self):
        if self.n_phones < 1:
            raise ValueError("n_phones must be >= 1")
        if self.tempo <= 0:
            raise ValueError("tempo must be positive")


MIN_PHONE_FRAMES = 3
MIN_NOTE_FRAMES = 5


def random_annotation(cfg: GeneratorConfig) -> Annotation:
    """A random but internally consistent annotation: contiguous
    frame-aligned phonemes with log-normal durations, words of 1-4
    phonemes separated by occasional silences, notes subdividing words,
    random techniques and style. Adjacent segments never repeat a label,
    which keeps every boundary recoverable by forced alignment."""
    rng = np.random.default_rng(cfg.seed)
    spec = cfg.spec
    scale = 120.0 / cfg.tempo

    # group phones into words of 1..4
    word_sizes: list[int] = []
    remaining = cfg.n_phones
    while remaining > 0:
        size = int(min(remaining, rng.integers(1, 5)))
        word_sizes.append(size)
        remaining -= size

    def phone_frames() -> int:
        raw = rng.lognormal(mean=math.log(18.0 * scale), sigma=0.5)
        return int(np.clip(round(raw), MIN_PHONE_FRAMES, 150))

    def silence_frames() -> int:
        return int(rng.integers(4, 30))

    labels: list[str] = []
    word_of: list[int | None] = []
    durations: list[int] = []

    def add_silence():
        options = [s for s in SILENCE_TOKENS if not labels or labels[-1] != s]
        labels.append(str(rng.choice(options)))
        word_of.append(None)
        durations.append(silence_frames())

    if rng.random() < 0.5 and cfg.n_phones > 1:
        add_silence()
    for w, size in enumerate(word_sizes):
        if w > 0 and rng.random() < 0.35:
            add_silence()
        for _ in range(size):
            choices = [p for p in cfg.vocab if not labels or p != labels[-1]]
            labels.append(str(rng.choice(choices)))
            word_of.append(w)
            durations.append(phone_frames())
    if rng.random() < 0.5 and cfg.n_phones > 1:
        add_silence()

    bounds = np.concatenate(([0], np.cumsum(durations)))
    T = int(bounds[-1])
    phonemes = tuple(
        PhonemeSegment(
            labels[i],
            frame_to_time(int(bounds[i]), spec),
            frame_to_time(int(bounds[i + 1]), spec),
            word_of[i],
        )
        for i in range(len(labels))
    )

    words = []
    for w in range(len(word_sizes)):
        members = [i for i, widx in enumerate(word_of) if widx == w]
        words.append(
            WordSegment(
                "-".join(labels[i] for i in members),
                frame_to_time(int(bounds[members[0]]), spec),
                frame_to_time(int(bounds[members[-1] + 1]), spec),
            )
        )

    # notes: subdivide each word span at frame-aligned cut points; single
    # phone words always carry exactly one note
    notes: list[NoteEvent] = []
    pitch = int(rng.integers(55, 76))
    for w in range(len(word_sizes)):
        members = [i for i, widx in enumerate(word_of) if widx == w]
        lo, hi = int(bounds[members[0]]), int(bounds[members[-1] + 1])
        cuts = [lo, hi]
        if word_sizes[w] > 1:
            for _ in range(int(rng.integers(0, 3))):
                gaps = sorted(cuts)
                spots = [
                    f
                    for f in range(lo + MIN_NOTE_FRAMES, hi - MIN_NOTE_FRAMES + 1)
                    if all(abs(f - c) >= MIN_NOTE_FRAMES for c in cuts)
                ]
                if not spots:
                    break
                cuts.append(int(rng.choice(spots)))
        cuts = sorted(cuts)
        for seg_lo, seg_hi in zip(cuts[:-1], cuts[1:]):
            pitch = int(np.clip(pitch + rng.integers(-4, 5), 45, 90))
            notes.append(
                NoteEvent(frame_to_time(seg_lo, spec), frame_to_time(seg_hi, spec), pitch)
            )

    flags = np.zeros((len(labels), len(TECHNIQUE_NAMES)), dtype=np.uint8)
    for i, label in enumerate(labels):
        if not is_silence(label):
            flags[i] = rng.random(len(TECHNIQUE_NAMES)) < 0.15

    style = GlobalStyle(
        **{
            attr: int(rng.integers(0, len(DEFAULT_STYLE_VOCABS[attr])))
            for attr in STYLE_ATTRIBUTES
        }
    )

    annotation = Annotation(
        phonemes=phonemes,
        words=tuple(words),
        notes=tuple(notes),
        techniques=TechniqueMatrix(flags),
        style=style,
        duration=frame_to_time(T, spec),
    )
    problems = validate(annotation)
    if problems:
        raise AssertionError(f"generator produced an invalid annotation: {problems}")
    return annotation
