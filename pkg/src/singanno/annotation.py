"""Core domain types for singing annotations and frame/time conversion.

All times are seconds (float64); frame indices are the canonical discrete
representation. Conversion rounds half-up so that a single rule is used
toolkit-wide.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SILENCE_TOKENS = ("<SP>", "<AP>")

TECHNIQUE_NAMES = (
    "mixed",
    "falsetto",
    "strong",
    "weak",
    "glissando",
    "breathy",
    "bubble",
    "vibrato",
    "pharyngeal",
)

STYLE_ATTRIBUTES = ("language", "gender", "emotion", "pace", "range")

DEFAULT_STYLE_VOCABS: dict[str, tuple[str, ...]] = {
    "language": ("zh", "en"),
    "gender": ("female", "male"),
    "emotion": ("happy", "sad"),
    "pace": ("slow", "moderate", "fast"),
    "range": ("low", "medium", "high"),
}

# MIDI classes 0..127 plus an explicit rest class.
N_PITCH_CLASSES = 129
REST_CLASS = 128


def is_silence(label: str) -> bool:
    return label in SILENCE_TOKENS


@dataclass(frozen=True)
class FrameSpec:
    """Signal framing parameters shared by every frame-level quantity."""

    sample_rate: int = 24000
    hop: int = 128
    win: int = 512
    n_mels: int = 80

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.hop <= 0:
            raise ValueError("hop must be positive")
        if self.win < self.hop:
            raise ValueError("win must be >= hop")

    @property
    def frame_period(self) -> float:
        """Seconds per frame."""
        return self.hop / self.sample_rate


def time_to_frame(t: float, spec: FrameSpec) -> int:
    """Map seconds to the nearest frame index, rounding half-up."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return int(math.floor(t * spec.sample_rate / spec.hop + 0.5))


def frame_to_time(i: int, spec: FrameSpec) -> float:
    """Map a frame index back to seconds."""
    if i < 0:
        raise ValueError(f"frame index must be non-negative, got {i}")
    return i * spec.hop / spec.sample_rate


@dataclass(frozen=True)
class PhonemeSegment:
    """One phoneme (or silence token) with its time span.

    ``word_index`` is None for silence tokens, which never belong to a word.
    """

    label: str
    onset: float
    offset: float
    word_index: int | None = None


@dataclass(frozen=True)
class WordSegment:
    text: str
    onset: float
    offset: float


@dataclass(frozen=True)
class NoteEvent:
    """A note with onset/offset in seconds and an integer MIDI pitch.

    ``pitch`` is None for an explicit rest event; decoded outputs normally
    drop rests entirely.
    """

    onset: float
    offset: float
    pitch: int | None

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    @property
    def is_rest(self) -> bool:
        return self.pitch is None


class TechniqueMatrix:
    """Per-phoneme binary flags for the nine singing techniques.

    Rows follow the annotation's phoneme order; columns follow
    ``TECHNIQUE_NAMES``. Silence phonemes carry all-zero rows.
    """

    def __init__(self, flags: np.ndarray):
        flags = np.asarray(flags, dtype=np.uint8)
        if flags.ndim != 2 or flags.shape[1] != len(TECHNIQUE_NAMES):
            raise ValueError(
                f"technique flags must be [n_phonemes x {len(TECHNIQUE_NAMES)}], "
                f"got shape {flags.shape}"
            )
        flags.setflags(write=False)
        self.flags = flags

    @classmethod
    def zeros(cls, n_phonemes: int) -> "TechniqueMatrix":
        return cls(np.zeros((n_phonemes, len(TECHNIQUE_NAMES)), dtype=np.uint8))

    @property
    def n_phonemes(self) -> int:
        return self.flags.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TechniqueMatrix):
            return NotImplemented
        return np.array_equal(self.flags, other.flags)

    def __repr__(self) -> str:
        return f"TechniqueMatrix(n_phonemes={self.n_phonemes})"


@dataclass(frozen=True)
class GlobalStyle:
    """Sentence-level style attributes as indices into their vocabularies."""

    language: int = 0
    gender: int = 0
    emotion: int = 0
    pace: int = 0
    range: int = 0

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, a) for a in STYLE_ATTRIBUTES)

    def names(self, vocabs: dict[str, tuple[str, ...]] | None = None) -> dict[str, str]:
        vocabs = vocabs or DEFAULT_STYLE_VOCABS
        return {a: vocabs[a][getattr(self, a)] for a in STYLE_ATTRIBUTES}


@dataclass(frozen=True)
class Annotation:
    """A full multi-level annotation for one utterance."""

    phonemes: tuple[PhonemeSegment, ...]
    words: tuple[WordSegment, ...]
    notes: tuple[NoteEvent, ...]
    techniques: TechniqueMatrix
    style: GlobalStyle
    duration: float

    def __post_init__(self):
        object.__setattr__(self, "phonemes", tuple(self.phonemes))
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "notes", tuple(self.notes))


_EPS = 1e-9


def validate(
    a: Annotation,
    style_vocabs: dict[str, tuple[str, ...]] | None = None,
) -> list[str]:
    """Check every Annotation invariant, returning one message per violation.

    An empty list means the annotation is consistent. Violations name the
    offending segment index so batch runs can report precisely.
    """
    vocabs = style_vocabs or DEFAULT_STYLE_VOCABS
    bad: list[str] = []

    for i, seg in enumerate(a.phonemes):
        if seg.onset < 0 or not seg.onset < seg.offset:
            bad.append(f"phoneme {i}: bad span [{seg.onset}, {seg.offset}]")
        if i > 0 and abs(seg.onset - a.phonemes[i - 1].offset) > _EPS:
            kind = "overlap" if seg.onset < a.phonemes[i - 1].offset else "gap"
            bad.append(f"phoneme {i}: {kind} at index {i}")
        if is_silence(seg.label):
            if seg.word_index is not None:
                bad.append(f"phoneme {i}: silence token inside word {seg.word_index}")
        elif seg.word_index is None or not 0 <= seg.word_index < len(a.words):
            bad.append(f"phoneme {i}: word_index {seg.word_index} out of range")

    for w, word in enumerate(a.words):
        members = [s for s in a.phonemes if s.word_index == w]
        if not members:
            bad.append(f"word {w}: no member phonemes")
            continue
        if abs(members[0].onset - word.onset) > _EPS or abs(members[-1].offset - word.offset) > _EPS:
            bad.append(f"word {w}: span differs from phoneme union")

    word_bounds = sorted({b for w in a.words for b in (w.onset, w.offset)})
    for j, note in enumerate(a.notes):
        if not note.onset < note.offset:
            bad.append(f"note {j}: bad span [{note.onset}, {note.offset}]")
        if note.pitch is not None and not 0 <= note.pitch <= 127:
            bad.append(f"note {j}: pitch {note.pitch} out of range")
        if j > 0 and note.onset < a.notes[j - 1].offset - _EPS:
            bad.append(f"note {j}: overlaps note {j - 1}")
        for b in word_bounds:
            if note.onset + _EPS < b < note.offset - _EPS:
                bad.append(f"note {j}: note/word conflict at boundary {b}")
                break

    if a.techniques.n_phonemes != len(a.phonemes):
        bad.append(
            f"techniques: {a.techniques.n_phonemes} rows for {len(a.phonemes)} phonemes"
        )
    else:
        for i, seg in enumerate(a.phonemes):
            if is_silence(seg.label) and a.techniques.flags[i].any():
                bad.append(f"techniques: nonzero row {i} on silence phoneme")

    for attr in STYLE_ATTRIBUTES:
        idx = getattr(a.style, attr)
        if not 0 <= idx < len(vocabs[attr]):
            bad.append(f"style: {attr} index {idx} out of range")

    if a.phonemes and a.phonemes[-1].offset > a.duration + _EPS:
        bad.append("duration: phoneme span exceeds duration")

    return bad


def annotation_to_dict(
    a: Annotation, style_vocabs: dict[str, tuple[str, ...]] | None = None
) -> dict:
    vocabs = style_vocabs or DEFAULT_STYLE_VOCABS
    return {
        "duration": a.duration,
        "phonemes": [
            {"label": s.label, "onset": s.onset, "offset": s.offset, "word_index": s.word_index}
            for s in a.phonemes
        ],
        "words": [{"text": w.text, "onset": w.onset, "offset": w.offset} for w in a.words],
        "notes": [
            {"onset": n.onset, "offset": n.offset, "pitch": n.pitch} for n in a.notes
        ],
        "techniques": a.techniques.flags.tolist(),
        "technique_names": list(TECHNIQUE_NAMES),
        "style": a.style.names(vocabs),
        "style_vocabs": {k: list(v) for k, v in vocabs.items()},
    }


def annotation_from_dict(d: dict) -> Annotation:
    vocabs = {k: tuple(v) for k, v in d.get("style_vocabs", DEFAULT_STYLE_VOCABS).items()}
    style = GlobalStyle(
        **{a: vocabs[a].index(d["style"][a]) for a in STYLE_ATTRIBUTES}
    )
    return Annotation(
        phonemes=tuple(
            PhonemeSegment(p["label"], p["onset"], p["offset"], p["word_index"])
            for p in d["phonemes"]
        ),
        words=tuple(WordSegment(w["text"], w["onset"], w["offset"]) for w in d["words"]),
        notes=tuple(NoteEvent(n["onset"], n["offset"], n["pitch"]) for n in d["notes"]),
        techniques=TechniqueMatrix(np.array(d["techniques"], dtype=np.uint8).reshape(
            len(d["phonemes"]), len(TECHNIQUE_NAMES))),
        style=style,
        duration=d["duration"],
    )


def save_annotation_json(a: Annotation, path: str | Path, **kwargs) -> None:
    Path(path).write_text(json.dumps(annotation_to_dict(a, **kwargs), indent=2), encoding="utf-8")


def load_annotation_json(path: str | Path) -> Annotation:
    return annotation_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
