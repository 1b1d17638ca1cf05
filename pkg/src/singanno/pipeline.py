"""End-to-end decoding of one posterior grid into a full annotation.

The stages run in the fixed inference order: forced alignment of the
known phoneme sequence, word spans from the phone-to-word map, note
boundaries constrained by the word boundaries, per-note pitch, per-phone
techniques, then the sentence-level style attributes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .align import derive_boundaries, path_segments, viterbi_align
from .annotation import (
    TECHNIQUE_NAMES,
    Annotation,
    TechniqueMatrix,
    WordSegment,
    frame_to_time,
    is_silence,
    time_to_frame,
)
from .notes import NoteDecoderConfig, decode_note_boundaries, decode_pitch
from .posterior import PosteriorGrid
from .style import decode_global_style, decode_techniques


@dataclass(frozen=True)
class Lyric:
    """The known token sequence to align: phoneme labels (silence tokens
    included), the word index of each token (None for silence), and the
    word texts."""

    phonemes: tuple[str, ...]
    word_index: tuple[int | None, ...]
    words: tuple[str, ...]

    def __post_init__(self):
        if len(self.phonemes) != len(self.word_index):
            raise ValueError("need one word index per phoneme")

    @classmethod
    def from_annotation(cls, a: Annotation) -> "Lyric":
        return cls(
            phonemes=tuple(s.label for s in a.phonemes),
            word_index=tuple(s.word_index for s in a.phonemes),
            words=tuple(w.text for w in a.words),
        )

    def to_dict(self) -> dict:
        return {
            "phonemes": list(self.phonemes),
            "word_index": list(self.word_index),
            "words": list(self.words),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Lyric":
        return cls(
            phonemes=tuple(d["phonemes"]),
            word_index=tuple(d["word_index"]),
            words=tuple(d["words"]),
        )


def save_lyric(lyric: Lyric, path: str | Path) -> None:
    Path(path).write_text(json.dumps(lyric.to_dict(), indent=2), encoding="utf-8")


def load_lyric(path: str | Path) -> Lyric:
    return Lyric.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DecodeConfig:
    note_threshold: float = 0.5
    tech_threshold: float = 0.5
    exclude_silent_notes: bool = True
    conpoff_matching: str = "greedy"  # used by evaluation, carried for provenance


def decode_annotation(
    grid: PosteriorGrid, lyric: Lyric, cfg: DecodeConfig | None = None
) -> Annotation:
    cfg = cfg or DecodeConfig()
    spec = grid.spec
    T = grid.n_frames

    path = viterbi_align(grid, lyric.phonemes)
    segments, word_spans = derive_boundaries(
        path, lyric.phonemes, lyric.word_index, spec
    )

    words = tuple(
        WordSegment(lyric.words[w] if w < len(lyric.words) else f"w{w}", on, off)
        for w, (on, off) in enumerate(word_spans)
    )

    word_bound_frames = sorted(
        {time_to_frame(on, spec) for on, _ in word_spans}
        | {time_to_frame(off, spec) for _, off in word_spans}
    )
    note_cfg = NoteDecoderConfig.for_spec(
        spec, threshold=cfg.note_threshold, exclude_silent=cfg.exclude_silent_notes
    )
    seg = decode_note_boundaries(grid.note_boundary_prob, word_bound_frames, note_cfg)

    decoded_segments = path_segments(path, lyric.phonemes)
    silence_spans = [
        (start, end)
        for tok, start, end in decoded_segments
        if tok is None or is_silence(lyric.phonemes[tok])
    ]
    notes = decode_pitch(
        grid, seg, silence_spans, exclude_silent=cfg.exclude_silent_notes
    )

    token_flags = decode_techniques(
        grid.technique_prob, lyric.phonemes, threshold=cfg.tech_threshold
    ).flags

    rows = [
        np.zeros(len(TECHNIQUE_NAMES), dtype=np.uint8) if tok is None else token_flags[tok]
        for tok, _, _ in decoded_segments
    ]
    techniques = TechniqueMatrix(np.stack(rows)) if rows else TechniqueMatrix.zeros(0)

    style = decode_global_style(grid.style_prob, grid.style_vocabs)

    return Annotation(
        phonemes=tuple(segments),
        words=words,
        notes=tuple(notes),
        techniques=techniques,
        style=style,
        duration=frame_to_time(T, spec),
    )
