"""Singing annotation decoding and evaluation toolkit."""

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
    time_to_frame,
    validate,
)
from .align import AlignmentPath, brute_force_align, derive_boundaries, viterbi_align
from .metrics import MetricReport, ber, conpoff, evaluate_pair, iou, rpa
from .oracle import GeneratorConfig, OracleConfig, random_annotation, synthesize
from .pipeline import DecodeConfig, Lyric, decode_annotation
from .posterior import PosteriorGrid, read_posterior_grid, write_posterior_grid

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AlignmentPath",
    "DecodeConfig",
    "DEFAULT_STYLE_VOCABS",
    "FrameSpec",
    "GeneratorConfig",
    "GlobalStyle",
    "Lyric",
    "MetricReport",
    "N_PITCH_CLASSES",
    "NoteEvent",
    "OracleConfig",
    "PhonemeSegment",
    "PosteriorGrid",
    "REST_CLASS",
    "SILENCE_TOKENS",
    "STYLE_ATTRIBUTES",
    "TECHNIQUE_NAMES",
    "TechniqueMatrix",
    "WordSegment",
    "ber",
    "brute_force_align",
    "conpoff",
    "decode_annotation",
    "derive_boundaries",
    "evaluate_pair",
    "frame_to_time",
    "iou",
    "random_annotation",
    "read_posterior_grid",
    "rpa",
    "synthesize",
    "time_to_frame",
    "validate",
    "viterbi_align",
    "write_posterior_grid",
]
