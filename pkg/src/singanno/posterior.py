"""Frame-level posterior grids: the interchange object between a model
(real or synthetic) and the decoders.

On disk a grid is a JSON sidecar (`<base>.json`) plus a raw payload
(`<base>.f32`) of little-endian float32 matrices concatenated row-major in
a fixed order: phoneme log-probs, silence log-probs, phone-boundary probs,
note-boundary probs, pitch log-probs, per-phone technique probs, then one
style vector per attribute.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotation import (
    DEFAULT_STYLE_VOCABS,
    N_PITCH_CLASSES,
    STYLE_ATTRIBUTES,
    TECHNIQUE_NAMES,
    FrameSpec,
)


class GridFormatError(ValueError):
    pass


@dataclass
class PosteriorGrid:
    spec: FrameSpec
    phoneme_vocab: tuple[str, ...]
    phoneme_logprob: np.ndarray  # [T, |V|]
    silence_logprob: np.ndarray  # [T]
    boundary_prob: np.ndarray  # [T]
    note_boundary_prob: np.ndarray  # [T]
    pitch_logprob: np.ndarray  # [T, 129]
    technique_prob: np.ndarray  # [L_p, 9]
    style_prob: dict[str, np.ndarray]
    technique_names: tuple[str, ...] = TECHNIQUE_NAMES
    style_vocabs: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_STYLE_VOCABS)
    )

    @property
    def n_frames(self) -> int:
        return self.phoneme_logprob.shape[0]

    @property
    def n_phonemes(self) -> int:
        return self.technique_prob.shape[0]

    def _matrices(self) -> list[tuple[str, np.ndarray, tuple[int, int]]]:
        T = self.n_frames
        V = len(self.phoneme_vocab)
        L = self.n_phonemes
        mats = [
            ("phoneme_logprob", self.phoneme_logprob, (T, V)),
            ("silence_logprob", self.silence_logprob.reshape(-1, 1), (T, 1)),
            ("boundary_prob", self.boundary_prob.reshape(-1, 1), (T, 1)),
            ("note_boundary_prob", self.note_boundary_prob.reshape(-1, 1), (T, 1)),
            ("pitch_logprob", self.pitch_logprob, (T, N_PITCH_CLASSES)),
            ("technique_prob", self.technique_prob, (L, len(self.technique_names))),
        ]
        for attr in STYLE_ATTRIBUTES:
            mats.append(
                (f"style_prob[{attr}]", self.style_prob[attr].reshape(1, -1),
                 (1, len(self.style_vocabs[attr])))
            )
        return mats

    def check(self) -> None:
        for name, mat, shape in self._matrices():
            if tuple(mat.shape) != shape:
                raise GridFormatError(f"{name}: shape {mat.shape} != expected {shape}")
            if mat.dtype != np.float32:
                raise GridFormatError(f"{name}: dtype {mat.dtype} != float32")
        rowsum = np.exp(self.phoneme_logprob.astype(np.float64)).sum(axis=1)
        if not np.allclose(rowsum, 1.0, atol=1e-4):
            raise GridFormatError("phoneme posterior rows do not sum to 1")
        for arr in (self.boundary_prob, self.note_boundary_prob):
            if arr.min() < 0 or arr.max() > 1:
                raise GridFormatError("boundary probabilities outside [0, 1]")


def write_posterior_grid(grid: PosteriorGrid, base: str | Path) -> tuple[Path, Path]:
    """Write `<base>.json` + `<base>.f32`; payload round-trips bit-exactly."""
    grid.check()
    base = Path(base)
    header = {
        "spec": {
            "sample_rate": grid.spec.sample_rate,
            "hop": grid.spec.hop,
            "win": grid.spec.win,
            "n_mels": grid.spec.n_mels,
        },
        "T": grid.n_frames,
        "n_phonemes": grid.n_phonemes,
        "phoneme_vocab": list(grid.phoneme_vocab),
        "n_pitch_classes": N_PITCH_CLASSES,
        "technique_names": list(grid.technique_names),
        "style_vocabs": {k: list(v) for k, v in grid.style_vocabs.items()},
    }
    json_path = base.parent / (base.name + ".json")
    f32_path = base.parent / (base.name + ".f32")
    json_path.write_text(json.dumps(header, indent=2), encoding="utf-8")
    with open(f32_path, "wb") as fh:
        for _, mat, _ in grid._matrices():
            fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
    return json_path, f32_path


def read_posterior_grid(base: str | Path) -> PosteriorGrid:
    base = Path(base)
    if base.name.endswith(".json"):
        base = base.parent / base.name[: -len(".json")]
    header = json.loads(
        (base.parent / (base.name + ".json")).read_text(encoding="utf-8")
    )
    spec = FrameSpec(**header["spec"])
    vocab = tuple(header["phoneme_vocab"])
    tech_names = tuple(header["technique_names"])
    style_vocabs = {k: tuple(v) for k, v in header["style_vocabs"].items()}
    T = int(header["T"])
    L = int(header["n_phonemes"])
    if int(header["n_pitch_classes"]) != N_PITCH_CLASSES:
        raise GridFormatError(
            f"unsupported pitch class count {header['n_pitch_classes']}"
        )

    shapes = [
        ("phoneme_logprob", (T, len(vocab))),
        ("silence_logprob", (T, 1)),
        ("boundary_prob", (T, 1)),
        ("note_boundary_prob", (T, 1)),
        ("pitch_logprob", (T, N_PITCH_CLASSES)),
        ("technique_prob", (L, len(tech_names))),
    ] + [(f"style[{a}]", (1, len(style_vocabs[a]))) for a in STYLE_ATTRIBUTES]

    raw = (base.parent / (base.name + ".f32")).read_bytes()
    expected = sum(r * c for _, (r, c) in shapes) * 4
    if len(raw) < expected:
        raise GridFormatError(
            f"payload truncated: {len(raw)} bytes, expected {expected}"
        )
    if len(raw) > expected:
        raise GridFormatError(
            f"payload/dimension mismatch: {len(raw)} bytes, expected {expected}"
        )

    mats = {}
    offset = 0
    for name, (r, c) in shapes:
        n = r * c
        mats[name] = np.frombuffer(raw, dtype="<f4", count=n, offset=offset).reshape(r, c)
        offset += n * 4

    return PosteriorGrid(
        spec=spec,
        phoneme_vocab=vocab,
        phoneme_logprob=mats["phoneme_logprob"].copy(),
        silence_logprob=mats["silence_logprob"].ravel().copy(),
        boundary_prob=mats["boundary_prob"].ravel().copy(),
        note_boundary_prob=mats["note_boundary_prob"].ravel().copy(),
        pitch_logprob=mats["pitch_logprob"].copy(),
        technique_prob=mats["technique_prob"].copy(),
        style_prob={
            a: mats[f"style[{a}]"].ravel().copy() for a in STYLE_ATTRIBUTES
        },
        technique_names=tech_names,
        style_vocabs=style_vocabs,
    )
