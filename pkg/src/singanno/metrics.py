"""Evaluation metrics for alignment, note transcription, and style
annotation. Every score is reported multiplied by 100.

Boundary error rate and segment IOU compare index-paired segmentations of
the same label sequence (the forced-alignment setting evaluates a known
lyric). Note metrics follow the usual transcription conventions: onset
tolerance 50 ms, offset tolerance max(50 ms, 20% of the reference note
duration), pitch tolerance 50 cents; raw pitch accuracy expands both note
lists to frame-level pitch sequences first. Boundary error rate uses a
20 ms tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotation import (
    STYLE_ATTRIBUTES,
    TECHNIQUE_NAMES,
    Annotation,
    FrameSpec,
    GlobalStyle,
    NoteEvent,
    TechniqueMatrix,
    time_to_frame,
)

BER_TOLERANCE = 0.020
ONSET_TOLERANCE = 0.050
OFFSET_TOLERANCE = 0.050
OFFSET_RATIO = 0.20
PITCH_TOLERANCE_CENTS = 50.0


def _spans(segments) -> list[tuple[float, float]]:
    return [(s.onset, s.offset) for s in segments]


def _check_paired(ref_segments, hyp_segments):
    if len(ref_segments) != len(hyp_segments):
        raise ValueError(
            f"segment count mismatch: {len(ref_segments)} vs {len(hyp_segments)}"
        )
    ref_labels = [getattr(s, "label", None) for s in ref_segments]
    hyp_labels = [getattr(s, "label", None) for s in hyp_segments]
    if any(l is not None for l in ref_labels) and ref_labels != hyp_labels:
        raise ValueError("label sequences differ; segments cannot be index-paired")


def _boundaries(spans: list[tuple[float, float]]) -> np.ndarray:
    # all onsets plus the terminal offset
    return np.array([on for on, _ in spans] + [spans[-1][1]], dtype=np.float64)


def ber(ref_segments, hyp_segments, tol: float = BER_TOLERANCE) -> float:
    """Percentage of index-paired boundaries displaced by more than tol."""
    _check_paired(ref_segments, hyp_segments)
    if not ref_segments:
        return 0.0
    ref_b = _boundaries(_spans(ref_segments))
    hyp_b = _boundaries(_spans(hyp_segments))
    misplaced = np.abs(ref_b - hyp_b) > tol
    return 100.0 * float(misplaced.mean())


def iou(ref_segments, hyp_segments) -> float:
    """Mean per-pair temporal intersection over union, x100."""
    _check_paired(ref_segments, hyp_segments)
    if not ref_segments:
        return 100.0
    scores = []
    for (r_on, r_off), (h_on, h_off) in zip(_spans(ref_segments), _spans(hyp_segments)):
        inter = max(0.0, min(r_off, h_off) - max(r_on, h_on))
        union = (r_off - r_on) + (h_off - h_on) - inter
        scores.append(inter / union if union > 0 else 0.0)
    return 100.0 * float(np.mean(scores))


def _note_match_ok(ref: NoteEvent, hyp: NoteEvent, onset_tol, offset_tol, offset_ratio, pitch_tol_cents) -> bool:
    if abs(hyp.onset - ref.onset) > onset_tol:
        return False
    off_tol = max(offset_tol, offset_ratio * ref.duration)
    if abs(hyp.offset - ref.offset) > off_tol:
        return False
    return abs(hyp.pitch - ref.pitch) * 100.0 <= pitch_tol_cents


def conpoff(
    ref_notes,
    hyp_notes,
    onset_tol: float = ONSET_TOLERANCE,
    offset_tol: float = OFFSET_TOLERANCE,
    offset_ratio: float = OFFSET_RATIO,
    pitch_tol_cents: float = PITCH_TOLERANCE_CENTS,
    matching: str = "greedy",
) -> tuple[float, float, float]:
    """Correct-onset-pitch-offset precision/recall/F, x100.

    Matching is one-to-one. The default pairs hypotheses to the unmatched
    reference with the nearest onset among those satisfying all three
    tolerances; matching="optimal" instead maximizes the number of matches
    by bipartite assignment. Rest notes must be excluded beforehand.
    """
    ref = sorted((n for n in ref_notes if not n.is_rest), key=lambda n: n.onset)
    hyp = sorted((n for n in hyp_notes if not n.is_rest), key=lambda n: n.onset)
    if not ref and not hyp:
        return 100.0, 100.0, 100.0
    if not ref or not hyp:
        return 0.0, 0.0, 0.0

    tols = (onset_tol, offset_tol, offset_ratio, pitch_tol_cents)
    if matching == "greedy":
        matched_ref: set[int] = set()
        matches = 0
        for h in hyp:
            candidates = [
                (abs(h.onset - r.onset), i)
                for i, r in enumerate(ref)
                if i not in matched_ref and _note_match_ok(r, h, *tols)
            ]
            if candidates:
                matched_ref.add(min(candidates)[1])
                matches += 1
    elif matching == "optimal":
        from scipy.optimize import linear_sum_assignment

        feasible = np.zeros((len(ref), len(hyp)))
        for i, r in enumerate(ref):
            for j, h in enumerate(hyp):
                feasible[i, j] = 1.0 if _note_match_ok(r, h, *tols) else 0.0
        rows, cols = linear_sum_assignment(feasible, maximize=True)
        matches = int(feasible[rows, cols].sum())
    else:
        raise ValueError(f"unknown matching strategy {matching!r}")

    precision = 100.0 * matches / len(hyp)
    recall = 100.0 * matches / len(ref)
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f


def _frame_pitch(notes, n_frames: int, spec: FrameSpec) -> np.ndarray:
    out = np.full(n_frames, -1, dtype=np.int64)  # -1 encodes rest
    for n in notes:
        if n.is_rest:
            continue
        out[time_to_frame(n.onset, spec) : time_to_frame(n.offset, spec)] = n.pitch
    return out


def rpa(ref_notes, hyp_notes, spec: FrameSpec, pitch_tol_cents: float = PITCH_TOLERANCE_CENTS) -> float:
    """Raw pitch accuracy over the frame expansion of both note lists:
    the share of voiced reference frames whose hypothesis is voiced and
    within the pitch tolerance, x100."""
    ref_list = [n for n in ref_notes if not n.is_rest]
    hyp_list = [n for n in hyp_notes if not n.is_rest]
    if not ref_list and not hyp_list:
        return 100.0
    ends = [time_to_frame(n.offset, spec) for n in ref_list + hyp_list]
    n_frames = max(ends) if ends else 0
    ref_pitch = _frame_pitch(ref_list, n_frames, spec)
    hyp_pitch = _frame_pitch(hyp_list, n_frames, spec)
    voiced = ref_pitch >= 0
    if not voiced.any():
        raise ValueError("reference has no voiced frames")
    hit = voiced & (hyp_pitch >= 0) & (
        np.abs(ref_pitch - hyp_pitch) * 100.0 <= pitch_tol_cents
    )
    return 100.0 * float(hit.sum() / voiced.sum())


def technique_scores(
    ref: TechniqueMatrix, hyp: TechniqueMatrix
) -> tuple[dict[str, float], dict[str, float], float, float]:
    """Per-technique (F1, accuracy) plus unweighted macro averages, x100.

    A technique absent from both reference and hypothesis scores F1 = 100
    so that silent columns do not drag the macro average to zero.
    """
    if ref.flags.shape != hyp.flags.shape:
        raise ValueError(
            f"technique shape mismatch: {ref.flags.shape} vs {hyp.flags.shape}"
        )
    f1s: dict[str, float] = {}
    accs: dict[str, float] = {}
    for col, name in enumerate(TECHNIQUE_NAMES):
        r = ref.flags[:, col].astype(np.int64)
        h = hyp.flags[:, col].astype(np.int64)
        tp = int(((r == 1) & (h == 1)).sum())
        fp = int(((r == 0) & (h == 1)).sum())
        fn = int(((r == 1) & (h == 0)).sum())
        acc = 100.0 * float((r == h).mean()) if r.size else 100.0
        f1 = 100.0 if (2 * tp + fp + fn) == 0 else 100.0 * 2 * tp / (2 * tp + fp + fn)
        f1s[name], accs[name] = f1, acc
    macro_f1 = float(np.mean(list(f1s.values())))
    macro_acc = float(np.mean(list(accs.values())))
    return f1s, accs, macro_f1, macro_acc


def style_accuracy(
    refs: list[GlobalStyle], hyps: list[GlobalStyle]
) -> tuple[dict[str, float], float]:
    """Exact-match rate per attribute plus the macro mean, x100."""
    if len(refs) != len(hyps):
        raise ValueError(f"style count mismatch: {len(refs)} vs {len(hyps)}")
    if not refs:
        raise ValueError("no style pairs to score")
    per_attr = {}
    for attr in STYLE_ATTRIBUTES:
        hits = [getattr(r, attr) == getattr(h, attr) for r, h in zip(refs, hyps)]
        per_attr[attr] = 100.0 * float(np.mean(hits))
    return per_attr, float(np.mean(list(per_attr.values())))


@dataclass
class MetricReport:
    ber: float
    iou_phoneme: float
    iou_word: float
    conpoff_precision: float
    conpoff_recall: float
    conpoff_f: float
    rpa: float
    technique_f1: dict[str, float]
    technique_acc: dict[str, float]
    technique_macro_f1: float
    technique_macro_acc: float
    style_acc: dict[str, float]
    style_macro_acc: float

    def to_dict(self) -> dict:
        return {
            "ber": self.ber,
            "iou_phoneme": self.iou_phoneme,
            "iou_word": self.iou_word,
            "conpoff_precision": self.conpoff_precision,
            "conpoff_recall": self.conpoff_recall,
            "conpoff_f": self.conpoff_f,
            "rpa": self.rpa,
            "technique_f1": dict(self.technique_f1),
            "technique_acc": dict(self.technique_acc),
            "technique_macro_f1": self.technique_macro_f1,
            "technique_macro_acc": self.technique_macro_acc,
            "style_acc": dict(self.style_acc),
            "style_macro_acc": self.style_macro_acc,
        }

    def format_table(self) -> str:
        rows = [
            ("BER (phoneme boundaries)", self.ber),
            ("IOU (phoneme)", self.iou_phoneme),
            ("IOU (word)", self.iou_word),
            ("COnPOff precision", self.conpoff_precision),
            ("COnPOff recall", self.conpoff_recall),
            ("COnPOff F", self.conpoff_f),
            ("RPA", self.rpa),
        ]
        lines = ["metric                        value", "-" * 36]
        lines += [f"{name:<28s}{value:>8.2f}" for name, value in rows]
        lines.append("")
        lines.append("technique                F1     ACC")
        lines.append("-" * 36)
        for name in TECHNIQUE_NAMES:
            lines.append(
                f"{name:<20s}{self.technique_f1[name]:>8.2f}{self.technique_acc[name]:>8.2f}"
            )
        lines.append(
            f"{'TEC (macro)':<20s}{self.technique_macro_f1:>8.2f}{self.technique_macro_acc:>8.2f}"
        )
        lines.append("")
        lines.append("style attribute            ACC")
        lines.append("-" * 36)
        for attr in STYLE_ATTRIBUTES:
            lines.append(f"{attr:<20s}{self.style_acc[attr]:>11.2f}")
        lines.append(f"{'STY (macro)':<20s}{self.style_macro_acc:>11.2f}")
        return "\n".join(lines)


def evaluate_pair(
    ref: Annotation,
    hyp: Annotation,
    spec: FrameSpec | None = None,
    matching: str = "greedy",
) -> MetricReport:
    """All metrics for one reference/hypothesis annotation pair."""
    spec = spec or FrameSpec()
    precision, recall, f = conpoff(ref.notes, hyp.notes, matching=matching)
    tech_f1, tech_acc, macro_f1, macro_acc = technique_scores(ref.techniques, hyp.techniques)
    style_per, style_macro = style_accuracy([ref.style], [hyp.style])
    return MetricReport(
        ber=ber(ref.phonemes, hyp.phonemes),
        iou_phoneme=iou(ref.phonemes, hyp.phonemes),
        iou_word=iou(ref.words, hyp.words),
        conpoff_precision=precision,
        conpoff_recall=recall,
        conpoff_f=f,
        rpa=rpa(ref.notes, hyp.notes, spec),
        technique_f1=tech_f1,
        technique_acc=tech_acc,
        technique_macro_f1=macro_f1,
        technique_macro_acc=macro_acc,
        style_acc=style_per,
        style_macro_acc=style_macro,
    )


def aggregate_reports(reports: list[MetricReport]) -> MetricReport:
    """Unweighted mean of per-file reports (associative, order-free)."""
    if not reports:
        raise ValueError("nothing to aggregate")

    def mean(get):
        return float(np.mean([get(r) for r in reports]))

    return MetricReport(
        ber=mean(lambda r: r.ber),
        iou_phoneme=mean(lambda r: r.iou_phoneme),
        iou_word=mean(lambda r: r.iou_word),
        conpoff_precision=mean(lambda r: r.conpoff_precision),
        conpoff_recall=mean(lambda r: r.conpoff_recall),
        conpoff_f=mean(lambda r: r.conpoff_f),
        rpa=mean(lambda r: r.rpa),
        technique_f1={
            n: mean(lambda r: r.technique_f1[n]) for n in TECHNIQUE_NAMES
        },
        technique_acc={
            n: mean(lambda r: r.technique_acc[n]) for n in TECHNIQUE_NAMES
        },
        technique_macro_f1=mean(lambda r: r.technique_macro_f1),
        technique_macro_acc=mean(lambda r: r.technique_macro_acc),
        style_acc={a: mean(lambda r: r.style_acc[a]) for a in STYLE_ATTRIBUTES},
        style_macro_acc=mean(lambda r: r.style_macro_acc),
    )
