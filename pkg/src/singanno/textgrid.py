"""Praat TextGrid (long text format) parsing and writing.

Only interval tiers are supported; that is what singing corpora ship.
Quoted text uses Praat's escaping convention: a literal double quote is
written as two double quotes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .annotation import (
    SILENCE_TOKENS,
    TECHNIQUE_NAMES,
    Annotation,
    GlobalStyle,
    NoteEvent,
    PhonemeSegment,
    TechniqueMatrix,
    WordSegment,
    is_silence,
)

import numpy as np


class TextGridError(ValueError):
    """Raised on malformed input; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Interval:
    xmin: float
    xmax: float
    text: str


@dataclass(frozen=True)
class IntervalTier:
    name: str
    xmin: float
    xmax: float
    intervals: tuple[Interval, ...]


@dataclass(frozen=True)
class TextGridDocument:
    xmin: float
    xmax: float
    tiers: tuple[IntervalTier, ...]

    def tier(self, name: str) -> IntervalTier:
        for t in self.tiers:
            if t.name == name:
                return t
        raise KeyError(f"no tier named {name!r}")

    def tier_names(self) -> list[str]:
        return [t.name for t in self.tiers]


_NUM_RE = re.compile(r"(-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)")
_STR_RE = re.compile(r'"((?:[^"]|"")*)"')


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def lineno(self) -> int:
        return self.pos  # 1-based number of the line just consumed

    def next(self) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if line.strip():
                return line
        raise TextGridError("unexpected end of file", self.pos)

    def expect_number(self, key: str) -> float:
        line = self.next()
        if key not in line:
            raise TextGridError(f"expected {key!r}", self.lineno)
        m = _NUM_RE.search(line.split("=", 1)[-1])
        if not m:
            raise TextGridError(f"no number for {key!r}", self.lineno)
        return float(m.group(1))

    def expect_string(self, key: str) -> str:
        line = self.next()
        if key not in line:
            raise TextGridError(f"expected {key!r}", self.lineno)
        m = _STR_RE.search(line)
        if not m:
            raise TextGridError(f"no quoted string for {key!r}", self.lineno)
        return m.group(1).replace('""', '"')

    def expect_contains(self, token: str) -> str:
        line = self.next()
        if token not in line:
            raise TextGridError(f"expected {token!r}", self.lineno)
        return line


def parse_textgrid(text: str) -> TextGridDocument:
    """Parse a Praat long-format TextGrid character stream."""
    src = _Lines(text)
    header = src.expect_contains("File type")
    if "ooTextFile" not in header:
        raise TextGridError("not an ooTextFile", src.lineno)
    obj = src.expect_contains("Object class")
    if "TextGrid" not in obj:
        raise TextGridError("object class is not TextGrid", src.lineno)

    xmin = src.expect_number("xmin")
    xmax = src.expect_number("xmax")
    src.expect_contains("tiers?")
    size = int(src.expect_number("size"))
    src.expect_contains("item")

    tiers = []
    for i in range(size):
        src.expect_contains("item")
        klass = src.expect_string("class")
        if klass != "IntervalTier":
            raise TextGridError(f"unsupported tier class {klass!r}", src.lineno)
        name = src.expect_string("name")
        t_xmin = src.expect_number("xmin")
        t_xmax = src.expect_number("xmax")
        n = int(src.expect_number("intervals: size"))
        intervals = []
        prev_max = None
        for j in range(n):
            src.expect_contains("intervals")
            i_min = src.expect_number("xmin")
            i_max = src.expect_number("xmax")
            line_of_xmax = src.lineno
            txt = src.expect_string("text")
            if i_max < i_min:
                raise TextGridError("interval xmax < xmin", line_of_xmax)
            if prev_max is not None and i_min < prev_max:
                raise TextGridError("non-monotone intervals", line_of_xmax)
            prev_max = i_max
            intervals.append(Interval(i_min, i_max, txt))
        tiers.append(IntervalTier(name, t_xmin, t_xmax, tuple(intervals)))

    if len(tiers) != size:
        raise TextGridError(f"tier count mismatch: header says {size}", src.lineno)
    return TextGridDocument(xmin, xmax, tuple(tiers))


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _fmt_str(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def _check_tier(tier: IntervalTier) -> None:
    prev = None
    for j, iv in enumerate(tier.intervals):
        if iv.xmax < iv.xmin:
            raise ValueError(f"tier {tier.name!r} interval {j}: xmax < xmin")
        if prev is not None and abs(iv.xmin - prev) > 1e-9:
            kind = "overlapping" if iv.xmin < prev else "non-contiguous"
            raise ValueError(f"tier {tier.name!r} interval {j}: {kind} intervals")
        prev = iv.xmax
    if tier.intervals:
        if tier.intervals[0].xmin < tier.xmin - 1e-9 or tier.intervals[-1].xmax > tier.xmax + 1e-9:
            raise ValueError(f"tier {tier.name!r}: intervals outside tier span")


def write_textgrid(doc: TextGridDocument) -> str:
    """Serialize to Praat long text format; exact numeric round-trip."""
    for tier in doc.tiers:
        _check_tier(tier)
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        f"xmin = {_fmt_num(doc.xmin)}",
        f"xmax = {_fmt_num(doc.xmax)}",
        "tiers? <exists>",
        f"size = {len(doc.tiers)}",
        "item []:",
    ]
    for i, tier in enumerate(doc.tiers, 1):
        out += [
            f"    item [{i}]:",
            '        class = "IntervalTier"',
            f"        name = {_fmt_str(tier.name)}",
            f"        xmin = {_fmt_num(tier.xmin)}",
            f"        xmax = {_fmt_num(tier.xmax)}",
            f"        intervals: size = {len(tier.intervals)}",
        ]
        for j, iv in enumerate(tier.intervals, 1):
            out += [
                f"        intervals [{j}]:",
                f"            xmin = {_fmt_num(iv.xmin)}",
                f"            xmax = {_fmt_num(iv.xmax)}",
                f"            text = {_fmt_str(iv.text)}",
            ]
    return "\n".join(out) + "\n"


DEFAULT_TIER_MAP: dict = {
    "phones": "phones",
    "words": "words",
    "notes": "notes",
    "techniques": {name: name for name in TECHNIQUE_NAMES},
}

_REST_TEXTS = {"", "rest", "<SP>", "<AP>"}


def annotation_from_textgrid(doc: TextGridDocument, tier_map: dict | None = None) -> Annotation:
    """Build an Annotation from phones/words/notes (+ technique) tiers.

    Technique tiers mark each phone span with "1" or "0"; missing tiers
    default to all-zero columns. Style attributes cannot be carried by a
    TextGrid and default to index 0.
    """
    tm = dict(DEFAULT_TIER_MAP)
    tm.update(tier_map or {})
    names = doc.tier_names()
    for key in ("phones", "words"):
        if tm[key] not in names:
            raise KeyError(f"mandatory tier {tm[key]!r} missing (have {names})")

    word_tier = doc.tier(tm["words"])
    words = tuple(
        WordSegment(iv.text, iv.xmin, iv.xmax)
        for iv in word_tier.intervals
        if iv.text not in _REST_TEXTS
    )

    phone_tier = doc.tier(tm["phones"])
    phonemes = []
    for iv in phone_tier.intervals:
        label = iv.text if iv.text else SILENCE_TOKENS[0]
        if is_silence(label):
            widx = None
        else:
            widx = next(
                (
                    w
                    for w, word in enumerate(words)
                    if word.onset - 1e-9 <= iv.xmin and iv.xmax <= word.offset + 1e-9
                ),
                None,
            )
            if widx is None:
                raise ValueError(
                    f"phone {label!r} [{iv.xmin}, {iv.xmax}] not inside any word"
                )
        phonemes.append(PhonemeSegment(label, iv.xmin, iv.xmax, widx))

    notes: list[NoteEvent] = []
    if tm["notes"] in names:
        for iv in doc.tier(tm["notes"]).intervals:
            if iv.text in _REST_TEXTS:
                continue
            notes.append(NoteEvent(iv.xmin, iv.xmax, int(iv.text)))

    flags = np.zeros((len(phonemes), len(TECHNIQUE_NAMES)), dtype=np.uint8)
    for col, tech in enumerate(TECHNIQUE_NAMES):
        tier_name = tm["techniques"].get(tech)
        if tier_name is None or tier_name not in names:
            continue
        tier = doc.tier(tier_name)
        for i, seg in enumerate(phonemes):
            if is_silence(seg.label):
                continue
            mid = 0.5 * (seg.onset + seg.offset)
            for iv in tier.intervals:
                if iv.xmin <= mid < iv.xmax and iv.text.strip() == "1":
                    flags[i, col] = 1
                    break

    duration = doc.xmax
    return Annotation(
        phonemes=tuple(phonemes),
        words=words,
        notes=tuple(sorted(notes, key=lambda n: n.onset)),
        techniques=TechniqueMatrix(flags),
        style=GlobalStyle(),
        duration=duration,
    )


def _fill_gaps(spans: list[tuple[float, float, str]], xmin: float, xmax: float) -> list[Interval]:
    out: list[Interval] = []
    cursor = xmin
    for on, off, text in spans:
        if on > cursor + 1e-9:
            out.append(Interval(cursor, on, ""))
        out.append(Interval(on, off, text))
        cursor = off
    if xmax > cursor + 1e-9:
        out.append(Interval(cursor, xmax, ""))
    return out


def annotation_to_textgrid(a: Annotation, tier_map: dict | None = None) -> TextGridDocument:
    """Render an Annotation as words/phones/notes (+ technique) tiers."""
    tm = dict(DEFAULT_TIER_MAP)
    tm.update(tier_map or {})
    xmin, xmax = 0.0, a.duration

    tiers = [
        IntervalTier(
            tm["words"],
            xmin,
            xmax,
            tuple(_fill_gaps([(w.onset, w.offset, w.text) for w in a.words], xmin, xmax)),
        ),
        IntervalTier(
            tm["phones"],
            xmin,
            xmax,
            tuple(
                _fill_gaps([(s.onset, s.offset, s.label) for s in a.phonemes], xmin, xmax)
            ),
        ),
        IntervalTier(
            tm["notes"],
            xmin,
            xmax,
            tuple(
                _fill_gaps([(n.onset, n.offset, str(n.pitch)) for n in a.notes if not n.is_rest], xmin, xmax)
            ),
        ),
    ]
    for col, tech in enumerate(TECHNIQUE_NAMES):
        tier_name = tm["techniques"].get(tech)
        if tier_name is None:
            continue
        spans = [
            (s.onset, s.offset, str(int(a.techniques.flags[i, col])))
            for i, s in enumerate(a.phonemes)
        ]
        tiers.append(IntervalTier(tier_name, xmin, xmax, tuple(_fill_gaps(spans, xmin, xmax))))
    return TextGridDocument(xmin, xmax, tuple(tiers))


def load_textgrid(path: str | Path) -> TextGridDocument:
    return parse_textgrid(Path(path).read_text(encoding="utf-8"))


def save_textgrid(doc: TextGridDocument, path: str | Path) -> None:
    Path(path).write_text(write_textgrid(doc), encoding="utf-8")
