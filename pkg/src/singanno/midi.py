"""Standard MIDI File (format 0) export for decoded note events.

Fixed conventions: division 480 ticks per quarter note, one tempo meta
event at tick 0, note-on velocity 80, channel 0. Rest events are skipped.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Iterable

from .annotation import NoteEvent

TICKS_PER_QUARTER = 480
NOTE_ON_VELOCITY = 80


def _vlq(value: int) -> bytes:
    # MIDI variable-length quantity, 7 bits per byte, MSB-first
    if value < 0:
        raise ValueError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def seconds_to_ticks(t: float, tempo_bpm: float) -> int:
    return int(math.floor(t * tempo_bpm / 60.0 * TICKS_PER_QUARTER + 0.5))


def export_midi(notes: Iterable[NoteEvent], tempo_bpm: float = 120.0) -> bytes:
    """Render notes as a complete SMF format-0 byte stream."""
    if tempo_bpm <= 0:
        raise ValueError("tempo must be positive")

    events: list[tuple[int, int, bytes]] = []  # (tick, order, payload)
    for note in notes:
        if note.is_rest:
            continue
        if not 0 <= note.pitch <= 127:
            raise ValueError(f"MIDI pitch {note.pitch} out of [0, 127]")
        on = seconds_to_ticks(note.onset, tempo_bpm)
        off = seconds_to_ticks(note.offset, tempo_bpm)
        events.append((on, 1, bytes((0x90, note.pitch, NOTE_ON_VELOCITY))))
        events.append((off, 0, bytes((0x80, note.pitch, 0))))
    # note-offs sort before simultaneous note-ons so adjacent notes chain
    events.sort(key=lambda e: (e[0], e[1]))

    usec_per_quarter = int(round(60_000_000 / tempo_bpm))
    track = bytearray()
    track += _vlq(0) + bytes((0xFF, 0x51, 0x03)) + usec_per_quarter.to_bytes(3, "big")
    cursor = 0
    for tick, _, payload in events:
        track += _vlq(tick - cursor) + payload
        cursor = tick
    track += _vlq(0) + bytes((0xFF, 0x2F, 0x00))

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_QUARTER)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def save_midi(notes: Iterable[NoteEvent], path: str | Path, tempo_bpm: float = 120.0) -> None:
    Path(path).write_bytes(export_midi(notes, tempo_bpm))
