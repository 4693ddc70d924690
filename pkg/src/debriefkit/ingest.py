"""Stream parsing, validation, clock alignment and canonical serialization.

Wire formats:
  positions.csv   header ``t_ms,entity,x_mm,y_mm,yaw_deg``; integer columns
                  except yaw (decimal allowed).
  voice.jsonl     one object per line ``{"entity":"PN1","from_ms":0,"to_ms":1500}``.
  utterances.jsonl ``{"entity":..,"from_ms":..,"to_ms":..,"text":..,"code":?}``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import FormatError, InvalidSegmentError, NonMonotonicError
from .model import (
    CodedUtterance,
    CommCode,
    PositionSample,
    Role,
    TimeWindow,
    VoiceSegment,
    WardLayout,
    normalize_yaw,
)

POSITIONS_HEADER = "t_ms,entity,x_mm,y_mm,yaw_deg"

# Timestamps may wobble slightly out of order at the source; larger
# regressions are treated as a broken stream.
JITTER_ALLOWANCE_MS = 50


@dataclass
class ParseStats:
    rows: int = 0
    clamped: int = 0


def parse_positions(
    stream: bytes | str | io.IOBase,
    layout: WardLayout,
    clock_offset_ms: int = 0,
    stats: ParseStats | None = None,
) -> list[PositionSample]:
    """Parse a positions CSV into samples sorted by time per entity.

    Timestamps are shifted by the stream's clock offset, out-of-bounds
    coordinates are clamped to the room (and counted in ``stats``), and yaw
    is normalized to [0, 360).
    """
    text = _as_text(stream)
    lines = text.splitlines()
    if not lines or lines[0].strip() != POSITIONS_HEADER:
        raise FormatError(f"positions header must be '{POSITIONS_HEADER}'")
    samples: list[PositionSample] = []
    last_t: dict[Role, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise FormatError(f"positions line {lineno}: expected 5 fields")
        try:
            t_ms = int(parts[0]) + clock_offset_ms
            entity = Role(parts[1])
            x_mm = float(int(parts[2]))
            y_mm = float(int(parts[3]))
            yaw = float(parts[4])
        except ValueError as exc:
            raise FormatError(f"positions line {lineno}: {exc}") from exc
        if not entity.wears_tag:
            raise FormatError(
                f"positions line {lineno}: {entity.value} is an untracked role"
            )
        prev = last_t.get(entity)
        if prev is not None and t_ms < prev - JITTER_ALLOWANCE_MS:
            raise NonMonotonicError(
                f"positions line {lineno}: {entity.value} went back "
                f"{prev - t_ms} ms (allowance {JITTER_ALLOWANCE_MS} ms)"
            )
        last_t[entity] = max(prev, t_ms) if prev is not None else t_ms
        if not layout.in_bounds(x_mm, y_mm):
            x_mm, y_mm = layout.clamp(x_mm, y_mm)
            if stats is not None:
                stats.clamped += 1
        samples.append(PositionSample(t_ms, entity, x_mm, y_mm, normalize_yaw(yaw)))
    samples.sort(key=lambda s: (s.t_ms, s.entity.value))
    if stats is not None:
        stats.rows += len(samples)
    return samples


def serialize_positions(samples: Iterable[PositionSample]) -> str:
    """Canonical CSV form: sorted by (t_ms, entity), yaw at one decimal."""
    rows = sorted(samples, key=lambda s: (s.t_ms, s.entity.value))
    out = [POSITIONS_HEADER]
    for s in rows:
        yaw = round(normalize_yaw(s.yaw_deg), 1) % 360.0
        out.append(f"{s.t_ms},{s.entity.value},{int(s.x_mm)},{int(s.y_mm)},{yaw:.1f}")
    return "\n".join(out) + "\n"


def parse_voice_jsonl(stream: bytes | str | io.IOBase, clock_offset_ms: int = 0) -> list[VoiceSegment]:
    text = _as_text(stream)
    segments: list[VoiceSegment] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            seg = VoiceSegment(
                entity=Role(obj["entity"]),
                from_ms=int(obj["from_ms"]) + clock_offset_ms,
                to_ms=int(obj["to_ms"]) + clock_offset_ms,
            )
        except InvalidSegmentError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"voice line {lineno}: {exc}") from exc
        segments.append(seg)
    return segments


def serialize_voice_jsonl(segments: Iterable[VoiceSegment]) -> str:
    rows = sorted(segments, key=lambda s: (s.entity.value, s.from_ms, s.to_ms))
    return "".join(
        json.dumps(
            {"entity": s.entity.value, "from_ms": s.from_ms, "to_ms": s.to_ms},
            sort_keys=True,
            separators=(",", ":"),
        )
        + "\n"
        for s in rows
    )


def parse_utterances_jsonl(
    stream: bytes | str | io.IOBase, clock_offset_ms: int = 0
) -> list[CodedUtterance]:
    text = _as_text(stream)
    utterances: list[CodedUtterance] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            code = obj.get("code")
            utt = CodedUtterance(
                entity=Role(obj["entity"]),
                window=TimeWindow(
                    int(obj["from_ms"]) + clock_offset_ms,
                    int(obj["to_ms"]) + clock_offset_ms,
                ),
                text=str(obj["text"]),
                code=CommCode(code) if code is not None else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"utterances line {lineno}: {exc}") from exc
        utterances.append(utt)
    utterances.sort(key=lambda u: (u.window.from_ms, u.entity.value))
    return utterances


def serialize_utterances_jsonl(utterances: Iterable[CodedUtterance]) -> str:
    rows = sorted(utterances, key=lambda u: (u.window.from_ms, u.entity.value))
    lines = []
    for u in rows:
        obj: dict = {
            "entity": u.entity.value,
            "from_ms": u.window.from_ms,
            "to_ms": u.window.to_ms,
            "text": u.text,
        }
        if u.code is not None:
            obj["code"] = u.code.value
        lines.append(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
    return "".join(lines)


def normalize_voice_segments(segments: Sequence[VoiceSegment]) -> list[VoiceSegment]:
    """Sort one entity's segments and union overlapping or adjacent ones."""
    if not segments:
        return []
    entity = segments[0].entity
    for seg in segments:
        if seg.entity != entity:
            raise InvalidSegmentError("normalize_voice_segments takes one entity")
    ordered = sorted(segments, key=lambda s: (s.from_ms, s.to_ms))
    merged: list[list[int]] = [[ordered[0].from_ms, ordered[0].to_ms]]
    for seg in ordered[1:]:
        if seg.from_ms <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], seg.to_ms)
        else:
            merged.append([seg.from_ms, seg.to_ms])
    return [VoiceSegment(entity, a, b) for a, b in merged]


def _as_text(stream: bytes | str | io.IOBase) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


# --- tick grid -------------------------------------------------------------
#
# Analytics run on a fixed grid anchored at t = 0 (default 10 Hz). A tick
# carries the last observation at or before it; observations older than the
# staleness cutoff leave the tick untracked.


def ticks_in_window(window: TimeWindow, tick_ms: int) -> range:
    """Grid tick times (multiples of tick_ms) falling inside the window."""
    first = -(-window.from_ms // tick_ms) * tick_ms  # ceil to the grid
    if first >= window.to_ms:
        return range(0, 0)
    count = (window.to_ms - 1 - first) // tick_ms + 1
    return range(first, first + count * tick_ms, tick_ms)


@dataclass(frozen=True)
class TrackPoint:
    x_mm: float
    y_mm: float
    yaw_deg: float


class ResampledTrack:
    """Last-observation-carried-forward view of one entity's samples."""

    def __init__(self, samples: Sequence[PositionSample], staleness_ms: int = 2000):
        self._times = [s.t_ms for s in samples]
        self._samples = list(samples)
        self._staleness = staleness_ms

    def at(self, t_ms: int) -> TrackPoint | None:
        """Position at a tick, or None when no fresh observation exists."""
        idx = _bisect_right(self._times, t_ms) - 1
        if idx < 0:
            return None
        s = self._samples[idx]
        if t_ms - s.t_ms > self._staleness:
            return None
        return TrackPoint(s.x_mm, s.y_mm, s.yaw_deg)


def _bisect_right(values: list[int], x: int) -> int:
    lo, hi = 0, len(values)
    while lo < hi:
        mid = (lo + hi) // 2
        if x < values[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def resample_tracks(
    positions: Sequence[PositionSample], staleness_ms: int = 2000
) -> dict[Role, ResampledTrack]:
    """Group samples per entity and wrap each in a LOCF track."""
    by_entity: dict[Role, list[PositionSample]] = {}
    for s in positions:
        by_entity.setdefault(s.entity, []).append(s)
    return {
        role: ResampledTrack(sorted(group, key=lambda s: s.t_ms), staleness_ms)
        for role, group in by_entity.items()
    }
