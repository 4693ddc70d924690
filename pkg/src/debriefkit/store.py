"""On-disk session store: stream files plus a manifest, recording then sealed.

Directory layout for one session::

    <session_dir>/
        manifest.json       session id, status, timeline markers, inventory
        layout.json         ward geometry
        positions.csv       canonical positioning stream
        voice.jsonl         voice segments (uploaded or VAD output)
        utterances.jsonl    transcript lines, coded or not
        audio_<ROLE>.wav    raw audio kept when uploaded
        annotations.jsonl   append-only tag/annotation log
        interactions.jsonl  append-only debrief interaction log

Sealed sessions are append-closed; analytics run on sealed sessions or on an
explicitly captured live snapshot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from . import ingest
from .errors import AlreadySealedError, FormatError, NotSealedError
from .model import (
    CodedUtterance,
    PositionSample,
    Role,
    SessionTimeline,
    TimeWindow,
    VoiceSegment,
    WardLayout,
    default_layout,
)

MANIFEST_NAME = "manifest.json"
LAYOUT_NAME = "layout.json"
POSITIONS_NAME = "positions.csv"
VOICE_NAME = "voice.jsonl"
UTTERANCES_NAME = "utterances.jsonl"
ANNOTATIONS_NAME = "annotations.jsonl"
INTERACTIONS_NAME = "interactions.jsonl"

STATUS_RECORDING = "recording"
STATUS_SEALED = "sealed"

MARKER_KEYS = ("handover_ends_ms", "sn_enter_ms", "doctor_enter_ms")


@dataclass(frozen=True)
class Session:
    """Immutable view of one session's streams, for analytics."""

    session_id: str
    timeline: SessionTimeline
    layout: WardLayout
    positions: tuple[PositionSample, ...]
    voice: Mapping[Role, tuple[VoiceSegment, ...]]
    utterances: tuple[CodedUtterance, ...]
    cast: frozenset[Role]

    @property
    def team_members(self) -> tuple[Role, ...]:
        return tuple(
            sorted((r for r in self.cast if r.team_member), key=lambda r: r.value)
        )

    def tracked_entities(self) -> tuple[Role, ...]:
        seen = {s.entity for s in self.positions}
        return tuple(sorted(seen, key=lambda r: r.value))

    def voice_of(self, entity: Role) -> tuple[VoiceSegment, ...]:
        return self.voice.get(entity, ())


@dataclass(frozen=True)
class SessionSummary:
    session_id: str
    end_ms: int
    stream_rows: Mapping[str, int]
    clamped: int
    truncated: Mapping[str, int]


class SessionStore:
    """One writable session directory; a single writer appends per stream."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        manifest = self._read_manifest()
        self.session_id: str = manifest["session_id"]
        self._status: str = manifest.get("status", STATUS_RECORDING)
        self._markers: dict[str, int] = {
            k: v for k, v in manifest.get("markers", {}).items() if v is not None
        }
        self._declared_end: int | None = manifest.get("end_ms")
        self._declared_cast: set[Role] = {Role(r) for r in manifest.get("cast", [])}
        self._counters: dict[str, int] = dict(manifest.get("counters", {}))
        self.layout = self._read_layout()
        self._positions_cache: list[PositionSample] | None = None
        self._voice_cache: list[VoiceSegment] | None = None
        self._utterances_cache: list[CodedUtterance] | None = None

    # -- creation / loading ---------------------------------------------------

    @classmethod
    def create(
        cls,
        directory: str | Path,
        session_id: str,
        layout: WardLayout | None = None,
        end_ms: int | None = None,
    ) -> "SessionStore":
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if (directory / MANIFEST_NAME).exists():
            raise FormatError(f"session already exists at {directory}")
        layout = layout or default_layout()
        (directory / LAYOUT_NAME).write_text(
            json.dumps(layout.to_dict(), indent=2, sort_keys=True) + "\n"
        )
        manifest = {
            "session_id": session_id,
            "status": STATUS_RECORDING,
            "markers": {},
            "end_ms": end_ms,
            "cast": [],
            "streams": {},
            "counters": {},
        }
        (directory / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
        return cls(directory)

    @classmethod
    def open(cls, directory: str | Path) -> "SessionStore":
        return cls(directory)

    def _read_manifest(self) -> dict[str, Any]:
        path = self.directory / MANIFEST_NAME
        if not path.exists():
            raise FormatError(f"no manifest at {path}")
        return json.loads(path.read_text())

    def _read_layout(self) -> WardLayout:
        path = self.directory / LAYOUT_NAME
        if path.exists():
            return WardLayout.from_dict(json.loads(path.read_text()))
        return default_layout()

    # -- status -----------------------------------------------------------------

    @property
    def status(self) -> str:
        return self._status

    @property
    def sealed(self) -> bool:
        return self._status == STATUS_SEALED

    def _require_recording(self) -> None:
        if self.sealed:
            raise AlreadySealedError(f"session {self.session_id} is sealed")

    # -- stream ingestion ---------------------------------------------------------

    def add_positions(self, data: bytes | str, clock_offset_ms: int = 0) -> int:
        """Parse and merge a positions upload; returns rows accepted."""
        self._require_recording()
        stats = ingest.ParseStats()
        new = ingest.parse_positions(data, self.layout, clock_offset_ms, stats)
        merged = self.positions() + new
        merged.sort(key=lambda s: (s.t_ms, s.entity.value))
        self._positions_cache = merged
        (self.directory / POSITIONS_NAME).write_text(ingest.serialize_positions(merged))
        self._counters["position_clamps"] = (
            self._counters.get("position_clamps", 0) + stats.clamped
        )
        self._write_manifest()
        return stats.rows

    def add_voice(self, data: bytes | str, clock_offset_ms: int = 0) -> int:
        self._require_recording()
        new = ingest.parse_voice_jsonl(data, clock_offset_ms)
        return self.add_voice_segments(new)

    def add_voice_segments(self, segments: Iterable[VoiceSegment]) -> int:
        self._require_recording()
        new = list(segments)
        merged = self._raw_voice() + new
        self._voice_cache = merged
        (self.directory / VOICE_NAME).write_text(ingest.serialize_voice_jsonl(merged))
        self._write_manifest()
        return len(new)

    def add_utterances(self, data: bytes | str, clock_offset_ms: int = 0) -> int:
        self._require_recording()
        new = ingest.parse_utterances_jsonl(data, clock_offset_ms)
        merged = self.utterances() + new
        merged.sort(key=lambda u: (u.window.from_ms, u.entity.value))
        self._utterances_cache = merged
        (self.directory / UTTERANCES_NAME).write_text(
            ingest.serialize_utterances_jsonl(merged)
        )
        self._write_manifest()
        return len(new)

    def add_audio(self, entity: Role, wav_bytes: bytes) -> Path:
        """Store a raw WAV alongside the streams; caller decides about VAD."""
        self._require_recording()
        path = self.directory / f"audio_{entity.value}.wav"
        path.write_bytes(wav_bytes)
        return path

    def declare_cast(self, roles: Iterable[Role]) -> None:
        self._require_recording()
        self._declared_cast.update(roles)
        self._write_manifest()

    # -- stream access -------------------------------------------------------------

    def positions(self) -> list[PositionSample]:
        if self._positions_cache is None:
            path = self.directory / POSITIONS_NAME
            if not path.exists():
                self._positions_cache = []
            else:
                self._positions_cache = ingest.parse_positions(
                    path.read_text(), self.layout
                )
        return list(self._positions_cache)

    def _raw_voice(self) -> list[VoiceSegment]:
        if self._voice_cache is None:
            path = self.directory / VOICE_NAME
            if not path.exists():
                self._voice_cache = []
            else:
                self._voice_cache = ingest.parse_voice_jsonl(path.read_text())
        return list(self._voice_cache)

    def voice_by_entity(self) -> dict[Role, list[VoiceSegment]]:
        grouped: dict[Role, list[VoiceSegment]] = {}
        for seg in self._raw_voice():
            grouped.setdefault(seg.entity, []).append(seg)
        return {
            role: ingest.normalize_voice_segments(segs)
            for role, segs in grouped.items()
        }

    def utterances(self) -> list[CodedUtterance]:
        if self._utterances_cache is None:
            path = self.directory / UTTERANCES_NAME
            if not path.exists():
                self._utterances_cache = []
            else:
                self._utterances_cache = ingest.parse_utterances_jsonl(path.read_text())
        return list(self._utterances_cache)

    def annotations_path(self) -> Path:
        return self.directory / ANNOTATIONS_NAME

    def interactions_path(self) -> Path:
        return self.directory / INTERACTIONS_NAME

    # -- markers (kept in the manifest so the timeline survives restarts) --------

    def markers(self) -> dict[str, int]:
        return dict(self._markers)

    def set_marker(self, name: str, t_ms: int) -> None:
        self._require_recording()
        if name not in MARKER_KEYS:
            raise FormatError(f"unknown marker {name}")
        self._markers[name] = t_ms
        self._write_manifest()

    def declared_end_ms(self) -> int | None:
        return self._declared_end

    def observed_end_ms(self) -> int:
        """Largest timestamp across streams; used when no end was declared."""
        end = 0
        for s in self.positions():
            end = max(end, s.t_ms)
        for seg in self._raw_voice():
            end = max(end, seg.to_ms)
        for utt in self.utterances():
            end = max(end, utt.window.to_ms)
        for value in self._markers.values():
            end = max(end, value)
        return end

    def _current_cast(self) -> frozenset[Role]:
        cast = set(self._declared_cast)
        cast.update(s.entity for s in self.positions())
        cast.update(seg.entity for seg in self._raw_voice())
        cast.update(u.entity for u in self.utterances())
        return frozenset(cast)

    def _build_timeline(self, end_ms: int) -> SessionTimeline:
        return SessionTimeline(
            end_ms=end_ms,
            handover_ends_ms=self._markers.get("handover_ends_ms"),
            sn_enter_ms=self._markers.get("sn_enter_ms"),
            doctor_enter_ms=self._markers.get("doctor_enter_ms"),
        )

    # -- sealing and snapshots ------------------------------------------------------

    def seal(self, timeline: SessionTimeline | None = None, coder=None) -> SessionSummary:
        """Close the session for writing and fix the timeline.

        Stream rows beyond the timeline end are truncated (and counted).
        When a coder is given, utterances missing a code are coded in place.
        """
        self._require_recording()
        if timeline is None:
            end = self._declared_end
            if end is None:
                end = self.observed_end_ms()
            timeline = self._build_timeline(end)
        end_ms = timeline.end_ms

        truncated: dict[str, int] = {}

        positions = self.positions()
        kept_positions = [s for s in positions if s.t_ms <= end_ms]
        truncated["positions"] = len(positions) - len(kept_positions)
        self._positions_cache = kept_positions
        (self.directory / POSITIONS_NAME).write_text(
            ingest.serialize_positions(kept_positions)
        )

        voice = self._raw_voice()
        kept_voice: list[VoiceSegment] = []
        clipped = 0
        for seg in voice:
            if seg.from_ms >= end_ms:
                clipped += 1
                continue
            if seg.to_ms > end_ms:
                clipped += 1
                seg = VoiceSegment(seg.entity, seg.from_ms, end_ms)
            kept_voice.append(seg)
        truncated["voice"] = clipped
        self._voice_cache = kept_voice
        (self.directory / VOICE_NAME).write_text(
            ingest.serialize_voice_jsonl(kept_voice)
        )

        utterances = self.utterances()
        kept_utts: list[CodedUtterance] = []
        cut = 0
        for utt in utterances:
            if utt.window.from_ms >= end_ms:
                cut += 1
                continue
            if utt.window.to_ms > end_ms:
                cut += 1
                utt = CodedUtterance(
                    utt.entity, TimeWindow(utt.window.from_ms, end_ms), utt.text, utt.code
                )
            if coder is not None and utt.code is None:
                utt = CodedUtterance(utt.entity, utt.window, utt.text, coder.code(utt.text))
            kept_utts.append(utt)
        truncated["utterances"] = cut
        self._utterances_cache = kept_utts
        (self.directory / UTTERANCES_NAME).write_text(
            ingest.serialize_utterances_jsonl(kept_utts)
        )

        self._markers = {
            key: value
            for key, value in (
                ("handover_ends_ms", timeline.handover_ends_ms),
                ("sn_enter_ms", timeline.sn_enter_ms),
                ("doctor_enter_ms", timeline.doctor_enter_ms),
            )
            if value is not None
        }
        self._declared_end = end_ms
        self._status = STATUS_SEALED
        self._counters["truncated_positions"] = truncated["positions"]
        self._counters["truncated_voice"] = truncated["voice"]
        self._counters["truncated_utterances"] = truncated["utterances"]
        stream_rows = {
            "positions": len(kept_positions),
            "voice": len(kept_voice),
            "utterances": len(kept_utts),
        }
        self._write_manifest(streams=stream_rows)
        return SessionSummary(
            session_id=self.session_id,
            end_ms=end_ms,
            stream_rows=stream_rows,
            clamped=self._counters.get("position_clamps", 0),
            truncated=truncated,
        )

    def snapshot(self, end_ms: int | None = None) -> Session:
        """Atomically capture the current streams as an immutable Session."""
        if end_ms is None:
            end_ms = self._declared_end
        if end_ms is None:
            end_ms = self.observed_end_ms()
        timeline = self._build_timeline(end_ms)
        voice = {
            role: tuple(segs) for role, segs in sorted(self.voice_by_entity().items())
        }
        return Session(
            session_id=self.session_id,
            timeline=timeline,
            layout=self.layout,
            positions=tuple(self.positions()),
            voice=voice,
            utterances=tuple(self.utterances()),
            cast=self._current_cast(),
        )

    def load_sealed(self) -> Session:
        if not self.sealed:
            raise NotSealedError(
                f"session {self.session_id} is still recording; "
                "seal it or take an explicit snapshot"
            )
        return self.snapshot()

    # -- manifest ----------------------------------------------------------------------

    def _write_manifest(self, streams: Mapping[str, int] | None = None) -> None:
        manifest = {
            "session_id": self.session_id,
            "status": self._status,
            "markers": self._markers,
            "end_ms": self._declared_end,
            "cast": sorted(r.value for r in self._current_cast()),
            "streams": dict(streams)
            if streams is not None
            else {
                "positions": len(self.positions()),
                "voice": len(self._raw_voice()),
                "utterances": len(self.utterances()),
            },
            "counters": self._counters,
        }
        (self.directory / MANIFEST_NAME).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )


def seal_session(
    store: SessionStore, timeline: SessionTimeline, coder=None
) -> SessionSummary:
    """Seal a recording store against a finished timeline."""
    return store.seal(timeline, coder=coder)
