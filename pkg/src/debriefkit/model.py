"""Shared domain vocabulary: roles, ward geometry, timeline, windows, codes.

Everything here is an immutable value object; instances are safe to share
between threads and to use as dict keys where hashable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Mapping

from .errors import (
    InvalidSegmentError,
    LayoutError,
    PhaseUnsetError,
    TimelineError,
    WindowError,
)


class Role(str, Enum):
    """Participants of a clinical scenario."""

    PN1 = "PN1"
    PN2 = "PN2"
    SN1 = "SN1"
    SN2 = "SN2"
    DOCTOR = "DOCTOR"
    PATIENT = "PATIENT"
    RELATIVE = "RELATIVE"

    @property
    def team_member(self) -> bool:
        return self in _TEAM_ROLES

    @property
    def wears_tag(self) -> bool:
        """Whether this role may carry a positioning tag."""
        return self in _TAGGED_ROLES


_TEAM_ROLES = frozenset({Role.PN1, Role.PN2, Role.SN1, Role.SN2})
_TAGGED_ROLES = frozenset({Role.PN1, Role.PN2, Role.SN1, Role.SN2, Role.DOCTOR})

TEAM_ROLES: tuple[Role, ...] = (Role.PN1, Role.PN2, Role.SN1, Role.SN2)

# Default display colors. The nurse colors follow the sociogram legend
# (PN1 red, PN2 blue, SN1 green, SN2 yellow); the rest are our defaults.
DEFAULT_COLORS: dict[Role, str] = {
    Role.PN1: "red",
    Role.PN2: "blue",
    Role.SN1: "green",
    Role.SN2: "yellow",
    Role.DOCTOR: "purple",
    Role.PATIENT: "grey",
    Role.RELATIVE: "brown",
}


def entity_color(role: Role, overrides: Mapping[Role, str] | None = None) -> str:
    """Display color for a role; total over all roles, configurable per session."""
    if overrides and role in overrides:
        return overrides[role]
    return DEFAULT_COLORS[role]


class Phase(str, Enum):
    """Timeline filter options of the debrief view."""

    ALL = "ALL"
    P1_HANDOVER_ENDS = "P1_HANDOVER_ENDS"
    P2_SN_ENTER = "P2_SN_ENTER"
    P3_DOCTOR_ENTER = "P3_DOCTOR_ENTER"


# Named phases in chronological order (ALL excluded).
NAMED_PHASES: tuple[Phase, ...] = (
    Phase.P1_HANDOVER_ENDS,
    Phase.P2_SN_ENTER,
    Phase.P3_DOCTOR_ENTER,
)


@dataclass(frozen=True, order=True)
class TimeWindow:
    """Half-open interval [from_ms, to_ms) in session-relative milliseconds."""

    from_ms: int
    to_ms: int

    def __post_init__(self) -> None:
        if self.from_ms < 0 or self.to_ms < self.from_ms:
            raise WindowError(f"invalid window [{self.from_ms}, {self.to_ms})")

    @property
    def duration_ms(self) -> int:
        return self.to_ms - self.from_ms

    def is_empty(self) -> bool:
        return self.to_ms <= self.from_ms

    def contains(self, t_ms: int) -> bool:
        return self.from_ms <= t_ms < self.to_ms

    def overlap_ms(self, from_ms: int, to_ms: int) -> int:
        """Length of the intersection with [from_ms, to_ms)."""
        lo = max(self.from_ms, from_ms)
        hi = min(self.to_ms, to_ms)
        return max(0, hi - lo)

    def to_dict(self) -> dict[str, int]:
        return {"from_ms": self.from_ms, "to_ms": self.to_ms}


@dataclass(frozen=True)
class SessionTimeline:
    """Phase markers anchoring all window filtering. start is always 0."""

    end_ms: int
    handover_ends_ms: int | None = None
    sn_enter_ms: int | None = None
    doctor_enter_ms: int | None = None

    def __post_init__(self) -> None:
        if self.end_ms < 0:
            raise TimelineError(f"end_ms must be >= 0, got {self.end_ms}")
        markers = [self.handover_ends_ms, self.sn_enter_ms, self.doctor_enter_ms]
        # A later marker may not be set while an earlier one is unset.
        seen_unset = False
        for value in markers:
            if value is None:
                seen_unset = True
            elif seen_unset:
                raise TimelineError("later phase marker set before an earlier one")
        prev = 0
        for value in markers:
            if value is None:
                continue
            if value < prev:
                raise TimelineError("phase markers must be non-decreasing")
            prev = value
        if prev > self.end_ms:
            raise TimelineError("phase marker beyond session end")

    def marker_for(self, phase: Phase) -> int | None:
        if phase == Phase.P1_HANDOVER_ENDS:
            return self.handover_ends_ms
        if phase == Phase.P2_SN_ENTER:
            return self.sn_enter_ms
        if phase == Phase.P3_DOCTOR_ENTER:
            return self.doctor_enter_ms
        return 0 if phase == Phase.ALL else None

    def set_markers(self) -> list[tuple[Phase, int]]:
        out = []
        for phase in NAMED_PHASES:
            value = self.marker_for(phase)
            if value is not None:
                out.append((phase, value))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "start_ms": 0,
            "handover_ends_ms": self.handover_ends_ms,
            "sn_enter_ms": self.sn_enter_ms,
            "doctor_enter_ms": self.doctor_enter_ms,
            "end_ms": self.end_ms,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SessionTimeline":
        return cls(
            end_ms=int(data["end_ms"]),
            handover_ends_ms=_opt_int(data.get("handover_ends_ms")),
            sn_enter_ms=_opt_int(data.get("sn_enter_ms")),
            doctor_enter_ms=_opt_int(data.get("doctor_enter_ms")),
        )


def _opt_int(value: Any) -> int | None:
    return None if value is None else int(value)


def resolve_phase_window(timeline: SessionTimeline, phase: Phase) -> TimeWindow:
    """Window of a phase: from its marker to the next set marker or session end.

    ALL covers the whole session. The interval before "handover ends" is only
    reachable through a custom window.
    """
    if phase == Phase.ALL:
        return TimeWindow(0, timeline.end_ms)
    start = timeline.marker_for(phase)
    if start is None:
        raise PhaseUnsetError(f"phase {phase.value} was never tagged")
    idx = NAMED_PHASES.index(phase)
    end = timeline.end_ms
    for later in NAMED_PHASES[idx + 1 :]:
        marker = timeline.marker_for(later)
        if marker is not None:
            end = marker
            break
    return TimeWindow(start, end)


@dataclass(frozen=True)
class Bed:
    bed_id: int
    center_mm: tuple[float, float]
    radius_mm: float


@dataclass(frozen=True)
class WardLayout:
    """Ward room geometry: bounds, bed regions, fixed entities, render scale."""

    room_mm: tuple[float, float]
    beds: tuple[Bed, ...]
    primary_bed_id: int
    fixed_entities: Mapping[Role, tuple[float, float]] = field(default_factory=dict)
    image_px: tuple[int, int] = (1000, 800)
    mm_per_px: float = 10.0
    colors: Mapping[Role, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mm_per_px <= 0:
            raise LayoutError("mm_per_px must be > 0")
        by_id = {bed.bed_id: bed for bed in self.beds}
        if self.primary_bed_id not in by_id:
            raise LayoutError(f"primary bed {self.primary_bed_id} not in beds")
        w, h = self.room_mm
        for bed in self.beds:
            x, y = bed.center_mm
            if not (0 <= x <= w and 0 <= y <= h):
                raise LayoutError(f"bed {bed.bed_id} center outside room bounds")
            if bed.radius_mm <= 0:
                raise LayoutError(f"bed {bed.bed_id} radius must be > 0")
        primary = by_id[self.primary_bed_id]
        for bed in self.beds:
            if bed.bed_id == self.primary_bed_id:
                continue
            dx = bed.center_mm[0] - primary.center_mm[0]
            dy = bed.center_mm[1] - primary.center_mm[1]
            if dx * dx + dy * dy <= (bed.radius_mm + primary.radius_mm) ** 2:
                raise LayoutError(
                    f"bed {bed.bed_id} region overlaps the primary bed region"
                )

    @property
    def primary_bed(self) -> Bed:
        for bed in self.beds:
            if bed.bed_id == self.primary_bed_id:
                return bed
        raise LayoutError("primary bed missing")  # unreachable after validation

    def secondary_beds(self) -> tuple[Bed, ...]:
        return tuple(b for b in self.beds if b.bed_id != self.primary_bed_id)

    def clamp(self, x_mm: float, y_mm: float) -> tuple[float, float]:
        w, h = self.room_mm
        return (min(max(x_mm, 0.0), w), min(max(y_mm, 0.0), h))

    def in_bounds(self, x_mm: float, y_mm: float) -> bool:
        w, h = self.room_mm
        return 0 <= x_mm <= w and 0 <= y_mm <= h

    def color_of(self, role: Role) -> str:
        return entity_color(role, self.colors)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "room_mm": [self.room_mm[0], self.room_mm[1]],
            "beds": [
                {
                    "id": bed.bed_id,
                    "center_mm": [bed.center_mm[0], bed.center_mm[1]],
                    "radius_mm": bed.radius_mm,
                }
                for bed in self.beds
            ],
            "primary_bed_id": self.primary_bed_id,
            "fixed_entities": {
                role.value: [pos[0], pos[1]]
                for role, pos in sorted(self.fixed_entities.items())
            },
            "image_px": [self.image_px[0], self.image_px[1]],
            "mm_per_px": self.mm_per_px,
        }
        if self.colors:
            data["colors"] = {r.value: c for r, c in sorted(self.colors.items())}
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WardLayout":
        try:
            beds = tuple(
                Bed(
                    bed_id=int(b["id"]),
                    center_mm=(float(b["center_mm"][0]), float(b["center_mm"][1])),
                    radius_mm=float(b["radius_mm"]),
                )
                for b in data["beds"]
            )
            return cls(
                room_mm=(float(data["room_mm"][0]), float(data["room_mm"][1])),
                beds=beds,
                primary_bed_id=int(data["primary_bed_id"]),
                fixed_entities={
                    Role(name): (float(pos[0]), float(pos[1]))
                    for name, pos in data.get("fixed_entities", {}).items()
                },
                image_px=tuple(int(v) for v in data.get("image_px", (1000, 800))),
                mm_per_px=float(data.get("mm_per_px", 10.0)),
                colors={
                    Role(name): str(c) for name, c in data.get("colors", {}).items()
                },
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise LayoutError(f"malformed layout: {exc}") from exc


def default_layout() -> WardLayout:
    """Four-bed ward used by the simulator and as the fallback session layout.

    Beds 1-3 line the north wall; bed 4 (the deteriorating patient) sits by
    the south wall with the patient fixed in it and a relative at the bedside.
    """
    return WardLayout(
        room_mm=(10000.0, 8000.0),
        beds=(
            Bed(1, (1700.0, 6800.0), 1100.0),
            Bed(2, (5000.0, 6800.0), 1100.0),
            Bed(3, (8300.0, 6800.0), 1100.0),
            Bed(4, (5000.0, 1700.0), 1300.0),
        ),
        primary_bed_id=4,
        fixed_entities={
            Role.PATIENT: (5000.0, 1200.0),
            Role.RELATIVE: (6800.0, 1400.0),
        },
        image_px=(1000, 800),
        mm_per_px=10.0,
    )


@dataclass(frozen=True)
class PositionSample:
    """One positioning reading: location plus body orientation.

    yaw_deg is in [0, 360), 0 facing the +x axis, counterclockwise positive.
    """

    t_ms: int
    entity: Role
    x_mm: float
    y_mm: float
    yaw_deg: float


def normalize_yaw(yaw_deg: float) -> float:
    yaw = yaw_deg % 360.0
    return yaw if yaw >= 0 else yaw + 360.0


@dataclass(frozen=True)
class VoiceSegment:
    """Half-open interval of detected speech for one entity."""

    entity: Role
    from_ms: int
    to_ms: int

    def __post_init__(self) -> None:
        if self.from_ms >= self.to_ms:
            raise InvalidSegmentError(
                f"voice segment [{self.from_ms}, {self.to_ms}) is empty or inverted"
            )


class CommCode(str, Enum):
    """The six communication behaviours used to code team dialogue."""

    ACKNOWLEDGING = "ACKNOWLEDGING"
    SHARING_INFORMATION = "SHARING_INFORMATION"
    QUESTIONING = "QUESTIONING"
    TASK_ALLOCATION = "TASK_ALLOCATION"
    HANDOVER = "HANDOVER"
    ESCALATION = "ESCALATION"


@dataclass(frozen=True)
class CodedUtterance:
    """Utterance text over a time window; code may be absent until coded."""

    entity: Role
    window: TimeWindow
    text: str
    code: CommCode | None = None

    def __post_init__(self) -> None:
        if self.window.is_empty():
            raise WindowError("utterance window must have from < to")
        if not self.text:
            raise WindowError("utterance text must be non-empty")


@dataclass(frozen=True)
class AnalyticsParams:
    """Tunable analytics parameters; stamped into every payload for provenance."""

    tick_ms: int = 100
    staleness_ms: int = 2000
    speed_threshold_mm_s: float = 600.0
    hex_radius_mm: float = 500.0
    dist_face_mm: float = 1500.0
    dist_side_mm: float = 750.0
    angle_tol_deg: float = 45.0
    comm_window_size: int = 2
    vad_frame_ms: int = 30
    vad_energy_ratio: float = 4.0
    vad_min_segment_ms: int = 200
    vad_merge_gap_ms: int = 300

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **kwargs: Any) -> "AnalyticsParams":
        data = self.to_dict()
        data.update(kwargs)
        return AnalyticsParams(**data)


DEFAULT_PARAMS = AnalyticsParams()

ENGINE_VERSION = "0.1.0"


def canonical_json(obj: Any) -> bytes:
    """Stable byte serialization: sorted keys, no whitespace drift."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def canonical_json_pretty(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)
