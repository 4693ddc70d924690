"""Spatial analytics: team prioritisation behaviours and the hexbin ward map.

Both run over the fixed tick grid (anchored at t = 0) so that results over a
tick-aligned partition of a window add up exactly to the whole-window result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

from .ingest import ResampledTrack, TrackPoint, resample_tracks, ticks_in_window
from .interaction import detect_f_formations
from .model import (
    DEFAULT_PARAMS,
    ENGINE_VERSION,
    AnalyticsParams,
    Role,
    TimeWindow,
    VoiceSegment,
    WardLayout,
)
from .store import Session


class MemberState(str, Enum):
    """Per-member, per-tick spatial state."""

    AT_PRIMARY = "AT_PRIMARY"
    AT_SECONDARY = "AT_SECONDARY"
    TRANSITIONING = "TRANSITIONING"
    TEAM_DISCUSSION_CANDIDATE = "TEAM_DISCUSSION_CANDIDATE"
    OTHER = "OTHER"
    UNTRACKED = "UNTRACKED"


class Behavior(str, Enum):
    """Team prioritisation behaviours shown in the priority chart."""

    TOGETHER_PRIMARY = "TOGETHER_PRIMARY"
    TOGETHER_SECONDARY = "TOGETHER_SECONDARY"
    INDIVIDUAL_PRIMARY = "INDIVIDUAL_PRIMARY"
    INDIVIDUAL_SECONDARY = "INDIVIDUAL_SECONDARY"
    TRANSITIONS = "TRANSITIONS"
    TEAM_DISCUSSION = "TEAM_DISCUSSION"
    UNCLASSIFIED = "UNCLASSIFIED"


# Display wording for the chart, kept with the behaviours so every frontend
# shows the same labels.
BEHAVIOR_LABELS: dict[Behavior, str] = {
    Behavior.TOGETHER_PRIMARY: "working together for the main patient",
    Behavior.TOGETHER_SECONDARY: "working together on non-critical tasks",
    Behavior.INDIVIDUAL_PRIMARY: "working individually for the main patient",
    Behavior.INDIVIDUAL_SECONDARY: "working individually on non-critical tasks",
    Behavior.TRANSITIONS: "transitions between beds",
    Behavior.TEAM_DISCUSSION: "engaging in team discussions",
    Behavior.UNCLASSIFIED: "unclassified",
}


def classify_member_tick(
    position: TrackPoint | None,
    prev_position: TrackPoint | None,
    layout: WardLayout,
    speed_threshold_mm_s: float = 600.0,
    tick_ms: int = 100,
) -> MemberState:
    """Spatial state of one member at one tick.

    Bed membership is Euclidean distance to the bed center; the primary bed
    wins ties. Movement faster than the threshold (measured against the
    previous tick) is a transition. Total: always returns a state.
    """
    if position is None:
        return MemberState.UNTRACKED
    x, y = position.x_mm, position.y_mm
    primary = layout.primary_bed
    if _within(x, y, primary.center_mm, primary.radius_mm):
        return MemberState.AT_PRIMARY
    for bed in layout.secondary_beds():
        if _within(x, y, bed.center_mm, bed.radius_mm):
            return MemberState.AT_SECONDARY
    if prev_position is not None:
        dx = x - prev_position.x_mm
        dy = y - prev_position.y_mm
        limit = speed_threshold_mm_s * tick_ms / 1000.0
        if dx * dx + dy * dy > limit * limit:
            return MemberState.TRANSITIONING
    return MemberState.TEAM_DISCUSSION_CANDIDATE


def _within(x: float, y: float, center: tuple[float, float], radius: float) -> bool:
    dx = x - center[0]
    dy = y - center[1]
    return dx * dx + dy * dy <= radius * radius


@dataclass(frozen=True)
class PriorityBreakdown:
    """Fractions of team member-ticks spent in each behaviour."""

    fractions: Mapping[Behavior, float]
    tick_count: int
    member_ticks: int
    window: TimeWindow
    empty: bool
    params: AnalyticsParams = DEFAULT_PARAMS

    def to_dict(self) -> dict[str, Any]:
        return {
            "viz": "priority",
            "window": self.window.to_dict(),
            "fractions": {b.value: self.fractions[b] for b in Behavior},
            "labels": {b.value: BEHAVIOR_LABELS[b] for b in Behavior},
            "tick_count": self.tick_count,
            "member_ticks": self.member_ticks,
            "empty": self.empty,
            "params": self.params.to_dict(),
            "engine_version": ENGINE_VERSION,
        }


def member_states_at(
    tracks: Mapping[Role, ResampledTrack],
    members: Sequence[Role],
    layout: WardLayout,
    t_ms: int,
    params: AnalyticsParams,
) -> dict[Role, MemberState]:
    """States for all members at one tick, with the team-level resolution:
    discussion candidates that pair up in an f-formation stay candidates,
    lone candidates become OTHER."""
    current: dict[Role, TrackPoint | None] = {}
    states: dict[Role, MemberState] = {}
    for member in members:
        track = tracks.get(member)
        pos = track.at(t_ms) if track is not None else None
        prev = track.at(t_ms - params.tick_ms) if track is not None else None
        current[member] = pos
        states[member] = classify_member_tick(
            pos, prev, layout, params.speed_threshold_mm_s, params.tick_ms
        )
    candidates = [m for m, s in states.items() if s == MemberState.TEAM_DISCUSSION_CANDIDATE]
    if candidates:
        in_discussion = _discussing(candidates, current, params)
        for member in candidates:
            if member not in in_discussion:
                states[member] = MemberState.OTHER
    return states


def _discussing(
    candidates: Sequence[Role],
    positions: Mapping[Role, TrackPoint | None],
    params: AnalyticsParams,
) -> set[Role]:
    if len(candidates) < 2:
        return set()
    snapshot = {
        m: (positions[m].x_mm, positions[m].y_mm, positions[m].yaw_deg)
        for m in candidates
    }
    pairs = detect_f_formations(
        snapshot,
        layout=None,
        dist_face_mm=params.dist_face_mm,
        dist_side_mm=params.dist_side_mm,
        angle_tol_deg=params.angle_tol_deg,
    )
    out: set[Role] = set()
    for pair in pairs:
        out.add(pair.a)
        out.add(pair.b)
    return out


def compute_priority_breakdown(
    session: Session,
    window: TimeWindow,
    layout: WardLayout | None = None,
    params: AnalyticsParams = DEFAULT_PARAMS,
) -> PriorityBreakdown:
    """Tally member-ticks into the seven behaviours over a window."""
    layout = layout or session.layout
    members = session.team_members
    ticks = ticks_in_window(window, params.tick_ms)
    tick_count = len(ticks)
    counts = {b: 0 for b in Behavior}
    member_ticks = tick_count * len(members)
    if member_ticks == 0:
        return PriorityBreakdown(
            fractions={b: 0.0 for b in Behavior},
            tick_count=tick_count,
            member_ticks=0,
            window=window,
            empty=True,
            params=params,
        )
    tracks = resample_tracks(session.positions, params.staleness_ms)
    for t in ticks:
        states = member_states_at(tracks, members, layout, t, params)
        at_primary = [m for m, s in states.items() if s == MemberState.AT_PRIMARY]
        at_secondary = [m for m, s in states.items() if s == MemberState.AT_SECONDARY]
        for member, state in states.items():
            if state == MemberState.AT_PRIMARY:
                together = len(at_primary) >= 2
                counts[Behavior.TOGETHER_PRIMARY if together else Behavior.INDIVIDUAL_PRIMARY] += 1
            elif state == MemberState.AT_SECONDARY:
                together = len(at_secondary) >= 2
                counts[Behavior.TOGETHER_SECONDARY if together else Behavior.INDIVIDUAL_SECONDARY] += 1
            elif state == MemberState.TRANSITIONING:
                counts[Behavior.TRANSITIONS] += 1
            elif state == MemberState.TEAM_DISCUSSION_CANDIDATE:
                counts[Behavior.TEAM_DISCUSSION] += 1
            else:  # OTHER or UNTRACKED
                counts[Behavior.UNCLASSIFIED] += 1
    fractions = {b: counts[b] / member_ticks for b in Behavior}
    return PriorityBreakdown(
        fractions=fractions,
        tick_count=tick_count,
        member_ticks=member_ticks,
        window=window,
        empty=False,
        params=params,
    )


# --- hexbin ward map ---------------------------------------------------------

SQRT3 = math.sqrt(3.0)
_SQRT3_OVER_3 = SQRT3 / 3.0
_ONE_THIRD = 1.0 / 3.0
_TWO_THIRDS = 2.0 / 3.0


def hex_of_point(x_mm: float, y_mm: float, hex_radius_mm: float) -> tuple[int, int]:
    """Axial (q, r) cell of a point on a pointy-top hex grid, origin at (0, 0).

    Fractional axial transform followed by cube rounding.
    """
    qf = (_SQRT3_OVER_3 * x_mm - _ONE_THIRD * y_mm) / hex_radius_mm
    rf = (_TWO_THIRDS * y_mm) / hex_radius_mm
    return _cube_round(qf, rf)


def _cube_round(qf: float, rf: float) -> tuple[int, int]:
    xf, zf = qf, rf
    yf = -xf - zf
    rx, ry, rz = round(xf), round(yf), round(zf)
    dx, dy, dz = abs(rx - xf), abs(ry - yf), abs(rz - zf)
    if dx > dy and dx > dz:
        rx = -ry - rz
    elif dy > dz:
        ry = -rx - rz
    else:
        rz = -rx - ry
    return int(rx), int(rz)


def hex_center(q: int, r: int, hex_radius_mm: float) -> tuple[float, float]:
    x = hex_radius_mm * (SQRT3 * q + SQRT3 / 2.0 * r)
    y = hex_radius_mm * 1.5 * r
    return x, y


@dataclass(frozen=True)
class HexCell:
    entity: Role
    q: int
    r: int
    sample_count: int
    voice_fraction: float
    filled: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "entity": self.entity.value,
            "q": self.q,
            "r": self.r,
            "sample_count": self.sample_count,
            "voice_fraction": self.voice_fraction,
            "filled": self.filled,
        }


@dataclass(frozen=True)
class WardMap:
    hex_radius_mm: float
    cells: tuple[HexCell, ...]
    window: TimeWindow
    params: AnalyticsParams = DEFAULT_PARAMS

    def to_dict(self) -> dict[str, Any]:
        return {
            "viz": "wardmap",
            "window": self.window.to_dict(),
            "hex_radius_mm": self.hex_radius_mm,
            "cells": [c.to_dict() for c in self.cells],
            "params": self.params.to_dict(),
            "engine_version": ENGINE_VERSION,
        }


class _VoicedLookup:
    """Is a timestamp inside any of an entity's (disjoint, sorted) segments?"""

    def __init__(self, segments: Sequence[VoiceSegment]):
        self.starts = [s.from_ms for s in segments]
        self.ends = [s.to_ms for s in segments]

    def voiced(self, t_ms: int) -> bool:
        lo, hi = 0, len(self.starts)
        while lo < hi:
            mid = (lo + hi) // 2
            if t_ms < self.starts[mid]:
                hi = mid
            else:
                lo = mid + 1
        idx = lo - 1
        return idx >= 0 and t_ms < self.ends[idx]


def compute_ward_map(
    session: Session,
    window: TimeWindow,
    layout: WardLayout | None = None,
    hex_radius_mm: float | None = None,
    params: AnalyticsParams = DEFAULT_PARAMS,
) -> WardMap:
    """Hexbin of tracked ticks per entity with a speaking-majority fill flag."""
    radius = hex_radius_mm if hex_radius_mm is not None else params.hex_radius_mm
    tracks = resample_tracks(session.positions, params.staleness_ms)
    ticks = ticks_in_window(window, params.tick_ms)
    cells: dict[tuple[Role, int, int], list[int]] = {}
    for entity in session.tracked_entities():
        track = tracks[entity]
        lookup = _VoicedLookup(session.voice_of(entity))
        for t in ticks:
            pos = track.at(t)
            if pos is None:
                continue
            q, r = hex_of_point(pos.x_mm, pos.y_mm, radius)
            bucket = cells.setdefault((entity, q, r), [0, 0])
            bucket[0] += 1
            if lookup.voiced(t):
                bucket[1] += 1
    out = []
    for (entity, q, r), (count, voiced) in sorted(
        cells.items(), key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2])
    ):
        fraction = voiced / count
        out.append(
            HexCell(
                entity=entity,
                q=q,
                r=r,
                sample_count=count,
                voice_fraction=fraction,
                filled=fraction > 0.5,
            )
        )
    return WardMap(hex_radius_mm=radius, cells=tuple(out), window=window, params=params)
