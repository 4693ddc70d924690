import pytest

from debriefkit.model import (
    CodedUtterance,
    CommCode,
    PositionSample,
    Role,
    SessionTimeline,
    TimeWindow,
    VoiceSegment,
    default_layout,
)
from debriefkit.store import Session


def make_session(
    positions=(),
    voice=(),
    utterances=(),
    end_ms=60_000,
    cast=None,
    layout=None,
    markers=None,
    session_id="test",
):
    """Assemble an in-memory Session without touching disk."""
    layout = layout or default_layout()
    markers = markers or {}
    by_entity = {}
    for seg in voice:
        by_entity.setdefault(seg.entity, []).append(seg)
    voice_map = {
        role: tuple(sorted(segs, key=lambda s: s.from_ms))
        for role, segs in by_entity.items()
    }
    if cast is None:
        cast = {p.entity for p in positions}
        cast.update(s.entity for s in voice)
        cast.update(u.entity for u in utterances)
    timeline = SessionTimeline(
        end_ms=end_ms,
        handover_ends_ms=markers.get("handover_ends_ms"),
        sn_enter_ms=markers.get("sn_enter_ms"),
        doctor_enter_ms=markers.get("doctor_enter_ms"),
    )
    return Session(
        session_id=session_id,
        timeline=timeline,
        layout=layout,
        positions=tuple(sorted(positions, key=lambda s: (s.t_ms, s.entity.value))),
        voice=voice_map,
        utterances=tuple(sorted(utterances, key=lambda u: u.window.from_ms)),
        cast=frozenset(cast),
    )


def track(entity, points, yaw=0.0):
    """Samples from (t_ms, x, y) triples with one fixed yaw."""
    return [PositionSample(t, entity, float(x), float(y), yaw) for t, x, y in points]


def dwell(entity, x, y, from_ms, to_ms, yaw=0.0, step_ms=100):
    """Stationary samples on the tick grid over [from_ms, to_ms)."""
    return [
        PositionSample(t, entity, float(x), float(y), yaw)
        for t in range(from_ms, to_ms, step_ms)
    ]


def utterance(entity, from_ms, to_ms, code, text="..."):
    return CodedUtterance(entity, TimeWindow(from_ms, to_ms), text, code)


@pytest.fixture
def layout():
    return default_layout()


# re-exported for terser test modules
__all__ = [
    "make_session",
    "track",
    "dwell",
    "utterance",
    "Role",
    "CommCode",
    "VoiceSegment",
]
