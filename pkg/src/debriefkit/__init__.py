"""debriefkit: analytics engine and debrief server for team simulation sessions."""

from .model import (
    AnalyticsParams,
    CommCode,
    Phase,
    PositionSample,
    Role,
    SessionTimeline,
    TimeWindow,
    VoiceSegment,
    WardLayout,
    default_layout,
    entity_color,
    resolve_phase_window,
)
from .store import Session, SessionStore, seal_session

__version__ = "0.1.0"

__all__ = [
    "AnalyticsParams",
    "CommCode",
    "Phase",
    "PositionSample",
    "Role",
    "Session",
    "SessionStore",
    "SessionTimeline",
    "TimeWindow",
    "VoiceSegment",
    "WardLayout",
    "default_layout",
    "entity_color",
    "resolve_phase_window",
    "seal_session",
    "__version__",
]
