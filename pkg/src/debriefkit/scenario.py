"""Deterministic synthetic scenario generator with ground-truth labels.

Scripts describe where each role goes (waypoints with dwells) and when it
speaks (speech plan with codes); ``generate_session`` renders that into a
standard session directory at 10 Hz with seeded jitter, so the same seed is
always byte-identical.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .errors import InvalidScriptError
from .model import (
    CodedUtterance,
    CommCode,
    PositionSample,
    Role,
    TimeWindow,
    VoiceSegment,
    WardLayout,
    default_layout,
    normalize_yaw,
)
from .store import SessionStore

TICK_MS = 100
JITTER_MM = 30.0

# Around-the-bed slot angle per role, in degrees. Spread unevenly so slot
# bearings never sit exactly on the formation angle tolerance.
_SLOT_ANGLE = {
    Role.PN1: 10.0,
    Role.PN2: 190.0,
    Role.SN1: 80.0,
    Role.SN2: 260.0,
    Role.DOCTOR: 130.0,
}

_PHRASES: dict[CommCode, tuple[str, ...]] = {
    CommCode.ACKNOWLEDGING: ("Okay.", "Got it.", "Yep, on it.", "Sure, thanks."),
    CommCode.SHARING_INFORMATION: (
        "Blood pressure is ninety over sixty.",
        "Respirations are at twenty-four.",
        "The oxygen saturation keeps dropping.",
        "Patient in bed two is comfortable.",
    ),
    CommCode.QUESTIONING: (
        "What were the last obs?",
        "Is the fluid chart up to date?",
        "How long has she been drowsy?",
    ),
    CommCode.TASK_ALLOCATION: (
        "Can you do a set of obs on bed two?",
        "Could you grab the obs trolley?",
        "Take the fluids to bed three, please.",
    ),
    CommCode.HANDOVER: (
        "Handover for bed four: post-op day one.",
        "The situation is that she is hypotensive.",
        "Background is a laparotomy yesterday.",
    ),
    CommCode.ESCALATION: (
        "I'm calling a MET.",
        "We need a rapid response now.",
        "Call the doctor, this is an emergency.",
    ),
}


@dataclass(frozen=True)
class Waypoint:
    t_ms: int
    target: str | tuple[float, float]  # "bed<N>" or an explicit point
    dwell_ms: int = 0


@dataclass(frozen=True)
class SpeechSpan:
    from_ms: int
    to_ms: int
    code: CommCode
    text: str
    partner: Role | None = None


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    duration_ms: int
    cast: tuple[Role, ...]
    waypoints: Mapping[Role, tuple[Waypoint, ...]]
    speech_plan: Mapping[Role, tuple[SpeechSpan, ...]]
    phase_marks: Mapping[str, int] = field(default_factory=dict)
    session_id: str | None = None

    def validate(self, layout: WardLayout) -> None:
        if self.duration_ms <= 0:
            raise InvalidScriptError("duration_ms must be positive")
        if not self.cast:
            raise InvalidScriptError("cast is empty")
        for role, points in self.waypoints.items():
            if role not in self.cast:
                raise InvalidScriptError(f"waypoints for {role.value} not in cast")
            if not role.wears_tag:
                raise InvalidScriptError(f"{role.value} cannot carry a tag")
            times = [w.t_ms for w in points]
            if times != sorted(times):
                raise InvalidScriptError(f"waypoints of {role.value} not time-ordered")
            for w in points:
                if w.dwell_ms < 0 or w.t_ms < 0:
                    raise InvalidScriptError("negative waypoint time or dwell")
                _resolve_target(w.target, layout)  # raises on unknown bed
        for role, spans in self.speech_plan.items():
            if role not in self.cast:
                raise InvalidScriptError(f"speech for {role.value} not in cast")
            for span in spans:
                if not (0 <= span.from_ms < span.to_ms <= self.duration_ms):
                    raise InvalidScriptError(
                        f"speech span [{span.from_ms},{span.to_ms}) outside session"
                    )

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "duration_ms": self.duration_ms,
            "cast": [r.value for r in self.cast],
            "session_id": self.session_id,
            "waypoints": {
                role.value: [
                    {
                        "t_ms": w.t_ms,
                        "target": w.target if isinstance(w.target, str) else list(w.target),
                        "dwell_ms": w.dwell_ms,
                    }
                    for w in points
                ]
                for role, points in sorted(self.waypoints.items())
            },
            "speech_plan": {
                role.value: [
                    {
                        "from_ms": s.from_ms,
                        "to_ms": s.to_ms,
                        "code": s.code.value,
                        "text": s.text,
                        "partner": s.partner.value if s.partner else None,
                    }
                    for s in spans
                ]
                for role, spans in sorted(self.speech_plan.items())
            },
            "phase_marks": dict(self.phase_marks),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioScript":
        try:
            return cls(
                seed=int(data["seed"]),
                duration_ms=int(data["duration_ms"]),
                cast=tuple(Role(r) for r in data["cast"]),
                session_id=data.get("session_id"),
                waypoints={
                    Role(role): tuple(
                        Waypoint(
                            t_ms=int(w["t_ms"]),
                            target=w["target"]
                            if isinstance(w["target"], str)
                            else (float(w["target"][0]), float(w["target"][1])),
                            dwell_ms=int(w.get("dwell_ms", 0)),
                        )
                        for w in points
                    )
                    for role, points in data.get("waypoints", {}).items()
                },
                speech_plan={
                    Role(role): tuple(
                        SpeechSpan(
                            from_ms=int(s["from_ms"]),
                            to_ms=int(s["to_ms"]),
                            code=CommCode(s["code"]),
                            text=str(s["text"]),
                            partner=Role(s["partner"]) if s.get("partner") else None,
                        )
                        for s in spans
                    )
                    for role, spans in data.get("speech_plan", {}).items()
                },
                phase_marks={k: int(v) for k, v in data.get("phase_marks", {}).items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScriptError(f"malformed script: {exc}") from exc


def load_script(path: str | Path) -> ScenarioScript:
    return ScenarioScript.from_dict(json.loads(Path(path).read_text()))


def _resolve_target(
    target: str | tuple[float, float] | Sequence[float], layout: WardLayout
) -> tuple[float, float]:
    if isinstance(target, str):
        if not target.startswith("bed"):
            raise InvalidScriptError(f"unknown target {target!r}")
        bed_id = int(target[3:])
        for bed in layout.beds:
            if bed.bed_id == bed_id:
                return bed.center_mm
        raise InvalidScriptError(f"no bed {bed_id} in layout")
    return (float(target[0]), float(target[1]))


@dataclass(frozen=True)
class GroundTruth:
    """What the script intended, per tick and per utterance."""

    duration_ms: int
    intended_states: Mapping[Role, tuple[str, ...]]  # per tick: AT_BED:<id>|MOVING|IDLE
    code_sequence: tuple[str, ...]
    speech_partners: Mapping[Role, tuple[tuple[int, int, str | None], ...]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "duration_ms": self.duration_ms,
            "intended_states": {
                r.value: list(states) for r, states in sorted(self.intended_states.items())
            },
            "code_sequence": list(self.code_sequence),
            "speech_partners": {
                r.value: [list(p) for p in spans]
                for r, spans in sorted(self.speech_partners.items())
            },
        }


class _Path:
    """Piecewise-linear path through resolved waypoints, with dwell plateaus."""

    def __init__(self, knots: list[tuple[int, tuple[float, float]]], duration_ms: int):
        # knots: (time, point) non-decreasing in time
        if not knots:
            raise InvalidScriptError("a tracked role needs at least one waypoint")
        self.knots = knots
        self.duration_ms = duration_ms

    def at(self, t_ms: int) -> tuple[float, float]:
        knots = self.knots
        if t_ms <= knots[0][0]:
            return knots[0][1]
        for i in range(1, len(knots)):
            t1, p1 = knots[i]
            if t_ms <= t1:
                t0, p0 = knots[i - 1]
                if t1 == t0:
                    return p1
                f = (t_ms - t0) / (t1 - t0)
                return (p0[0] + f * (p1[0] - p0[0]), p0[1] + f * (p1[1] - p0[1]))
        return knots[-1][1]

    def moving_at(self, t_ms: int) -> bool:
        knots = self.knots
        if t_ms <= knots[0][0] or t_ms > knots[-1][0]:
            return False
        for i in range(1, len(knots)):
            t1, p1 = knots[i]
            if t_ms <= t1:
                t0, p0 = knots[i - 1]
                return p0 != p1 and t1 > t0
        return False


def _slot_point(role: Role, bed_center: tuple[float, float], layout: WardLayout) -> tuple[float, float]:
    """Personal standing spot beside a bed, distinct per role."""
    angle = math.radians(_SLOT_ANGLE.get(role, 0.0))
    dist = 420.0
    x = bed_center[0] + dist * math.cos(angle)
    y = bed_center[1] + dist * math.sin(angle)
    return layout.clamp(x, y)


def _build_paths(
    script: ScenarioScript, layout: WardLayout
) -> dict[Role, _Path]:
    paths: dict[Role, _Path] = {}
    for role in sorted(script.cast, key=lambda r: r.value):
        if not role.wears_tag:
            continue
        waypoints = script.waypoints.get(role, ())
        if not waypoints:
            continue
        knots: list[tuple[int, tuple[float, float]]] = []
        clock = 0
        for w in waypoints:
            target = _resolve_target(w.target, layout)
            if isinstance(w.target, str):
                target = _slot_point(role, target, layout)
            arrive = max(w.t_ms, clock)  # a dwell may not run past the next arrival
            depart = arrive + w.dwell_ms
            knots.append((arrive, target))
            knots.append((depart, target))
            clock = depart
        paths[role] = _Path(knots, script.duration_ms)
    return paths


def generate_session(
    script: ScenarioScript,
    out_dir: str | Path,
    layout: WardLayout | None = None,
) -> GroundTruth:
    """Render a script into a recording session directory plus ground truth."""
    layout = layout or default_layout()
    script.validate(layout)
    out_dir = Path(out_dir)
    session_id = script.session_id or f"sim-{script.seed}"
    store = SessionStore.create(out_dir, session_id, layout, end_ms=script.duration_ms)
    store.declare_cast(script.cast)

    paths = _build_paths(script, layout)
    ticks = range(0, script.duration_ms, TICK_MS)

    # Partner lookup per role: active speech span at a tick, if any.
    def partner_at(role: Role, t_ms: int) -> Role | None:
        for span in script.speech_plan.get(role, ()):
            if span.from_ms <= t_ms < span.to_ms:
                return span.partner
        return None

    samples: list[PositionSample] = []
    intended: dict[Role, list[str]] = {}
    raw_xy: dict[Role, list[tuple[float, float]]] = {}
    for role in sorted(paths, key=lambda r: r.value):
        rng = random.Random(f"{script.seed}:{role.value}")
        path = paths[role]
        states: list[str] = []
        xs: list[tuple[float, float]] = []
        for t in ticks:
            x, y = path.at(t)
            jx = rng.uniform(-JITTER_MM, JITTER_MM)
            jy = rng.uniform(-JITTER_MM, JITTER_MM)
            x, y = layout.clamp(x + jx, y + jy)
            xs.append((x, y))
            if path.moving_at(t):
                states.append("MOVING")
            else:
                bed = _bed_of(x, y, layout)
                states.append(f"AT_BED:{bed}" if bed is not None else "IDLE")
        intended[role] = states
        raw_xy[role] = xs

    # Second pass for yaw: face the motion while moving, otherwise face the
    # current speech partner when there is one, else the nearest bed center.
    for role in sorted(paths, key=lambda r: r.value):
        path = paths[role]
        xs = raw_xy[role]
        for i, t in enumerate(ticks):
            x, y = xs[i]
            if path.moving_at(t) and i + 1 < len(xs):
                nx, ny = path.at(t + TICK_MS)
                yaw = math.degrees(math.atan2(ny - y, nx - x))
            else:
                focus = None
                partner = partner_at(role, t)
                if partner is not None:
                    if partner in raw_xy:
                        focus = raw_xy[partner][i]
                    elif partner in layout.fixed_entities:
                        focus = layout.fixed_entities[partner]
                if focus is None:
                    focus = _nearest_bed_center(x, y, layout)
                yaw = math.degrees(math.atan2(focus[1] - y, focus[0] - x))
            samples.append(
                PositionSample(
                    t_ms=t,
                    entity=role,
                    x_mm=float(round(x)),
                    y_mm=float(round(y)),
                    yaw_deg=normalize_yaw(yaw),
                )
            )

    from .ingest import serialize_positions

    if samples:
        store.add_positions(serialize_positions(samples))

    segments = []
    utterances = []
    for role in sorted(script.speech_plan, key=lambda r: r.value):
        for span in script.speech_plan[role]:
            segments.append(VoiceSegment(role, span.from_ms, span.to_ms))
            utterances.append(
                CodedUtterance(
                    entity=role,
                    window=TimeWindow(span.from_ms, span.to_ms),
                    text=span.text,
                    code=span.code,
                )
            )
    if segments:
        from .ingest import serialize_voice_jsonl

        store.add_voice(serialize_voice_jsonl(segments))
    if utterances:
        from .ingest import serialize_utterances_jsonl

        store.add_utterances(serialize_utterances_jsonl(utterances))

    for marker, value in sorted(script.phase_marks.items()):
        store.set_marker(marker, value)

    ordered = sorted(utterances, key=lambda u: (u.window.from_ms, u.entity.value))
    truth = GroundTruth(
        duration_ms=script.duration_ms,
        intended_states={r: tuple(states) for r, states in intended.items()},
        code_sequence=tuple(u.code.value for u in ordered if u.code),
        speech_partners={
            role: tuple(
                (span.from_ms, span.to_ms, span.partner.value if span.partner else None)
                for span in spans
            )
            for role, spans in sorted(script.speech_plan.items())
        },
    )
    (out_dir / "ground_truth.json").write_text(
        json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    (out_dir / "script.json").write_text(
        json.dumps(script.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    return truth


def _bed_of(x: float, y: float, layout: WardLayout) -> int | None:
    primary = layout.primary_bed
    if _inside(x, y, primary):
        return primary.bed_id
    for bed in layout.secondary_beds():
        if _inside(x, y, bed):
            return bed.bed_id
    return None


def _inside(x: float, y: float, bed) -> bool:
    dx = x - bed.center_mm[0]
    dy = y - bed.center_mm[1]
    return dx * dx + dy * dy <= bed.radius_mm * bed.radius_mm


def _nearest_bed_center(x: float, y: float, layout: WardLayout) -> tuple[float, float]:
    best = None
    best_d = math.inf
    for bed in layout.beds:
        dx = x - bed.center_mm[0]
        dy = y - bed.center_mm[1]
        d = dx * dx + dy * dy
        if d < best_d:
            best_d = d
            best = bed.center_mm
    assert best is not None
    return best


# --- random campaign scripts ----------------------------------------------------


def random_script(seed: int, max_duration_ms: int = 90_000) -> ScenarioScript:
    """Seeded random scenario: 4-7 entities, random movement and speech."""
    rng = random.Random(f"script-{seed}")
    layout = default_layout()
    duration = rng.randrange(20_000, max_duration_ms + 1, 1000)
    cast: list[Role] = [Role.PN1, Role.PN2, Role.SN1, Role.SN2]
    extras = [Role.DOCTOR, Role.PATIENT, Role.RELATIVE]
    for role in extras[: rng.randint(0, 3)]:
        cast.append(role)

    waypoints: dict[Role, tuple[Waypoint, ...]] = {}
    for role in cast:
        if not role.wears_tag:
            continue
        n = rng.randint(1, 4)
        times = sorted(rng.sample(range(0, max(duration - 1000, 1), 500), n))
        points: list[Waypoint] = []
        for t in times:
            if rng.random() < 0.6:
                target: str | tuple[float, float] = f"bed{rng.randint(1, 4)}"
            else:
                target = (
                    float(rng.randrange(600, int(layout.room_mm[0]) - 600)),
                    float(rng.randrange(600, int(layout.room_mm[1]) - 600)),
                )
            points.append(Waypoint(t_ms=t, target=target, dwell_ms=rng.randrange(0, 15_000, 500)))
        waypoints[role] = tuple(points)

    speech: dict[Role, tuple[SpeechSpan, ...]] = {}
    for role in cast:
        spans: list[SpeechSpan] = []
        t = rng.randrange(0, 5000, 100)
        while t < duration - 1000 and len(spans) < 6:
            if rng.random() < 0.6:
                length = rng.randrange(800, 6000, 100)
                end = min(t + length, duration)
                code = rng.choice(list(CommCode))
                partner_pool = [r for r in cast if r != role]
                partner = rng.choice(partner_pool) if rng.random() < 0.7 else None
                spans.append(
                    SpeechSpan(
                        from_ms=t,
                        to_ms=end,
                        code=code,
                        text=rng.choice(_PHRASES[code]),
                        partner=partner,
                    )
                )
                t = end + rng.randrange(500, 8000, 100)
            else:
                t += rng.randrange(1000, 10_000, 100)
        if spans:
            speech[role] = tuple(spans)

    phase_marks: dict[str, int] = {}
    if rng.random() < 0.5 and duration >= 12_000:
        a = rng.randrange(1000, duration // 3, 100)
        b = rng.randrange(a, 2 * duration // 3, 100)
        c = rng.randrange(b, duration - 1000, 100)
        phase_marks = {"handover_ends_ms": a, "sn_enter_ms": b, "doctor_enter_ms": c}

    return ScenarioScript(
        seed=seed,
        duration_ms=duration,
        cast=tuple(cast),
        waypoints=waypoints,
        speech_plan=speech,
        phase_marks=phase_marks,
        session_id=f"sim-{seed}",
    )
