"""Interaction analytics: f-formations, speech sociogram, utterance coding,
and the communication code co-occurrence network."""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Any, Iterable, Mapping, Sequence

from .errors import EmptyTextError, FormatError
from .ingest import resample_tracks
from .model import (
    DEFAULT_PARAMS,
    ENGINE_VERSION,
    AnalyticsParams,
    CodedUtterance,
    CommCode,
    Role,
    TimeWindow,
    WardLayout,
)
from .store import Session


class FormationKind(str, Enum):
    FACE_TO_FACE = "FACE_TO_FACE"
    SIDE_BY_SIDE = "SIDE_BY_SIDE"


@dataclass(frozen=True)
class FFormationPair:
    """Unordered pair of entities sharing an interaction space at an instant.

    Stored with a < b by role name; the relation is symmetric by construction.
    """

    a: Role
    b: Role
    window: TimeWindow
    kind: FormationKind

    def involves(self, role: Role) -> bool:
        return role in (self.a, self.b)

    def other(self, role: Role) -> Role:
        if role == self.a:
            return self.b
        if role == self.b:
            return self.a
        raise ValueError(f"{role} is not part of this pair")


# positions value: (x_mm, y_mm, yaw_deg or None). Untracked entities carry a
# fixed declared position and no orientation, which waives the angle tests.
Snapshot = Mapping[Role, tuple[float, float, float | None]]


def detect_f_formations(
    positions: Snapshot,
    layout: WardLayout | None = None,
    dist_face_mm: float = 1500.0,
    dist_side_mm: float = 750.0,
    angle_tol_deg: float = 45.0,
    t_ms: int = 0,
    tick_ms: int = 100,
) -> set[FFormationPair]:
    """Pairwise f-formation instants at one tick.

    FACE_TO_FACE: within dist_face and every tracked member's yaw lies within
    angle_tol of the bearing toward the other. SIDE_BY_SIDE: within dist_side
    with aligned yaws. FACE_TO_FACE takes precedence; pairs are unordered.
    """
    merged: dict[Role, tuple[float, float, float | None]] = dict(positions)
    if layout is not None:
        for role, (x, y) in layout.fixed_entities.items():
            merged.setdefault(role, (x, y, None))
    window = TimeWindow(t_ms, t_ms + tick_ms)
    roles = sorted(merged, key=lambda r: r.value)
    pairs: set[FFormationPair] = set()
    for a, b in combinations(roles, 2):
        xa, ya, yaw_a = merged[a]
        xb, yb, yaw_b = merged[b]
        dx = xb - xa
        dy = yb - ya
        d2 = dx * dx + dy * dy
        if d2 <= dist_face_mm * dist_face_mm:
            ok_a = yaw_a is None or _circ_diff(yaw_a, _bearing(dx, dy)) <= angle_tol_deg
            ok_b = yaw_b is None or _circ_diff(yaw_b, _bearing(-dx, -dy)) <= angle_tol_deg
            if ok_a and ok_b:
                pairs.add(FFormationPair(a, b, window, FormationKind.FACE_TO_FACE))
                continue
        if d2 <= dist_side_mm * dist_side_mm:
            if yaw_a is None or yaw_b is None or _circ_diff(yaw_a, yaw_b) <= angle_tol_deg:
                pairs.add(FFormationPair(a, b, window, FormationKind.SIDE_BY_SIDE))
    return pairs


def _bearing(dx: float, dy: float) -> float:
    return math.degrees(math.atan2(dy, dx)) % 360.0


def _circ_diff(a_deg: float, b_deg: float) -> float:
    d = abs(a_deg - b_deg) % 360.0
    return min(d, 360.0 - d)


# --- speech sociogram -----------------------------------------------------------


@dataclass(frozen=True)
class SociogramGraph:
    """Who spoke how much, and to whom (speaker -> listener milliseconds)."""

    nodes: Mapping[Role, int]
    edges: Mapping[tuple[Role, Role], int]
    window: TimeWindow
    params: AnalyticsParams = DEFAULT_PARAMS

    def to_dict(self) -> dict[str, Any]:
        return {
            "viz": "sociogram",
            "window": self.window.to_dict(),
            "nodes": {r.value: ms for r, ms in sorted(self.nodes.items())},
            "edges": [
                {"from": a.value, "to": b.value, "ms": ms}
                for (a, b), ms in sorted(
                    self.edges.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
                )
            ],
            "params": self.params.to_dict(),
            "engine_version": ENGINE_VERSION,
        }


def compute_sociogram(
    session: Session,
    window: TimeWindow,
    params: AnalyticsParams = DEFAULT_PARAMS,
) -> SociogramGraph:
    """Node weight: voiced ms clipped to the window. Edge a->b: every ms in
    which a is voiced while (a, b) share an f-formation at the enclosing tick.
    Speech with several simultaneous partners accrues to each of them."""
    tick = params.tick_ms
    nodes: dict[Role, int] = {}
    for entity in sorted(session.voice, key=lambda r: r.value):
        total = sum(
            window.overlap_ms(s.from_ms, s.to_ms) for s in session.voice_of(entity)
        )
        if total > 0:
            nodes[entity] = total

    edges: dict[tuple[Role, Role], int] = {}
    tracks = resample_tracks(session.positions, params.staleness_ms)
    partner_cache: dict[int, set[FFormationPair]] = {}

    def formations_at(t: int) -> set[FFormationPair]:
        cached = partner_cache.get(t)
        if cached is None:
            snapshot: dict[Role, tuple[float, float, float | None]] = {}
            for role, track in tracks.items():
                pos = track.at(t)
                if pos is not None:
                    snapshot[role] = (pos.x_mm, pos.y_mm, pos.yaw_deg)
            cached = detect_f_formations(
                snapshot,
                layout=session.layout,
                dist_face_mm=params.dist_face_mm,
                dist_side_mm=params.dist_side_mm,
                angle_tol_deg=params.angle_tol_deg,
                t_ms=t,
                tick_ms=tick,
            )
            partner_cache[t] = cached
        return cached

    for entity in sorted(session.voice, key=lambda r: r.value):
        for seg in session.voice_of(entity):
            lo = max(seg.from_ms, window.from_ms)
            hi = min(seg.to_ms, window.to_ms)
            if lo >= hi:
                continue
            t0 = (lo // tick) * tick
            for t in range(t0, hi, tick):
                ms = min(hi, t + tick) - max(lo, t)
                if ms <= 0:
                    continue
                for pair in formations_at(t):
                    if pair.involves(entity):
                        key = (entity, pair.other(entity))
                        edges[key] = edges.get(key, 0) + ms

    for a, b in edges:
        nodes.setdefault(b, 0)
        nodes.setdefault(a, 0)
    return SociogramGraph(nodes=nodes, edges=edges, window=window, params=params)


# --- utterance coding --------------------------------------------------------------

_ESCALATION_TERMS = ("met", "rapid response", "call the doctor", "emergency")
_HANDOVER_TERMS = ("handover", "isbar", "situation is", "background is")
_TASK_TERMS = ("can you", "could you", "you do", "take the", "go and")
_ACK_TERMS = ("ok", "okay", "got it", "yes", "yep", "sure", "thanks")
_QUESTION_STARTERS = frozenset(
    {
        "what", "who", "whom", "whose", "where", "when", "why", "which", "how",
        "is", "are", "am", "was", "were", "do", "does", "did",
        "can", "could", "will", "would", "shall", "should", "may", "might",
        "must", "have", "has", "had",
    }
)


def code_utterance(text: str) -> CommCode:
    """Deterministic first-match coding of one utterance.

    Rule order: escalation, handover, task allocation, questioning,
    acknowledging, then sharing-information as the default. Matching is
    case-insensitive; the escalation/handover/task rules are substring
    matches, acknowledging matches whole leading words.
    """
    if not text or not text.strip():
        raise EmptyTextError("cannot code empty text")
    lower = text.lower()
    if any(term in lower for term in _ESCALATION_TERMS):
        return CommCode.ESCALATION
    if any(term in lower for term in _HANDOVER_TERMS):
        return CommCode.HANDOVER
    if any(term in lower for term in _TASK_TERMS):
        return CommCode.TASK_ALLOCATION
    tokens = _words(lower)
    if lower.rstrip().endswith("?") or (tokens and tokens[0] in _QUESTION_STARTERS):
        return CommCode.QUESTIONING
    for term in _ACK_TERMS:
        term_tokens = term.split()
        if tokens[: len(term_tokens)] == term_tokens:
            return CommCode.ACKNOWLEDGING
    return CommCode.SHARING_INFORMATION


def _words(lower_text: str) -> list[str]:
    cleaned = "".join(
        c if c.isalnum() or c.isspace() or c == "'" else " " for c in lower_text
    )
    return cleaned.split()


class RuleCoder:
    """Built-in rule-table coder; the default plug-in."""

    name = "rule-table"

    def code(self, text: str) -> CommCode:
        return code_utterance(text)


class SubprocessCoder:
    """External coder speaking the line protocol: one utterance in on stdin,
    one code name out on stdout, per line."""

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self.name = " ".join(self.command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def code(self, text: str) -> CommCode:
        if not text or not text.strip():
            raise EmptyTextError("cannot code empty text")
        proc = self._ensure()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(text.replace("\n", " ") + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline().strip()
        try:
            return CommCode(line)
        except ValueError as exc:
            raise FormatError(f"external coder returned {line!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            assert self._proc.stdin is not None
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self) -> "SubprocessCoder":
        return self

    def __exit__(self, *exc_info: Any) -> None:
        self.close()


def code_utterances(
    utterances: Iterable[CodedUtterance], coder=None
) -> list[CodedUtterance]:
    """Fill missing codes; already-coded utterances pass through unchanged."""
    coder = coder or RuleCoder()
    out = []
    for utt in utterances:
        if utt.code is None:
            utt = CodedUtterance(utt.entity, utt.window, utt.text, coder.code(utt.text))
        out.append(utt)
    return out


# --- communication network -----------------------------------------------------------


@dataclass(frozen=True)
class CommNetwork:
    """Code totals and co-occurrence counts over consecutive utterances."""

    node_counts: Mapping[CommCode, int]
    edge_counts: Mapping[tuple[CommCode, CommCode], int]
    window_size: int
    window: TimeWindow
    params: AnalyticsParams = DEFAULT_PARAMS

    def to_dict(self) -> dict[str, Any]:
        return {
            "viz": "network",
            "window": self.window.to_dict(),
            "node_counts": {c.value: n for c, n in sorted(self.node_counts.items())},
            "edge_counts": [
                {"codes": [a.value, b.value], "count": n}
                for (a, b), n in sorted(
                    self.edge_counts.items(),
                    key=lambda kv: (kv[0][0].value, kv[0][1].value),
                )
            ],
            "window_size": self.window_size,
            "params": self.params.to_dict(),
            "engine_version": ENGINE_VERSION,
        }


def compute_comm_network(
    utterances: Sequence[CodedUtterance],
    window: TimeWindow,
    window_size: int = 2,
    params: AnalyticsParams = DEFAULT_PARAMS,
) -> CommNetwork:
    """Slide a window of consecutive coded utterances (team-wide, across
    speakers) and count unordered pairs of distinct codes that co-occur."""
    if window_size < 2:
        raise ValueError("window_size must be >= 2")
    in_window = [
        u
        for u in sorted(utterances, key=lambda u: u.window.from_ms)
        if window.contains(u.window.from_ms) and u.code is not None
    ]
    node_counts: dict[CommCode, int] = {}
    for u in in_window:
        assert u.code is not None
        node_counts[u.code] = node_counts.get(u.code, 0) + 1
    edge_counts: dict[tuple[CommCode, CommCode], int] = {}
    codes = [u.code for u in in_window]
    for i in range(len(codes) - window_size + 1):
        present = sorted(set(codes[i : i + window_size]), key=lambda c: c.value)
        for a, b in combinations(present, 2):
            edge_counts[(a, b)] = edge_counts.get((a, b), 0) + 1
    return CommNetwork(
        node_counts=node_counts,
        edge_counts=edge_counts,
        window_size=window_size,
        window=window,
        params=params,
    )
