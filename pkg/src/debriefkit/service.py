"""HTTP API and room-based broadcast protocol for the two-screen debrief.

The server owns the authoritative share state per debrief room; connected
screens are dumb renderers that receive the full state on every change and
on join, tagged with a strictly increasing revision.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from fastapi import FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response

from . import interaction, spatial
from .annotation import AnnotationLog
from .errors import (
    AlreadySealedError,
    DebriefError,
    EmptySequenceError,
    EmptyTextError,
    FormatError,
    InvalidScriptError,
    InvalidSegmentError,
    NonMonotonicError,
    NotSealedError,
    OutOfOrderError,
    PhaseUnsetError,
    SessionClosedError,
    TooManyItemsError,
    UnknownActionError,
    UnknownVizError,
    WindowError,
)
from .model import (
    DEFAULT_PARAMS,
    AnalyticsParams,
    Phase,
    Role,
    SessionTimeline,
    TimeWindow,
    WardLayout,
    canonical_json,
    resolve_phase_window,
)
from .store import Session, SessionStore
from .vad import read_wav, run_vad

VIZ_IDS = ("priority", "wardmap", "sociogram", "network", "snippet")
MAX_SHARE_ITEMS = 3
SNIPPET_LEAD_MS = 5_000
SNIPPET_TAIL_MS = 15_000

INTERACTION_EVENTS = (
    "select_phase",
    "select_window",
    "select_viz",
    "share",
    "unshare",
    "play_snippet",
)


@dataclass(frozen=True)
class SnippetRange:
    """Video time range around a tagged action, nominally 20 seconds."""

    from_ms: int
    to_ms: int

    def to_dict(self) -> dict[str, int]:
        return {"from_ms": self.from_ms, "to_ms": self.to_ms}


def snippet_range(t_action_ms: int, timeline: SessionTimeline) -> SnippetRange:
    """Nominal [t-5s, t+15s], each bound clamped to the session independently."""
    if not (0 <= t_action_ms <= timeline.end_ms):
        raise WindowError(f"action time {t_action_ms} outside session")
    lo = max(0, t_action_ms - SNIPPET_LEAD_MS)
    hi = min(timeline.end_ms, t_action_ms + SNIPPET_TAIL_MS)
    return SnippetRange(lo, hi)


@dataclass(frozen=True)
class ShareItem:
    viz_id: str
    window: TimeWindow

    def to_dict(self) -> dict[str, Any]:
        return {"viz": self.viz_id, "from_ms": self.window.from_ms, "to_ms": self.window.to_ms}


@dataclass(frozen=True)
class ShareState:
    session_id: str
    items: tuple[ShareItem, ...] = ()
    revision: int = 0

    def to_message(self) -> dict[str, Any]:
        return {
            "type": "state",
            "revision": self.revision,
            "items": [item.to_dict() for item in self.items],
        }


def apply_share(state: ShareState, items: Sequence[ShareItem]) -> ShareState:
    """Replace-not-merge share semantics; revision strictly increases."""
    if len(items) > MAX_SHARE_ITEMS:
        raise TooManyItemsError(f"{len(items)} items shared, at most {MAX_SHARE_ITEMS}")
    for item in items:
        if item.viz_id not in VIZ_IDS:
            raise UnknownVizError(f"unknown visualization {item.viz_id!r}")
    return ShareState(
        session_id=state.session_id,
        items=tuple(items),
        revision=state.revision + 1,
    )


class DebriefRoom:
    """Share state plus fan-out for one session's debrief."""

    def __init__(self, session_id: str, interactions_path: Path):
        self.session_id = session_id
        self.state = ShareState(session_id=session_id)
        self.subscribers: list[WebSocket] = []
        self.open = True
        self.interactions_path = interactions_path
        self.lock = asyncio.Lock()

    def mutate(self, items: Sequence[ShareItem]) -> ShareState:
        if not self.open:
            raise SessionClosedError(f"debrief for {self.session_id} is closed")
        self.state = apply_share(self.state, items)
        return self.state

    async def broadcast(self) -> None:
        message = self.state.to_message()
        dead = []
        for ws in list(self.subscribers):
            try:
                await ws.send_json(message)
            except Exception:
                dead.append(ws)
        for ws in dead:
            if ws in self.subscribers:
                self.subscribers.remove(ws)

    def log_interaction(self, event: Mapping[str, Any]) -> dict[str, Any]:
        if not self.open:
            raise SessionClosedError(f"debrief for {self.session_id} is closed")
        name = event.get("event")
        if name not in INTERACTION_EVENTS:
            raise FormatError(f"unknown interaction event {name!r}")
        record = {
            "t_wall": event.get("t_wall", time.time()),
            "actor": event.get("actor", "control"),
            "event": name,
            "payload": event.get("payload", {}),
        }
        with self.interactions_path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        return record

    def close(self) -> None:
        self.open = False


class DebriefService:
    """Session registry, analytics dispatch with a deterministic byte cache,
    and debrief rooms."""

    def __init__(
        self,
        session_root: str | Path,
        params: AnalyticsParams = DEFAULT_PARAMS,
    ):
        self.session_root = Path(session_root)
        self.session_root.mkdir(parents=True, exist_ok=True)
        self.params = params
        self._stores: dict[str, SessionStore] = {}
        self._sessions: dict[str, Session] = {}
        self._rooms: dict[str, DebriefRoom] = {}
        self._payload_cache: dict[tuple, bytes] = {}

    # -- sessions ------------------------------------------------------------

    def create_session(
        self,
        session_id: str,
        layout: WardLayout | None = None,
        end_ms: int | None = None,
    ) -> SessionStore:
        store = SessionStore.create(self.session_root / session_id, session_id, layout, end_ms)
        self._stores[session_id] = store
        return store

    def store(self, session_id: str) -> SessionStore:
        cached = self._stores.get(session_id)
        if cached is not None:
            return cached
        directory = self.session_root / session_id
        if not (directory / "manifest.json").exists():
            raise FormatError(f"no session {session_id!r} under {self.session_root}")
        store = SessionStore.open(directory)
        self._stores[session_id] = store
        return store

    def session(self, session_id: str, live: bool = False) -> Session:
        store = self.store(session_id)
        if not store.sealed:
            if live:
                return store.snapshot()
            raise NotSealedError(
                f"session {session_id} is recording; seal it or request a live snapshot"
            )
        cached = self._sessions.get(session_id)
        if cached is None:
            cached = store.load_sealed()
            self._sessions[session_id] = cached
        return cached

    def invalidate(self, session_id: str) -> None:
        self._sessions.pop(session_id, None)
        self._payload_cache = {
            key: value for key, value in self._payload_cache.items() if key[0] != session_id
        }

    # -- analytics ------------------------------------------------------------

    def get_analytics(
        self,
        session_id: str,
        viz_id: str,
        window: TimeWindow | Phase,
        live: bool = False,
    ) -> bytes:
        """Canonical payload bytes; identical requests return identical bytes."""
        if viz_id not in VIZ_IDS or viz_id == "snippet":
            raise UnknownVizError(f"unknown visualization {viz_id!r}")
        session = self.session(session_id, live=live)
        if isinstance(window, Phase):
            window = resolve_phase_window(session.timeline, window)
        if window.to_ms > session.timeline.end_ms:
            raise WindowError(
                f"window ends at {window.to_ms}, session at {session.timeline.end_ms}"
            )
        key = (session_id, viz_id, window.from_ms, window.to_ms, live)
        if not live and key in self._payload_cache:
            return self._payload_cache[key]
        payload = self.compute_payload(session, viz_id, window)
        data = canonical_json(payload)
        if not live:
            self._payload_cache[key] = data
        return data

    def compute_payload(
        self, session: Session, viz_id: str, window: TimeWindow
    ) -> dict[str, Any]:
        if viz_id == "priority":
            return spatial.compute_priority_breakdown(
                session, window, params=self.params
            ).to_dict()
        if viz_id == "wardmap":
            return spatial.compute_ward_map(session, window, params=self.params).to_dict()
        if viz_id == "sociogram":
            return interaction.compute_sociogram(session, window, self.params).to_dict()
        if viz_id == "network":
            return interaction.compute_comm_network(
                session.utterances, window, self.params.comm_window_size, self.params
            ).to_dict()
        raise UnknownVizError(f"unknown visualization {viz_id!r}")

    # -- rooms ---------------------------------------------------------------------

    def room(self, session_id: str) -> DebriefRoom:
        room = self._rooms.get(session_id)
        if room is None:
            store = self.store(session_id)
            room = DebriefRoom(session_id, store.interactions_path())
            self._rooms[session_id] = room
        return room

    def close_room(self, session_id: str) -> None:
        self.room(session_id).close()


_ERROR_STATUS: list[tuple[type, int]] = [
    (TooManyItemsError, 422),
    (WindowError, 422),
    (UnknownVizError, 404),
    (UnknownActionError, 404),
    (PhaseUnsetError, 409),
    (OutOfOrderError, 409),
    (AlreadySealedError, 409),
    (NotSealedError, 409),
    (SessionClosedError, 409),
    (EmptySequenceError, 400),
    (EmptyTextError, 400),
    (InvalidSegmentError, 400),
    (InvalidScriptError, 400),
    (NonMonotonicError, 400),
    (FormatError, 404),
]


def _error_response(exc: DebriefError) -> JSONResponse:
    status = 400
    for cls, code in _ERROR_STATUS:
        if isinstance(exc, cls):
            status = code
            break
    return JSONResponse(
        {"error": {"type": type(exc).__name__, "message": str(exc)}}, status_code=status
    )


def create_app(service: DebriefService) -> FastAPI:
    app = FastAPI(title="debriefkit", version="0.1.0")

    @app.exception_handler(DebriefError)
    async def _handle(_, exc: DebriefError):
        return _error_response(exc)

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        session_id = body.get("session_id") or f"session-{int(time.time() * 1000)}"
        layout = WardLayout.from_dict(body["layout"]) if body.get("layout") else None
        store = service.create_session(session_id, layout, body.get("end_ms"))
        return {"session_id": store.session_id, "status": store.status}

    @app.post("/sessions/{session_id}/streams/{kind}")
    async def upload_stream(
        session_id: str,
        kind: str,
        request: Request,
        entity: str | None = None,
        clock_offset_ms: int = 0,
    ):
        store = service.store(session_id)
        data = await request.body()
        if kind == "positions":
            rows = store.add_positions(data, clock_offset_ms)
        elif kind == "voice":
            rows = store.add_voice(data, clock_offset_ms)
        elif kind == "utterances":
            rows = store.add_utterances(data, clock_offset_ms)
        elif kind == "audio":
            if not entity:
                raise FormatError("audio upload needs ?entity=<ROLE>")
            role = Role(entity)
            store.add_audio(role, data)
            segments = run_vad(
                read_wav(data, role),
                frame_ms=service.params.vad_frame_ms,
                energy_ratio_threshold=service.params.vad_energy_ratio,
                min_segment_ms=service.params.vad_min_segment_ms,
                merge_gap_ms=service.params.vad_merge_gap_ms,
            )
            if clock_offset_ms:
                segments = [
                    type(s)(s.entity, s.from_ms + clock_offset_ms, s.to_ms + clock_offset_ms)
                    for s in segments
                ]
            rows = store.add_voice_segments(segments)
        else:
            raise UnknownVizError(f"unknown stream kind {kind!r}")
        service.invalidate(session_id)
        return {"rows": rows}

    @app.post("/sessions/{session_id}/seal")
    async def seal(session_id: str, request: Request):
        store = service.store(session_id)
        body = await request.json() if await request.body() else {}
        timeline = None
        if body.get("end_ms") is not None:
            markers = store.markers()
            timeline = SessionTimeline(
                end_ms=int(body["end_ms"]),
                handover_ends_ms=markers.get("handover_ends_ms"),
                sn_enter_ms=markers.get("sn_enter_ms"),
                doctor_enter_ms=markers.get("doctor_enter_ms"),
            )
        summary = store.seal(timeline, coder=interaction.RuleCoder())
        service.invalidate(session_id)
        return {
            "session_id": summary.session_id,
            "end_ms": summary.end_ms,
            "stream_rows": dict(summary.stream_rows),
            "clamped": summary.clamped,
            "truncated": dict(summary.truncated),
        }

    @app.get("/sessions/{session_id}/timeline")
    async def timeline(session_id: str):
        store = service.store(session_id)
        end = store.declared_end_ms()
        markers = store.markers()
        return {
            "session_id": session_id,
            "status": store.status,
            "start_ms": 0,
            "handover_ends_ms": markers.get("handover_ends_ms"),
            "sn_enter_ms": markers.get("sn_enter_ms"),
            "doctor_enter_ms": markers.get("doctor_enter_ms"),
            "end_ms": end if end is not None else store.observed_end_ms(),
        }

    @app.get("/sessions/{session_id}/analytics/{viz_id}")
    async def analytics(
        session_id: str,
        viz_id: str,
        from_ms: int = Query(..., ge=0),
        to_ms: int = Query(..., ge=0),
        live: bool = False,
    ):
        window = TimeWindow(from_ms, to_ms)
        data = service.get_analytics(session_id, viz_id, window, live=live)
        return Response(content=data, media_type="application/json")

    @app.post("/sessions/{session_id}/annotations")
    async def annotate(session_id: str, request: Request):
        store = service.store(session_id)
        body = await request.json()
        log = AnnotationLog(store)
        kind = body.get("kind")
        if kind == "PHASE_TAG":
            annotation = log.tag_phase(
                Phase(body["phase"]),
                int(body["t_ms"]),
                note=body.get("note"),
                author=body.get("author", "educator"),
            )
        elif kind == "ACTION_TAG":
            annotation = log.tag_action(
                str(body["action_id"]),
                int(body["t_ms"]),
                note=body.get("note"),
                favorite=bool(body.get("favorite", False)),
                author=body.get("author", "educator"),
            )
        else:
            raise FormatError(f"unknown annotation kind {kind!r}")
        return annotation.to_dict()

    @app.get("/sessions/{session_id}/annotations")
    async def annotations(
        session_id: str,
        from_ms: int | None = None,
        to_ms: int | None = None,
        favorites_only: bool = False,
    ):
        store = service.store(session_id)
        window = None
        if from_ms is not None and to_ms is not None:
            window = TimeWindow(from_ms, to_ms)
        log = AnnotationLog(store)
        return [a.to_dict() for a in log.list_annotations(window, favorites_only)]

    @app.get("/sessions/{session_id}/snippet")
    async def snippet(session_id: str, at_ms: int = Query(..., ge=0)):
        store = service.store(session_id)
        end = store.declared_end_ms()
        if end is None:
            end = store.observed_end_ms()
        markers = store.markers()
        timeline = SessionTimeline(
            end_ms=end,
            handover_ends_ms=markers.get("handover_ends_ms"),
            sn_enter_ms=markers.get("sn_enter_ms"),
            doctor_enter_ms=markers.get("doctor_enter_ms"),
        )
        return snippet_range(at_ms, timeline).to_dict()

    @app.post("/sessions/{session_id}/interactions")
    async def interactions(session_id: str, request: Request):
        room = service.room(session_id)
        record = room.log_interaction(await request.json())
        return {"logged": True, "event": record["event"]}

    @app.post("/sessions/{session_id}/debrief/close")
    async def close_debrief(session_id: str):
        service.close_room(session_id)
        return {"closed": True}

    @app.get("/sessions/{session_id}/catalog")
    async def catalog(session_id: str):
        store = service.store(session_id)
        return AnnotationLog(store).catalog.to_dict()

    @app.websocket("/ws/debrief/{session_id}")
    async def debrief_ws(ws: WebSocket, session_id: str):
        await ws.accept()
        room = service.room(session_id)
        async with room.lock:
            room.subscribers.append(ws)
            await ws.send_json(room.state.to_message())
        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except json.JSONDecodeError:
                    await ws.send_json(
                        {"type": "error", "error": "FormatError", "message": "bad JSON"}
                    )
                    continue
                await _handle_ws_message(room, ws, msg)
        except WebSocketDisconnect:
            pass
        finally:
            async with room.lock:
                if ws in room.subscribers:
                    room.subscribers.remove(ws)

    async def _handle_ws_message(room: DebriefRoom, ws: WebSocket, msg: dict) -> None:
        msg_type = msg.get("type")
        try:
            if msg_type == "share":
                items = [
                    ShareItem(
                        viz_id=str(raw.get("viz")),
                        window=TimeWindow(int(raw["from_ms"]), int(raw["to_ms"])),
                    )
                    for raw in msg.get("items", [])
                ]
                if not items:
                    raise FormatError("share needs 1..3 items")
            elif msg_type == "unshare":
                items = []
            elif msg_type == "play_snippet":
                items = [
                    ShareItem(
                        viz_id="snippet",
                        window=TimeWindow(int(msg["from_ms"]), int(msg["to_ms"])),
                    )
                ]
            else:
                raise FormatError(f"unknown message type {msg_type!r}")
        except (KeyError, TypeError, ValueError) as exc:
            await ws.send_json(
                {"type": "error", "error": "FormatError", "message": str(exc)}
            )
            return
        except DebriefError as exc:
            await ws.send_json(
                {"type": "error", "error": type(exc).__name__, "message": str(exc)}
            )
            return
        async with room.lock:
            try:
                room.mutate(items)
            except DebriefError as exc:
                await ws.send_json(
                    {"type": "error", "error": type(exc).__name__, "message": str(exc)}
                )
                return
            await room.broadcast()

    return app


def build_service(
    session_root: str | Path, params: AnalyticsParams = DEFAULT_PARAMS
) -> tuple[DebriefService, FastAPI]:
    service = DebriefService(session_root, params)
    return service, create_app(service)
