"""Live tagging of phases and predefined actions during the scenario.

The annotation log is append-only jsonl; phase retags append a correction
record rather than rewriting history, so replaying the log reconstructs the
timeline exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import FormatError, OutOfOrderError, UnknownActionError
from .model import NAMED_PHASES, Phase, SessionTimeline, TimeWindow
from .store import SessionStore

KIND_PHASE = "PHASE_TAG"
KIND_ACTION = "ACTION_TAG"

_PHASE_MARKER_KEY = {
    Phase.P1_HANDOVER_ENDS: "handover_ends_ms",
    Phase.P2_SN_ENTER: "sn_enter_ms",
    Phase.P3_DOCTOR_ENTER: "doctor_enter_ms",
}


@dataclass(frozen=True)
class ActionDef:
    action_id: str
    label: str
    phase_hint: Phase = Phase.ALL


@dataclass(frozen=True)
class ActionCatalog:
    entries: tuple[ActionDef, ...]

    def __post_init__(self) -> None:
        ids = [e.action_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise FormatError("action ids must be unique")

    def __contains__(self, action_id: str) -> bool:
        return any(e.action_id == action_id for e in self.entries)

    def get(self, action_id: str) -> ActionDef:
        for entry in self.entries:
            if entry.action_id == action_id:
                return entry
        raise UnknownActionError(f"action {action_id!r} not in catalog")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ActionCatalog":
        return cls(
            entries=tuple(
                ActionDef(
                    action_id=str(a["action_id"]),
                    label=str(a.get("label", a["action_id"])),
                    phase_hint=Phase(a.get("phase_hint", "ALL")),
                )
                for a in data.get("actions", [])
            )
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "actions": [
                {
                    "action_id": e.action_id,
                    "label": e.label,
                    "phase_hint": e.phase_hint.value,
                }
                for e in self.entries
            ]
        }


def default_catalog() -> ActionCatalog:
    """Expected actions of the deterioration scenario, grouped by phase."""
    return ActionCatalog(
        entries=(
            ActionDef("handover_received", "Handover received", Phase.P1_HANDOVER_ENDS),
            ActionDef("vitals_checked", "Vital signs checked", Phase.P1_HANDOVER_ENDS),
            ActionDef("deterioration_noticed", "Deterioration recognised", Phase.P1_HANDOVER_ENDS),
            ActionDef("help_called", "Called for help", Phase.P2_SN_ENTER),
            ActionDef("tasks_allocated", "Tasks allocated", Phase.P2_SN_ENTER),
            ActionDef("met_called", "MET call placed", Phase.P2_SN_ENTER),
            ActionDef("isbar_to_doctor", "ISBAR handover to doctor", Phase.P3_DOCTOR_ENTER),
            ActionDef("oxygen_applied", "Oxygen applied", Phase.P3_DOCTOR_ENTER),
        )
    )


def load_catalog(path: str | Path) -> ActionCatalog:
    return ActionCatalog.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Annotation:
    id: str
    t_ms: int
    kind: str
    phase: Phase | None = None
    action_id: str | None = None
    note: str | None = None
    favorite: bool = False
    author: str = "educator"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "t_ms": self.t_ms,
            "kind": self.kind,
            "favorite": self.favorite,
            "author": self.author,
        }
        if self.phase is not None:
            out["phase"] = self.phase.value
        if self.action_id is not None:
            out["action_id"] = self.action_id
        if self.note is not None:
            out["note"] = self.note
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Annotation":
        return cls(
            id=str(data["id"]),
            t_ms=int(data["t_ms"]),
            kind=str(data["kind"]),
            phase=Phase(data["phase"]) if "phase" in data else None,
            action_id=data.get("action_id"),
            note=data.get("note"),
            favorite=bool(data.get("favorite", False)),
            author=str(data.get("author", "educator")),
        )


class AnnotationLog:
    """Append-only annotation record for one session."""

    def __init__(self, store: SessionStore, catalog: ActionCatalog | None = None):
        self.store = store
        self.catalog = catalog or self._load_catalog()

    def _load_catalog(self) -> ActionCatalog:
        path = self.store.directory / "scenario.json"
        if path.exists():
            return load_catalog(path)
        return default_catalog()

    def _path(self) -> Path:
        return self.store.annotations_path()

    def _next_id(self) -> str:
        return f"a{len(self.all()) + 1:04d}"

    def _append(self, annotation: Annotation) -> Annotation:
        with self._path().open("a") as fh:
            fh.write(json.dumps(annotation.to_dict(), sort_keys=True) + "\n")
        return annotation

    def all(self) -> list[Annotation]:
        path = self._path()
        if not path.exists():
            return []
        out = []
        for line in path.read_text().splitlines():
            if line.strip():
                out.append(Annotation.from_dict(json.loads(line)))
        return out

    # -- tagging ---------------------------------------------------------------

    def tag_phase(
        self, phase: Phase, t_ms: int, note: str | None = None, author: str = "educator"
    ) -> Annotation:
        """Set a phase marker. Retagging overwrites the marker and records the
        correction in the appended annotation."""
        if phase not in _PHASE_MARKER_KEY:
            raise OutOfOrderError(f"{phase.value} is not a taggable phase")
        if t_ms < 0:
            raise OutOfOrderError("phase tag before session start")
        end = self.store.declared_end_ms()
        if end is not None and t_ms > end:
            raise OutOfOrderError("phase tag beyond session end")
        markers = self.store.markers()
        idx = NAMED_PHASES.index(phase)
        for earlier in NAMED_PHASES[:idx]:
            key = _PHASE_MARKER_KEY[earlier]
            if key not in markers:
                raise OutOfOrderError(
                    f"cannot tag {phase.value} before {earlier.value} is tagged"
                )
            if t_ms < markers[key]:
                raise OutOfOrderError(
                    f"{phase.value} at {t_ms} precedes {earlier.value} at {markers[key]}"
                )
        for later in NAMED_PHASES[idx + 1 :]:
            key = _PHASE_MARKER_KEY[later]
            if key in markers and t_ms > markers[key]:
                raise OutOfOrderError(
                    f"{phase.value} at {t_ms} follows {later.value} at {markers[key]}"
                )
        key = _PHASE_MARKER_KEY[phase]
        previous = markers.get(key)
        self.store.set_marker(key, t_ms)
        full_note = note
        if previous is not None and previous != t_ms:
            correction = f"corrects earlier tag at {previous} ms"
            full_note = f"{note}; {correction}" if note else correction
        return self._append(
            Annotation(
                id=self._next_id(),
                t_ms=t_ms,
                kind=KIND_PHASE,
                phase=phase,
                note=full_note,
                author=author,
            )
        )

    def tag_action(
        self,
        action_id: str,
        t_ms: int,
        note: str | None = None,
        favorite: bool = False,
        author: str = "educator",
    ) -> Annotation:
        if action_id not in self.catalog:
            raise UnknownActionError(f"action {action_id!r} not in catalog")
        if t_ms < 0:
            raise OutOfOrderError("action tag before session start")
        end = self.store.declared_end_ms()
        if end is not None and t_ms > end:
            raise OutOfOrderError("action tag beyond session end")
        return self._append(
            Annotation(
                id=self._next_id(),
                t_ms=t_ms,
                kind=KIND_ACTION,
                action_id=action_id,
                note=note,
                favorite=favorite,
                author=author,
            )
        )

    def list_annotations(
        self,
        window: TimeWindow | None = None,
        favorites_only: bool = False,
    ) -> list[Annotation]:
        """Time-ordered annotations, optionally filtered."""
        records = list(enumerate(self.all()))
        records.sort(key=lambda pair: (pair[1].t_ms, pair[0]))
        out = []
        for _, ann in records:
            if window is not None and not window.contains(ann.t_ms):
                continue
            if favorites_only and not ann.favorite:
                continue
            out.append(ann)
        return out

    def replay_timeline(self, end_ms: int) -> SessionTimeline:
        """Reconstruct the timeline from the log alone (last tag per phase wins)."""
        markers: dict[str, int] = {}
        for ann in self.all():
            if ann.kind == KIND_PHASE and ann.phase is not None:
                markers[_PHASE_MARKER_KEY[ann.phase]] = ann.t_ms
        return SessionTimeline(
            end_ms=end_ms,
            handover_ends_ms=markers.get("handover_ends_ms"),
            sn_enter_ms=markers.get("sn_enter_ms"),
            doctor_enter_ms=markers.get("doctor_enter_ms"),
        )


def tag_phase(
    store: SessionStore, phase: Phase, t_ms: int, **kwargs: Any
) -> tuple[Annotation, dict[str, int]]:
    """Convenience wrapper returning the annotation and the updated markers."""
    log = AnnotationLog(store)
    annotation = log.tag_phase(phase, t_ms, **kwargs)
    return annotation, store.markers()


def tag_action(store: SessionStore, action_id: str, t_ms: int, **kwargs: Any) -> Annotation:
    return AnnotationLog(store).tag_action(action_id, t_ms, **kwargs)


def list_annotations(
    store: SessionStore,
    window: TimeWindow | None = None,
    favorites_only: bool = False,
) -> list[Annotation]:
    return AnnotationLog(store).list_annotations(window, favorites_only)
