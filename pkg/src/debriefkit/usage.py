"""Debrief navigation strategy taxonomy and the topic coverage index."""

from __future__ import annotations

import csv
import io
import json
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .errors import EmptySequenceError
from .model import Phase


class StrategyLabel(str, Enum):
    S1_SINGLE_PHASE = "S1_SINGLE_PHASE"
    S2_ALL_THEN_FOCUS = "S2_ALL_THEN_FOCUS"
    S3_TWO_PHASE_ALTERNATION = "S3_TWO_PHASE_ALTERNATION"
    S4_PROGRESSIVE = "S4_PROGRESSIVE"
    S5_COMPLEX = "S5_COMPLEX"


def collapse_duplicates(selections: Sequence[Phase]) -> list[Phase]:
    out: list[Phase] = []
    for phase in selections:
        if not out or out[-1] != phase:
            out.append(phase)
    return out


def classify_strategy(phase_selections: Sequence[Phase]) -> StrategyLabel:
    """Label a phase-selection sequence with one of the five navigation
    strategies. Consecutive duplicate selections never change the label."""
    if not phase_selections:
        raise EmptySequenceError("no phase selections to classify")
    d = collapse_duplicates(phase_selections)
    distinct = set(d)
    if len(distinct) == 1:
        return StrategyLabel.S1_SINGLE_PHASE
    if len(d) == 2 and d[0] == Phase.ALL and d[1] != Phase.ALL:
        return StrategyLabel.S2_ALL_THEN_FOCUS
    revisit = len(d) > len(distinct)
    if Phase.ALL not in distinct and len(distinct) == 2 and revisit:
        return StrategyLabel.S3_TWO_PHASE_ALTERNATION
    if d[0] == Phase.ALL and len(d) >= 3 and not revisit:
        return StrategyLabel.S4_PROGRESSIVE
    return StrategyLabel.S5_COMPLEX


def coverage_index(theme_frequency: int, sessions_with_theme: int) -> float:
    """Theme frequency normalized by the number of sessions it appeared in."""
    if theme_frequency < 0 or sessions_with_theme < 0:
        raise ValueError("counts must be non-negative")
    if sessions_with_theme == 0:
        if theme_frequency == 0:
            return 0.0
        raise ZeroDivisionError(
            f"theme seen {theme_frequency} times but in zero sessions"
        )
    return theme_frequency / sessions_with_theme


# --- interaction log processing ------------------------------------------------


def phase_selections_from_log(path: str | Path) -> list[Phase]:
    """Phase-selection sequence of one debrief, from its interactions log."""
    out: list[Phase] = []
    log_path = Path(path)
    if not log_path.exists():
        return out
    for line in log_path.read_text().splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("event") != "select_phase":
            continue
        phase = record.get("payload", {}).get("phase")
        if phase is not None:
            out.append(Phase(phase))
    return out


def emit_strategies_csv(
    sequences: Mapping[str, Sequence[Phase]], out_path: str | Path | None = None
) -> str:
    """Rows of (session_id, label); sessions with no selections are skipped."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["session_id", "strategy"])
    for session_id in sorted(sequences):
        selections = sequences[session_id]
        if not selections:
            continue
        writer.writerow([session_id, classify_strategy(selections).value])
    text = buf.getvalue()
    if out_path is not None:
        Path(out_path).write_text(text)
    return text


def emit_coverage_csv(
    themes: Mapping[str, tuple[int, int]], out_path: str | Path | None = None
) -> str:
    """Rows of (theme, frequency, sessions, coverage_index)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theme", "frequency", "sessions_with_theme", "coverage_index"])
    for theme in sorted(themes):
        frequency, sessions = themes[theme]
        writer.writerow([theme, frequency, sessions, coverage_index(frequency, sessions)])
    text = buf.getvalue()
    if out_path is not None:
        Path(out_path).write_text(text)
    return text


def analyze_session_roots(session_root: str | Path, out_dir: str | Path) -> dict[str, str]:
    """Classify every session under a root and write strategies.csv."""
    root = Path(session_root)
    sequences: dict[str, list[Phase]] = {}
    for manifest in sorted(root.glob("*/manifest.json")):
        session_dir = manifest.parent
        log = session_dir / "interactions.jsonl"
        selections = phase_selections_from_log(log)
        if selections:
            sequences[session_dir.name] = selections
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = emit_strategies_csv(sequences, out / "strategies.csv")
    return {"strategies_csv": text}
