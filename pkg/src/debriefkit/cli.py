"""Operator command line: ingest, analyze, export, simulate, serve.

Exit codes: 0 success, 2 usage error, 3 data error. Every flag has a
DEBRIEFKIT_* environment override (flag wins when both are given).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import DebriefError
from .interaction import RuleCoder
from .model import (
    DEFAULT_PARAMS,
    AnalyticsParams,
    Phase,
    TimeWindow,
    canonical_json,
    canonical_json_pretty,
    resolve_phase_window,
)
from .render import render
from .scenario import generate_session, load_script, random_script
from .service import DebriefService, VIZ_IDS, build_service
from .store import SessionStore

PHASE_FLAG = {
    "all": Phase.ALL,
    "p1": Phase.P1_HANDOVER_ENDS,
    "p2": Phase.P2_SN_ENTER,
    "p3": Phase.P3_DOCTOR_ENTER,
}

ANALYZE_VIZ = tuple(v for v in VIZ_IDS if v != "snippet")


def _env(name: str, default=None):
    return os.environ.get(f"DEBRIEFKIT_{name}", default)


def _add_window_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--phase", choices=sorted(PHASE_FLAG), default=None)
    parser.add_argument("--from-ms", type=int, default=None)
    parser.add_argument("--to-ms", type=int, default=None)


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--hex-radius-mm",
        type=float,
        default=float(_env("HEX_RADIUS_MM", DEFAULT_PARAMS.hex_radius_mm)),
    )
    parser.add_argument(
        "--vad-frame-ms",
        type=int,
        default=int(_env("VAD_FRAME_MS", DEFAULT_PARAMS.vad_frame_ms)),
    )
    parser.add_argument(
        "--vad-energy-ratio",
        type=float,
        default=float(_env("VAD_ENERGY_RATIO", DEFAULT_PARAMS.vad_energy_ratio)),
    )
    parser.add_argument(
        "--vad-min-segment-ms",
        type=int,
        default=int(_env("VAD_MIN_SEGMENT_MS", DEFAULT_PARAMS.vad_min_segment_ms)),
    )
    parser.add_argument(
        "--vad-merge-gap-ms",
        type=int,
        default=int(_env("VAD_MERGE_GAP_MS", DEFAULT_PARAMS.vad_merge_gap_ms)),
    )


def _params_from(args: argparse.Namespace) -> AnalyticsParams:
    return DEFAULT_PARAMS.replace(
        hex_radius_mm=args.hex_radius_mm,
        vad_frame_ms=args.vad_frame_ms,
        vad_energy_ratio=args.vad_energy_ratio,
        vad_min_segment_ms=args.vad_min_segment_ms,
        vad_merge_gap_ms=args.vad_merge_gap_ms,
    )


def _session_dir(session: str, session_root: str) -> Path:
    direct = Path(session)
    if (direct / "manifest.json").exists():
        return direct
    return Path(session_root) / session


def _window_for(args: argparse.Namespace, store: SessionStore) -> TimeWindow:
    if args.from_ms is not None or args.to_ms is not None:
        if args.from_ms is None or args.to_ms is None:
            raise DebriefError("--from-ms and --to-ms must be given together")
        return TimeWindow(args.from_ms, args.to_ms)
    phase = PHASE_FLAG[args.phase or "all"]
    end = store.declared_end_ms()
    if end is None:
        end = store.observed_end_ms()
    markers = store.markers()
    from .model import SessionTimeline

    timeline = SessionTimeline(
        end_ms=end,
        handover_ends_ms=markers.get("handover_ends_ms"),
        sn_enter_ms=markers.get("sn_enter_ms"),
        doctor_enter_ms=markers.get("doctor_enter_ms"),
    )
    return resolve_phase_window(timeline, phase)


def cmd_ingest(args: argparse.Namespace) -> int:
    directory = Path(args.session_dir)
    if not (directory / "manifest.json").exists():
        SessionStore.create(directory, directory.name)
    store = SessionStore.open(directory)
    summary = store.seal(coder=RuleCoder())
    print(
        f"sealed {summary.session_id}: end={summary.end_ms} ms, "
        f"rows={dict(summary.stream_rows)}, clamped={summary.clamped}, "
        f"truncated={dict(summary.truncated)}"
    )
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    service = DebriefService(args.session_root, _params_from(args))
    directory = _session_dir(args.session, args.session_root)
    store = SessionStore.open(directory)
    service._stores[store.session_id] = store
    window = _window_for(args, store)
    data = service.get_analytics(store.session_id, args.viz, window)
    print(canonical_json_pretty(json.loads(data)))
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    service = DebriefService(args.session_root, _params_from(args))
    directory = _session_dir(args.session, args.session_root)
    store = SessionStore.open(directory)
    service._stores[store.session_id] = store
    window = _window_for(args, store)
    data = service.get_analytics(store.session_id, args.viz, window)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        out.write_bytes(data + b"\n")
    else:
        payload = json.loads(data)
        out.write_text(render(args.viz, payload, store.layout))
    print(f"wrote {out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.script is not None:
        script = load_script(args.script)
    else:
        script = random_script(args.seed)
    out_dir = Path(args.out)
    truth = generate_session(script, out_dir)
    print(
        f"generated {script.session_id or 'session'} in {out_dir}: "
        f"{script.duration_ms} ms, cast={[r.value for r in script.cast]}, "
        f"{len(truth.code_sequence)} utterances"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config: dict = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    session_root = args.session_root or config.get(
        "session_root", _env("SESSION_ROOT", "./sessions")
    )
    port = args.port or int(config.get("port", _env("PORT", 8008)))
    params = DEFAULT_PARAMS.replace(**config.get("params", {}))
    _, app = build_service(session_root, params)
    print(f"serving sessions from {session_root} on port {port}")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="debriefkit")
    parser.add_argument(
        "--session-root",
        default=_env("SESSION_ROOT", "./sessions"),
        help="directory holding session subdirectories",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate and seal a session directory")
    p_ingest.add_argument("session_dir")
    p_ingest.set_defaults(func=cmd_ingest)

    p_analyze = sub.add_parser("analyze", help="print an analytics payload")
    p_analyze.add_argument("session")
    p_analyze.add_argument("viz", choices=ANALYZE_VIZ)
    _add_window_flags(p_analyze)
    _add_param_flags(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_export = sub.add_parser("export", help="write payload json or an svg rendering")
    p_export.add_argument("session")
    p_export.add_argument("viz", choices=ANALYZE_VIZ)
    p_export.add_argument("--out", required=True)
    p_export.add_argument(
        "--format", choices=("json", "svg"), default=_env("FORMAT", "json")
    )
    _add_window_flags(p_export)
    _add_param_flags(p_export)
    p_export.set_defaults(func=cmd_export)

    p_sim = sub.add_parser("simulate", help="render a scenario script into a session")
    p_sim.add_argument("script", nargs="?", default=None)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_serve = sub.add_parser("serve", help="run the debrief service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--config", default=_env("CONFIG"))
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DebriefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
