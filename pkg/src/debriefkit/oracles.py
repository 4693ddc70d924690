"""Independent brute-force re-computations of every analytic.

These deliberately share no code with the analytics modules (spatial,
interaction, vad): each rule is re-evaluated here with direct nested loops
over ticks, members and milliseconds, and results come back as plain dicts.
Meant for small sessions; the test campaign holds them against the engine.
"""

from __future__ import annotations

import math

from .model import AnalyticsParams, DEFAULT_PARAMS, Role, TimeWindow
from .store import Session

_BEHAVIORS = (
    "TOGETHER_PRIMARY",
    "TOGETHER_SECONDARY",
    "INDIVIDUAL_PRIMARY",
    "INDIVIDUAL_SECONDARY",
    "TRANSITIONS",
    "TEAM_DISCUSSION",
    "UNCLASSIFIED",
)



def _grid_ticks(window: TimeWindow, tick_ms: int) -> list[int]:
    # every multiple of tick_ms inside [from, to)
    return [t for t in range(0, window.to_ms, tick_ms) if t >= window.from_ms]


def _samples_by_entity(session: Session) -> dict[Role, list]:
    grouped: dict[Role, list] = {}
    for s in session.positions:
        grouped.setdefault(s.entity, []).append(s)
    for group in grouped.values():
        group.sort(key=lambda s: s.t_ms)
    return grouped


def _locf_series(samples: list, ticks: list[int], staleness_ms: int) -> list:
    """Carry the last observation forward over an increasing tick list."""
    series = []
    idx = -1
    for t in ticks:
        while idx + 1 < len(samples) and samples[idx + 1].t_ms <= t:
            idx += 1
        if idx < 0 or t - samples[idx].t_ms > staleness_ms:
            series.append(None)
        else:
            s = samples[idx]
            series.append((s.x_mm, s.y_mm, s.yaw_deg))
    return series


def _circular_diff(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def _pair_formation(pa, pb, params: AnalyticsParams) -> str | None:
    """Formation kind of one pair, orientation tests waived for fixed entities."""
    dx = pb[0] - pa[0]
    dy = pb[1] - pa[1]
    d2 = dx * dx + dy * dy
    if d2 <= params.dist_face_mm * params.dist_face_mm:
        ok = True
        if pa[2] is not None:
            bearing_ab = math.degrees(math.atan2(dy, dx)) % 360.0
            ok = _circular_diff(pa[2], bearing_ab) <= params.angle_tol_deg
        if ok and pb[2] is not None:
            bearing_ba = math.degrees(math.atan2(-dy, -dx)) % 360.0
            ok = _circular_diff(pb[2], bearing_ba) <= params.angle_tol_deg
        if ok:
            return "FACE_TO_FACE"
    if d2 <= params.dist_side_mm * params.dist_side_mm:
        if pa[2] is None or pb[2] is None or _circular_diff(pa[2], pb[2]) <= params.angle_tol_deg:
            return "SIDE_BY_SIDE"
    return None


def oracle_priority(
    session: Session,
    window: TimeWindow,
    params: AnalyticsParams = DEFAULT_PARAMS,
) -> dict:
    """Tick-by-tick tally of the seven behaviours."""
    layout = session.layout
    members = sorted((r for r in session.cast if r.team_member), key=lambda r: r.value)
    ticks = _grid_ticks(window, params.tick_ms)
    counts = {b: 0 for b in _BEHAVIORS}
    member_ticks = len(ticks) * len(members)
    if member_ticks == 0:
        return {
            "fractions": {b: 0.0 for b in _BEHAVIORS},
            "tick_count": len(ticks),
            "member_ticks": 0,
            "empty": True,
        }
    samples = _samples_by_entity(session)
    series = {
        m: _locf_series(samples.get(m, []), ticks, params.staleness_ms) for m in members
    }
    prev_ticks = [t - params.tick_ms for t in ticks]
    prev_series = {
        m: _locf_series(samples.get(m, []), prev_ticks, params.staleness_ms)
        for m in members
    }
    primary = None
    for bed in layout.beds:
        if bed.bed_id == layout.primary_bed_id:
            primary = bed
    limit = params.speed_threshold_mm_s * params.tick_ms / 1000.0

    for i, _t in enumerate(ticks):
        positions = {}
        states: dict[Role, str] = {}
        for m in members:
            pos = series[m][i]
            positions[m] = pos
            if pos is None:
                states[m] = "UNTRACKED"
                continue
            x, y, _ = pos
            dxp = x - primary.center_mm[0]
            dyp = y - primary.center_mm[1]
            if dxp * dxp + dyp * dyp <= primary.radius_mm * primary.radius_mm:
                states[m] = "AT_PRIMARY"
                continue
            secondary = False
            for bed in layout.beds:
                if bed.bed_id == layout.primary_bed_id:
                    continue
                dx = x - bed.center_mm[0]
                dy = y - bed.center_mm[1]
                if dx * dx + dy * dy <= bed.radius_mm * bed.radius_mm:
                    secondary = True
                    break
            if secondary:
                states[m] = "AT_SECONDARY"
                continue
            prev = prev_series[m][i]
            if prev is not None:
                mx = x - prev[0]
                my = y - prev[1]
                if mx * mx + my * my > limit * limit:
                    states[m] = "TRANSITIONING"
                    continue
            states[m] = "IDLE"

        idle = [m for m in members if states[m] == "IDLE"]
        discussing: set[Role] = set()
        for a_i in range(len(idle)):
            for b_i in range(a_i + 1, len(idle)):
                a, b = idle[a_i], idle[b_i]
                if _pair_formation(positions[a], positions[b], params) is not None:
                    discussing.add(a)
                    discussing.add(b)

        n_primary = sum(1 for m in members if states[m] == "AT_PRIMARY")
        n_secondary = sum(1 for m in members if states[m] == "AT_SECONDARY")
        for m in members:
            state = states[m]
            if state == "AT_PRIMARY":
                counts["TOGETHER_PRIMARY" if n_primary >= 2 else "INDIVIDUAL_PRIMARY"] += 1
            elif state == "AT_SECONDARY":
                counts["TOGETHER_SECONDARY" if n_secondary >= 2 else "INDIVIDUAL_SECONDARY"] += 1
            elif state == "TRANSITIONING":
                counts["TRANSITIONS"] += 1
            elif m in discussing:
                counts["TEAM_DISCUSSION"] += 1
            else:
                counts["UNCLASSIFIED"] += 1

    return {
        "fractions": {b: counts[b] / member_ticks for b in _BEHAVIORS},
        "tick_count": len(ticks),
        "member_ticks": member_ticks,
        "empty": False,
    }


def oracle_wardmap(
    session: Session,
    window: TimeWindow,
    params: AnalyticsParams = DEFAULT_PARAMS,
    hex_radius_mm: float | None = None,
) -> dict:
    """Per-entity hex cells keyed (entity, q, r) -> (count, voice_fraction, filled)."""
    radius = hex_radius_mm if hex_radius_mm is not None else params.hex_radius_mm
    samples = _samples_by_entity(session)
    ticks = _grid_ticks(window, params.tick_ms)
    sqrt3_over_3 = math.sqrt(3.0) / 3.0
    cells: dict[tuple[str, int, int], list[int]] = {}
    for entity in sorted(samples, key=lambda r: r.value):
        segs = session.voice_of(entity)
        series = _locf_series(samples[entity], ticks, params.staleness_ms)
        for i, t in enumerate(ticks):
            pos = series[i]
            if pos is None:
                continue
            x, y, _ = pos
            qf = (sqrt3_over_3 * x - (1.0 / 3.0) * y) / radius
            rf = ((2.0 / 3.0) * y) / radius
            xf, zf = qf, rf
            yf = -xf - zf
            rx, ry, rz = round(xf), round(yf), round(zf)
            ddx, ddy, ddz = abs(rx - xf), abs(ry - yf), abs(rz - zf)
            if ddx > ddy and ddx > ddz:
                rx = -ry - rz
            elif ddy > ddz:
                ry = -rx - rz
            else:
                rz = -rx - ry
            key = (entity.value, int(rx), int(rz))
            bucket = cells.setdefault(key, [0, 0])
            bucket[0] += 1
            voiced = False
            for seg in segs:
                if seg.from_ms <= t < seg.to_ms:
                    voiced = True
                    break
            if voiced:
                bucket[1] += 1
    return {
        key: (count, voiced / count, voiced / count > 0.5)
        for key, (count, voiced) in sorted(cells.items())
    }


def oracle_sociogram(
    session: Session,
    window: TimeWindow,
    params: AnalyticsParams = DEFAULT_PARAMS,
) -> dict:
    """Millisecond-by-millisecond walk of every voice segment."""
    samples = _samples_by_entity(session)
    tick = params.tick_ms

    nodes: dict[str, int] = {}
    for entity in sorted(session.voice, key=lambda r: r.value):
        total = 0
        for seg in session.voice_of(entity):
            lo = max(seg.from_ms, window.from_ms)
            hi = min(seg.to_ms, window.to_ms)
            if lo < hi:
                total += hi - lo
        if total > 0:
            nodes[entity.value] = total

    # Enclosing ticks of any ms in the window start at floor(from / tick).
    if window.is_empty():
        cover: list[int] = []
    else:
        cover = list(range((window.from_ms // tick) * tick, window.to_ms, tick))
    cover_index = {t: i for i, t in enumerate(cover)}
    roles = sorted(samples, key=lambda r: r.value)
    series = {
        role: _locf_series(samples[role], cover, params.staleness_ms) for role in roles
    }

    partner_cache: dict[int, dict[Role, list[Role]]] = {}

    def partners_at(t: int) -> dict[Role, list[Role]]:
        cached = partner_cache.get(t)
        if cached is not None:
            return cached
        i = cover_index[t]
        snapshot: dict[Role, tuple[float, float, float | None]] = {}
        for role in roles:
            pos = series[role][i]
            if pos is not None:
                snapshot[role] = pos
        for role, point in session.layout.fixed_entities.items():
            if role not in snapshot:
                snapshot[role] = (point[0], point[1], None)
        result: dict[Role, list[Role]] = {}
        present = sorted(snapshot, key=lambda r: r.value)
        for a_i in range(len(present)):
            for b_i in range(a_i + 1, len(present)):
                a, b = present[a_i], present[b_i]
                if _pair_formation(snapshot[a], snapshot[b], params) is not None:
                    result.setdefault(a, []).append(b)
                    result.setdefault(b, []).append(a)
        partner_cache[t] = result
        return result

    edges: dict[tuple[str, str], int] = {}
    for entity in sorted(session.voice, key=lambda r: r.value):
        for seg in session.voice_of(entity):
            lo = max(seg.from_ms, window.from_ms)
            hi = min(seg.to_ms, window.to_ms)
            for m in range(lo, hi):
                t = m - (m % tick)
                for partner in partners_at(t).get(entity, ()):
                    key = (entity.value, partner.value)
                    edges[key] = edges.get(key, 0) + 1

    for a, b in edges:
        nodes.setdefault(b, 0)
        nodes.setdefault(a, 0)
    return {"nodes": nodes, "edges": edges}


def oracle_network(
    utterances,
    window: TimeWindow,
    window_size: int = 2,
) -> dict:
    """Explicit enumeration of consecutive utterance windows and code pairs."""
    rows = sorted(
        (u for u in utterances if u.code is not None and window.contains(u.window.from_ms)),
        key=lambda u: u.window.from_ms,
    )
    codes = [u.code.value for u in rows]
    node_counts: dict[str, int] = {}
    for c in codes:
        node_counts[c] = node_counts.get(c, 0) + 1
    edge_counts: dict[tuple[str, str], int] = {}
    for start in range(0, len(codes) - window_size + 1):
        present: list[str] = []
        for c in codes[start : start + window_size]:
            if c not in present:
                present.append(c)
        present.sort()
        for i in range(len(present)):
            for j in range(i + 1, len(present)):
                key = (present[i], present[j])
                edge_counts[key] = edge_counts.get(key, 0) + 1
    return {"node_counts": node_counts, "edge_counts": edge_counts}
