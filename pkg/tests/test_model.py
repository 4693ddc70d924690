import json

import pytest
from hypothesis import given, strategies as st

from debriefkit.errors import LayoutError, PhaseUnsetError, TimelineError, WindowError
from debriefkit.model import (
    DEFAULT_COLORS,
    TEAM_ROLES,
    Bed,
    Phase,
    Role,
    SessionTimeline,
    TimeWindow,
    WardLayout,
    default_layout,
    entity_color,
    resolve_phase_window,
)

FULL = SessionTimeline(
    end_ms=1_500_000,
    handover_ends_ms=300_000,
    sn_enter_ms=600_000,
    doctor_enter_ms=900_000,
)


def test_resolve_all_is_whole_session():
    assert resolve_phase_window(FULL, Phase.ALL) == TimeWindow(0, 1_500_000)


def test_resolve_p2_spans_to_next_marker():
    # marker-to-next-marker rule, cross-checked by hand enumeration
    assert resolve_phase_window(FULL, Phase.P2_SN_ENTER) == TimeWindow(600_000, 900_000)


def test_resolve_p3_extends_to_end():
    assert resolve_phase_window(FULL, Phase.P3_DOCTOR_ENTER) == TimeWindow(900_000, 1_500_000)


def test_resolve_unset_phase_raises():
    timeline = SessionTimeline(end_ms=100_000, handover_ends_ms=10_000)
    with pytest.raises(PhaseUnsetError):
        resolve_phase_window(timeline, Phase.P2_SN_ENTER)


def test_resolve_named_phase_skips_unset_successor():
    timeline = SessionTimeline(end_ms=100_000, handover_ends_ms=10_000, sn_enter_ms=40_000)
    assert resolve_phase_window(timeline, Phase.P2_SN_ENTER) == TimeWindow(40_000, 100_000)


@given(
    st.builds(
        lambda a, b, c, end: (a, a + b, a + b + c, a + b + c + end),
        st.integers(0, 10_000),
        st.integers(0, 10_000),
        st.integers(0, 10_000),
        st.integers(1, 10_000),
    )
)
def test_phase_windows_partition_session(markers):
    handover, sn, doctor, end = markers
    timeline = SessionTimeline(
        end_ms=end, handover_ends_ms=handover, sn_enter_ms=sn, doctor_enter_ms=doctor
    )
    parts = [TimeWindow(0, handover)] + [
        resolve_phase_window(timeline, p)
        for p in (Phase.P1_HANDOVER_ENDS, Phase.P2_SN_ENTER, Phase.P3_DOCTOR_ENTER)
    ]
    # no gap, no overlap: consecutive bounds chain exactly from 0 to end
    assert parts[0].from_ms == 0
    for prev, cur in zip(parts, parts[1:]):
        assert prev.to_ms == cur.from_ms
    assert parts[-1].to_ms == end
    total = resolve_phase_window(timeline, Phase.ALL)
    assert sum(p.duration_ms for p in parts) == total.duration_ms


def test_timeline_rejects_disorder():
    with pytest.raises(TimelineError):
        SessionTimeline(end_ms=1000, handover_ends_ms=500, sn_enter_ms=400)
    with pytest.raises(TimelineError):
        SessionTimeline(end_ms=1000, handover_ends_ms=1500)


def test_timeline_rejects_later_marker_without_earlier():
    with pytest.raises(TimelineError):
        SessionTimeline(end_ms=1000, sn_enter_ms=500)
    with pytest.raises(TimelineError):
        SessionTimeline(
            end_ms=1000, handover_ends_ms=100, doctor_enter_ms=900
        )


def test_entity_color_paper_assignments():
    assert entity_color(Role.SN1) == "green"
    assert entity_color(Role.PN1) == "red"
    assert entity_color(Role.PN2) == "blue"
    assert entity_color(Role.SN2) == "yellow"


def test_entity_color_default_and_override():
    assert entity_color(Role.DOCTOR) == "purple"
    assert entity_color(Role.DOCTOR, {Role.DOCTOR: "teal"}) == "teal"


def test_entity_color_total_and_injective_over_team():
    colors = [entity_color(r) for r in Role]
    assert len(colors) == 7
    team = [entity_color(r) for r in TEAM_ROLES]
    assert len(set(team)) == len(team)


def test_time_window_validation():
    with pytest.raises(WindowError):
        TimeWindow(10, 5)
    with pytest.raises(WindowError):
        TimeWindow(-1, 5)
    assert TimeWindow(5, 5).is_empty()


def test_window_overlap():
    w = TimeWindow(100, 200)
    assert w.overlap_ms(0, 150) == 50
    assert w.overlap_ms(150, 400) == 50
    assert w.overlap_ms(0, 400) == 100
    assert w.overlap_ms(200, 300) == 0


def test_layout_roundtrip_uses_documented_keys():
    layout = default_layout()
    data = layout.to_dict()
    assert set(data) >= {
        "room_mm",
        "beds",
        "primary_bed_id",
        "fixed_entities",
        "image_px",
        "mm_per_px",
    }
    assert data["beds"][0].keys() == {"id", "center_mm", "radius_mm"}
    again = WardLayout.from_dict(json.loads(json.dumps(data)))
    assert again == layout


def test_layout_rejects_primary_overlap():
    with pytest.raises(LayoutError):
        WardLayout(
            room_mm=(10_000, 8_000),
            beds=(
                Bed(1, (5000.0, 2500.0), 1000.0),
                Bed(4, (5000.0, 4000.0), 1300.0),  # overlaps bed 1
            ),
            primary_bed_id=4,
        )


def test_layout_rejects_bed_outside_room():
    with pytest.raises(LayoutError):
        WardLayout(
            room_mm=(10_000, 8_000),
            beds=(Bed(4, (11_000.0, 2000.0), 1000.0),),
            primary_bed_id=4,
        )


def test_layout_rejects_missing_primary_and_bad_scale():
    with pytest.raises(LayoutError):
        WardLayout(room_mm=(10_000, 8_000), beds=(Bed(1, (500.0, 500.0), 400.0),), primary_bed_id=4)
    with pytest.raises(LayoutError):
        WardLayout(
            room_mm=(10_000, 8_000),
            beds=(Bed(4, (500.0, 500.0), 400.0),),
            primary_bed_id=4,
            mm_per_px=0,
        )


def test_role_flags():
    assert all(r.team_member for r in TEAM_ROLES)
    assert not Role.PATIENT.team_member and not Role.DOCTOR.team_member
    assert Role.DOCTOR.wears_tag
    assert not Role.RELATIVE.wears_tag


def test_default_colors_cover_all_roles():
    assert set(DEFAULT_COLORS) == set(Role)
