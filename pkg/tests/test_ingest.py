import pytest
from hypothesis import given, strategies as st

from debriefkit.errors import FormatError, InvalidSegmentError, NonMonotonicError
from debriefkit.ingest import (
    ParseStats,
    ResampledTrack,
    normalize_voice_segments,
    parse_positions,
    parse_utterances_jsonl,
    parse_voice_jsonl,
    serialize_positions,
    serialize_utterances_jsonl,
    serialize_voice_jsonl,
    ticks_in_window,
)
from debriefkit.model import (
    CommCode,
    PositionSample,
    Role,
    TimeWindow,
    VoiceSegment,
    default_layout,
)

LAYOUT = default_layout()

CSV = """t_ms,entity,x_mm,y_mm,yaw_deg
0,PN1,1000,2000,0.0
100,PN1,1010,2010,5.5
200,PN1,1020,2020,11.0
"""


def test_parse_three_rows_in_order():
    samples = parse_positions(CSV, LAYOUT)
    assert len(samples) == 3
    assert [s.t_ms for s in samples] == [0, 100, 200]
    assert samples[1].yaw_deg == 5.5


def test_parse_applies_clock_offset():
    samples = parse_positions(CSV, LAYOUT, clock_offset_ms=500)
    assert [s.t_ms for s in samples] == [500, 600, 700]


def test_parse_clamps_out_of_bounds_and_counts():
    csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,-20,2000,0.0\n"
    stats = ParseStats()
    samples = parse_positions(csv, LAYOUT, stats=stats)
    assert samples[0].x_mm == 0.0
    assert stats.clamped == 1


def test_parse_rejects_backwards_time():
    csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n1000,PN1,1,1,0\n900,PN1,1,1,0\n"
    with pytest.raises(NonMonotonicError):
        parse_positions(csv, LAYOUT)


def test_parse_tolerates_jitter_within_allowance():
    csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n1000,PN1,1,1,0\n960,PN1,1,1,0\n"
    samples = parse_positions(csv, LAYOUT)
    assert [s.t_ms for s in samples] == [960, 1000]


def test_parse_rejects_bad_header_and_rows():
    with pytest.raises(FormatError):
        parse_positions("time,entity,x,y,yaw\n", LAYOUT)
    with pytest.raises(FormatError):
        parse_positions("t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,1,1\n", LAYOUT)
    with pytest.raises(FormatError):
        parse_positions("t_ms,entity,x_mm,y_mm,yaw_deg\n0,NURSE,1,1,0\n", LAYOUT)


def test_parse_rejects_untracked_role_rows():
    with pytest.raises(FormatError):
        parse_positions("t_ms,entity,x_mm,y_mm,yaw_deg\n0,PATIENT,1,1,0\n", LAYOUT)


def test_parse_normalizes_yaw():
    csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,1,1,370.5\n100,PN1,1,1,-90\n"
    samples = parse_positions(csv, LAYOUT)
    assert samples[0].yaw_deg == pytest.approx(10.5)
    assert samples[1].yaw_deg == pytest.approx(270.0)


@st.composite
def sample_lists(draw):
    roles = draw(st.lists(st.sampled_from([Role.PN1, Role.PN2, Role.SN1]), min_size=1, max_size=3, unique=True))
    out = []
    for role in roles:
        n = draw(st.integers(1, 10))
        t = 0
        for _ in range(n):
            t += draw(st.integers(0, 500))
            out.append(
                PositionSample(
                    t_ms=t,
                    entity=role,
                    x_mm=float(draw(st.integers(0, 10_000))),
                    y_mm=float(draw(st.integers(0, 8_000))),
                    yaw_deg=draw(st.integers(0, 3599)) / 10.0,
                )
            )
    return out


@given(sample_lists())
def test_positions_roundtrip_is_byte_identical(samples):
    text = serialize_positions(samples)
    again = serialize_positions(parse_positions(text, LAYOUT))
    assert again == text


def test_voice_jsonl_roundtrip():
    segments = [
        VoiceSegment(Role.PN1, 0, 1500),
        VoiceSegment(Role.PN2, 100, 800),
        VoiceSegment(Role.PN1, 2000, 2500),
    ]
    text = serialize_voice_jsonl(segments)
    assert '{"entity":"PN1","from_ms":0,"to_ms":1500}' in text
    parsed = parse_voice_jsonl(text)
    assert serialize_voice_jsonl(parsed) == text


def test_voice_jsonl_rejects_inverted_segment():
    with pytest.raises(InvalidSegmentError):
        parse_voice_jsonl('{"entity":"PN1","from_ms":100,"to_ms":100}\n')


def test_utterances_roundtrip_with_optional_code():
    text = (
        '{"entity":"PN1","from_ms":0,"to_ms":900,"text":"Okay.","code":"ACKNOWLEDGING"}\n'
        '{"entity":"PN2","from_ms":1000,"to_ms":2200,"text":"BP is low."}\n'
    )
    parsed = parse_utterances_jsonl(text)
    assert parsed[0].code == CommCode.ACKNOWLEDGING
    assert parsed[1].code is None
    canonical = serialize_utterances_jsonl(parsed)
    assert serialize_utterances_jsonl(parse_utterances_jsonl(canonical)) == canonical
    assert '"text":"BP is low."' in canonical


def test_normalize_merges_overlap():
    segs = [VoiceSegment(Role.PN1, 0, 100), VoiceSegment(Role.PN1, 50, 150)]
    assert normalize_voice_segments(segs) == [VoiceSegment(Role.PN1, 0, 150)]


def test_normalize_empty():
    assert normalize_voice_segments([]) == []


def test_normalize_merges_adjacent():
    # brute-force check: the union covers exactly the same set of milliseconds
    segs = [VoiceSegment(Role.PN1, 0, 100), VoiceSegment(Role.PN1, 100, 200)]
    merged = normalize_voice_segments(segs)
    covered = set()
    for s in segs:
        covered.update(range(s.from_ms, s.to_ms))
    merged_covered = set()
    for s in merged:
        merged_covered.update(range(s.from_ms, s.to_ms))
    assert merged == [VoiceSegment(Role.PN1, 0, 200)]
    assert merged_covered == covered


def test_normalize_rejects_mixed_entities():
    with pytest.raises(InvalidSegmentError):
        normalize_voice_segments(
            [VoiceSegment(Role.PN1, 0, 10), VoiceSegment(Role.PN2, 0, 10)]
        )


@given(
    st.lists(
        st.tuples(st.integers(0, 5000), st.integers(1, 800)),
        min_size=0,
        max_size=20,
    )
)
def test_normalize_output_disjoint_sorted_never_longer(raw):
    segs = [VoiceSegment(Role.PN1, a, a + d) for a, d in raw]
    merged = normalize_voice_segments(segs)
    for prev, cur in zip(merged, merged[1:]):
        assert prev.to_ms < cur.from_ms  # disjoint and sorted, gaps preserved
    covered = set()
    for s in segs:
        covered.update(range(s.from_ms, s.to_ms))
    assert sum(s.to_ms - s.from_ms for s in merged) == len(covered)


def test_ticks_in_window_grid_alignment():
    assert list(ticks_in_window(TimeWindow(0, 1000), 100)) == list(range(0, 1000, 100))
    assert list(ticks_in_window(TimeWindow(250, 600), 100)) == [300, 400, 500]
    assert list(ticks_in_window(TimeWindow(300, 301), 100)) == [300]
    assert list(ticks_in_window(TimeWindow(301, 400), 100)) == []
    assert list(ticks_in_window(TimeWindow(500, 500), 100)) == []


def test_resampled_track_locf_and_staleness():
    samples = [
        PositionSample(0, Role.PN1, 1.0, 2.0, 0.0),
        PositionSample(1000, Role.PN1, 5.0, 6.0, 90.0),
    ]
    trk = ResampledTrack(samples, staleness_ms=2000)
    assert trk.at(0).x_mm == 1.0
    assert trk.at(999).x_mm == 1.0
    assert trk.at(1000).x_mm == 5.0
    assert trk.at(3000).x_mm == 5.0  # exactly at cutoff is still fresh
    assert trk.at(3001) is None
    assert trk.at(-1) is None
