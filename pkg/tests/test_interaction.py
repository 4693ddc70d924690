import random
import sys

import pytest
from hypothesis import given, strategies as st

from conftest import dwell, make_session, utterance
from debriefkit import oracles
from debriefkit.errors import EmptyTextError, FormatError
from debriefkit.interaction import (
    RuleCoder,
    SubprocessCoder,
    code_utterance,
    code_utterances,
    compute_comm_network,
    compute_sociogram,
    detect_f_formations,
)
from debriefkit.model import (
    CodedUtterance,
    CommCode,
    Role,
    TimeWindow,
    VoiceSegment,
    default_layout,
)

A, B, C = Role.PN1, Role.PN2, Role.SN1


def pairs_of(result):
    return {(p.a.value, p.b.value, p.kind.value) for p in result}


# --- detect_f_formations -----------------------------------------------------


def test_face_to_face_exact_bearings():
    result = detect_f_formations({A: (0.0, 0.0, 0.0), B: (1000.0, 0.0, 180.0)})
    assert pairs_of(result) == {("PN1", "PN2", "FACE_TO_FACE")}


def test_side_by_side_close_and_aligned():
    # 600 mm apart, yaw difference 10 degrees; not facing each other
    result = detect_f_formations({A: (0.0, 0.0, 0.0), B: (0.0, 600.0, 10.0)})
    assert pairs_of(result) == {("PN1", "PN2", "SIDE_BY_SIDE")}


def test_no_pair_beyond_face_distance():
    result = detect_f_formations({A: (0.0, 0.0, 0.0), B: (3000.0, 0.0, 180.0)})
    assert result == set()


def test_face_to_face_requires_both_orientations():
    result = detect_f_formations({A: (0.0, 0.0, 0.0), B: (1000.0, 0.0, 90.0)})
    assert result == set()  # B looks sideways, too far for side-by-side


def test_face_to_face_takes_precedence_over_side_by_side():
    # 500 mm apart and facing each other: qualifies for both, face wins
    result = detect_f_formations({A: (0.0, 0.0, 0.0), B: (500.0, 0.0, 180.0)})
    assert pairs_of(result) == {("PN1", "PN2", "FACE_TO_FACE")}


def test_angle_tolerance_is_circular():
    result = detect_f_formations({A: (0.0, 0.0, 350.0), B: (1000.0, 0.0, 170.0)})
    # 350 vs bearing 0 is a 10 degree difference across the wrap
    assert pairs_of(result) == {("PN1", "PN2", "FACE_TO_FACE")}


def test_fixed_entities_waive_orientation():
    layout = default_layout()
    px, py = layout.fixed_entities[Role.PATIENT]
    # nurse one meter from the patient, facing it: the patient has no yaw
    result = detect_f_formations(
        {A: (px - 1000.0, py, 0.0)}, layout=layout
    )
    assert ("PATIENT", "PN1", "FACE_TO_FACE") in pairs_of(result)
    # facing away but within side distance: the yaw-difference test is waived
    result = detect_f_formations({A: (px - 600.0, py, 180.0)}, layout=layout)
    assert pairs_of(result) == {("PATIENT", "PN1", "SIDE_BY_SIDE")} | set()


def test_relation_symmetric_under_input_order():
    rng = random.Random(11)
    for _ in range(200):
        pa = (rng.uniform(0, 4000), rng.uniform(0, 4000), rng.uniform(0, 360))
        pb = (rng.uniform(0, 4000), rng.uniform(0, 4000), rng.uniform(0, 360))
        fwd = detect_f_formations({A: pa, B: pb})
        rev = detect_f_formations({B: pb, A: pa})
        assert pairs_of(fwd) == pairs_of(rev)
        for pair in fwd:
            assert pair.involves(A) and pair.involves(B)
            assert pair.other(A) == B and pair.other(B) == A


# --- compute_sociogram ----------------------------------------------------------


def sociogram_session():
    # A speaks the first 30 s; B appears (tracked) only from t=10s, facing A.
    positions = dwell(A, 1000, 1000, 0, 30_000, yaw=0.0) + dwell(
        B, 2000, 1000, 10_000, 30_000, yaw=180.0
    )
    voice = [VoiceSegment(A, 0, 30_000)]
    return make_session(positions=positions, voice=voice, end_ms=30_000)


def test_sociogram_edge_accrues_only_during_formation():
    session = sociogram_session()
    window = TimeWindow(0, 30_000)
    graph = compute_sociogram(session, window)
    assert graph.nodes[A] == 30_000
    assert graph.edges == {(A, B): 20_000}
    expected = oracles.oracle_sociogram(session, window)
    assert expected["nodes"] == {"PN1": 30_000, "PN2": 0}
    assert expected["edges"] == {("PN1", "PN2"): 20_000}


def test_sociogram_without_voice_is_empty():
    positions = dwell(A, 1000, 1000, 0, 5_000) + dwell(B, 1500, 1000, 0, 5_000)
    session = make_session(positions=positions, end_ms=5_000)
    graph = compute_sociogram(session, TimeWindow(0, 5_000))
    assert graph.nodes == {}
    assert graph.edges == {}


def test_sociogram_fan_out_to_simultaneous_partners():
    positions = (
        dwell(A, 1000, 1000, 0, 10_000, yaw=0.0)
        + dwell(B, 2000, 1000, 0, 10_000, yaw=180.0)
        + dwell(C, 2000, 1400, 0, 10_000, yaw=201.8)
    )
    voice = [VoiceSegment(A, 0, 10_000)]
    session = make_session(positions=positions, voice=voice, end_ms=10_000)
    graph = compute_sociogram(session, TimeWindow(0, 10_000))
    assert graph.edges[(A, B)] == 10_000
    assert graph.edges[(A, C)] == 10_000
    assert graph.nodes[A] == 10_000
    assert graph.nodes[B] == 0 and graph.nodes[C] == 0


def test_sociogram_edges_bounded_by_source_node():
    session = sociogram_session()
    graph = compute_sociogram(session, TimeWindow(0, 30_000))
    for (src, _), ms in graph.edges.items():
        assert ms <= graph.nodes[src]


def test_removing_voice_zeroes_out_edges_only():
    session = sociogram_session()
    window = TimeWindow(0, 30_000)
    graph = compute_sociogram(session, window)
    muted = make_session(
        positions=list(session.positions), voice=[], end_ms=30_000, cast=session.cast
    )
    silent = compute_sociogram(muted, window)
    assert all(src != A for src, _ in silent.edges)
    assert silent.nodes.get(B, 0) == graph.nodes[B]


def test_sociogram_additive_over_tick_aligned_partition():
    session = sociogram_session()
    whole = compute_sociogram(session, TimeWindow(0, 30_000))
    parts = [
        compute_sociogram(session, TimeWindow(0, 7_500)),
        compute_sociogram(session, TimeWindow(7_500, 19_300)),
        compute_sociogram(session, TimeWindow(19_300, 30_000)),
    ]
    summed_nodes = {}
    summed_edges = {}
    for part in parts:
        for role, ms in part.nodes.items():
            summed_nodes[role] = summed_nodes.get(role, 0) + ms
        for key, ms in part.edges.items():
            summed_edges[key] = summed_edges.get(key, 0) + ms
    assert summed_edges == dict(whole.edges)
    assert {r: ms for r, ms in summed_nodes.items() if ms or r in whole.nodes} == dict(
        whole.nodes
    )


def test_sociogram_clips_voice_to_window():
    session = sociogram_session()
    graph = compute_sociogram(session, TimeWindow(5_000, 15_000))
    assert graph.nodes[A] == 10_000
    assert graph.edges[(A, B)] == 5_000  # formation only from 10 s


def test_speaker_with_no_partner_keeps_node_weight():
    positions = dwell(A, 1000, 1000, 0, 5_000)
    voice = [VoiceSegment(A, 0, 5_000)]
    session = make_session(positions=positions, voice=voice, end_ms=5_000)
    graph = compute_sociogram(session, TimeWindow(0, 5_000))
    assert graph.nodes[A] == 5_000
    assert graph.edges == {}


# --- code_utterance ------------------------------------------------------------------


def test_escalation_rule_fires_first():
    assert code_utterance("I'm calling a MET.") == CommCode.ESCALATION
    assert code_utterance("we need a Rapid Response") == CommCode.ESCALATION


def test_task_allocation_precedes_questioning():
    assert code_utterance("Can you do a set of obs on bed two?") == CommCode.TASK_ALLOCATION


def test_acknowledging_exact_lexicon_member():
    assert code_utterance("Okay.") == CommCode.ACKNOWLEDGING
    assert code_utterance("got it, thanks") == CommCode.ACKNOWLEDGING


def test_handover_terms():
    assert code_utterance("The situation is she is deteriorating") == CommCode.HANDOVER
    assert code_utterance("Quick ISBAR before we start") == CommCode.HANDOVER


def test_questioning_by_mark_and_starter():
    assert code_utterance("Where is the obs chart?") == CommCode.QUESTIONING
    assert code_utterance("did she respond to the fluids") == CommCode.QUESTIONING


def test_default_sharing_information():
    assert code_utterance("Her sats are ninety one percent.") == CommCode.SHARING_INFORMATION


def test_acknowledging_requires_word_boundary():
    # "yesterday" must not match the "yes" lexicon entry
    assert code_utterance("Yesterday she was fine.") == CommCode.SHARING_INFORMATION


def test_empty_text_rejected():
    with pytest.raises(EmptyTextError):
        code_utterance("")
    with pytest.raises(EmptyTextError):
        code_utterance("   ")


def test_coding_is_deterministic_and_order_free():
    corpus = [
        "I'm calling a MET.",
        "Can you do a set of obs on bed two?",
        "Okay.",
        "Her sats are ninety one percent.",
        "Where is the obs chart?",
    ]
    first = [code_utterance(t) for t in corpus]
    for _ in range(5):
        shuffled = corpus[:]
        random.Random(0).shuffle(shuffled)
        by_text = {t: code_utterance(t) for t in shuffled}
        assert [by_text[t] for t in corpus] == first


def test_code_utterances_fills_only_missing():
    utts = [
        CodedUtterance(A, TimeWindow(0, 900), "Okay.", None),
        CodedUtterance(B, TimeWindow(1000, 2000), "Okay.", CommCode.ESCALATION),
    ]
    coded = code_utterances(utts, RuleCoder())
    assert coded[0].code == CommCode.ACKNOWLEDGING
    assert coded[1].code == CommCode.ESCALATION  # pre-coded input is kept


EXTERNAL_CODER = (
    "import sys\n"
    "for line in sys.stdin:\n"
    "    print('ESCALATION' if 'now' in line else 'ACKNOWLEDGING', flush=True)\n"
)


def test_subprocess_coder_line_protocol():
    with SubprocessCoder([sys.executable, "-c", EXTERNAL_CODER]) as coder:
        assert coder.code("do it now") == CommCode.ESCALATION
        assert coder.code("fine") == CommCode.ACKNOWLEDGING


def test_subprocess_coder_rejects_unknown_code():
    bad = "import sys\n" "for line in sys.stdin:\n" "    print('NOT_A_CODE', flush=True)\n"
    with SubprocessCoder([sys.executable, "-c", bad]) as coder:
        with pytest.raises(FormatError):
            coder.code("hello")


# --- compute_comm_network ----------------------------------------------------------------


TA, ACK, SI = CommCode.TASK_ALLOCATION, CommCode.ACKNOWLEDGING, CommCode.SHARING_INFORMATION


def utts_with_codes(codes):
    return [utterance(A, 1000 * i, 1000 * i + 900, code) for i, code in enumerate(codes)]


def test_network_pairwise_walk():
    utts = utts_with_codes([TA, ACK, TA, SI])
    window = TimeWindow(0, 10_000)
    net = compute_comm_network(utts, window, window_size=2)
    assert net.node_counts == {TA: 2, ACK: 1, SI: 1}
    assert net.edge_counts == {(ACK, TA): 2, (SI, TA): 1}
    expected = oracles.oracle_network(utts, window, 2)
    assert expected["edge_counts"] == {
        ("ACKNOWLEDGING", "TASK_ALLOCATION"): 2,
        ("SHARING_INFORMATION", "TASK_ALLOCATION"): 1,
    }


def test_network_single_utterance_no_edges():
    net = compute_comm_network(utts_with_codes([TA]), TimeWindow(0, 10_000))
    assert net.node_counts == {TA: 1}
    assert net.edge_counts == {}


def test_network_ignores_self_pairs():
    net = compute_comm_network(utts_with_codes([TA, TA, TA]), TimeWindow(0, 10_000))
    assert net.node_counts == {TA: 3}
    assert net.edge_counts == {}


def test_network_window_filters_by_start_time():
    utts = utts_with_codes([TA, ACK, SI])
    net = compute_comm_network(utts, TimeWindow(1000, 3_000))
    assert net.node_counts == {ACK: 1, SI: 1}
    assert net.edge_counts == {(ACK, SI): 1}


def test_network_wider_window_uses_distinct_codes_present():
    utts = utts_with_codes([TA, ACK, TA])
    net = compute_comm_network(utts, TimeWindow(0, 10_000), window_size=3)
    assert net.edge_counts == {(ACK, TA): 1}


def test_network_skips_uncoded_utterances():
    utts = utts_with_codes([TA, ACK])
    utts.append(CodedUtterance(A, TimeWindow(5_000, 5_900), "hmm", None))
    net = compute_comm_network(utts, TimeWindow(0, 10_000))
    assert sum(net.node_counts.values()) == 2


def test_network_requires_window_size_two():
    with pytest.raises(ValueError):
        compute_comm_network([], TimeWindow(0, 1_000), window_size=1)


@given(
    st.lists(st.sampled_from(list(CommCode)), min_size=0, max_size=60),
    st.integers(2, 4),
)
def test_network_matches_brute_force(codes, window_size):
    utts = utts_with_codes(codes)
    window = TimeWindow(0, 70_000)
    net = compute_comm_network(utts, window, window_size)
    expected = oracles.oracle_network(utts, window, window_size)
    assert {c.value: n for c, n in net.node_counts.items()} == expected["node_counts"]
    assert {(a.value, b.value): n for (a, b), n in net.edge_counts.items()} == expected[
        "edge_counts"
    ]
