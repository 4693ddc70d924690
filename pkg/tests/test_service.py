import json
import random

import pytest
from fastapi.testclient import TestClient

from debriefkit import oracles
from debriefkit.errors import (
    SessionClosedError,
    TooManyItemsError,
    UnknownVizError,
    WindowError,
)
from debriefkit.ingest import serialize_positions, serialize_voice_jsonl
from debriefkit.model import (
    PositionSample,
    Role,
    SessionTimeline,
    TimeWindow,
    VoiceSegment,
)
from debriefkit.scenario import random_script, generate_session
from debriefkit.service import (
    ShareItem,
    ShareState,
    apply_share,
    build_service,
    snippet_range,
)

TIMELINE = SessionTimeline(
    end_ms=1_500_000,
    handover_ends_ms=300_000,
    sn_enter_ms=600_000,
    doctor_enter_ms=900_000,
)


# --- snippet_range ------------------------------------------------------------


def test_snippet_nominal():
    assert snippet_range(723_000, TIMELINE).to_dict() == {
        "from_ms": 718_000,
        "to_ms": 738_000,
    }


def test_snippet_start_clamp_shrinks():
    s = snippet_range(2_000, TIMELINE)
    assert (s.from_ms, s.to_ms) == (0, 17_000)


def test_snippet_end_clamp():
    s = snippet_range(1_499_000, TIMELINE)
    assert (s.from_ms, s.to_ms) == (1_494_000, 1_500_000)


def test_snippet_duration_bounded():
    for t in (0, 1, 5_000, 750_000, 1_500_000):
        s = snippet_range(t, TIMELINE)
        assert 0 <= s.from_ms <= s.to_ms <= 1_500_000
        assert s.to_ms - s.from_ms <= 20_000


def test_snippet_outside_session_rejected():
    with pytest.raises(WindowError):
        snippet_range(2_000_000, TIMELINE)


# --- apply_share -------------------------------------------------------------------


def item(viz, from_ms=0, to_ms=1_500_000):
    return ShareItem(viz, TimeWindow(from_ms, to_ms))


def test_share_onto_empty_state():
    state = ShareState(session_id="s")
    state = apply_share(state, [item("sociogram")])
    assert [i.viz_id for i in state.items] == ["sociogram"]
    assert state.revision == 1


def test_share_four_items_rejected_state_unchanged():
    state = ShareState(session_id="s")
    with pytest.raises(TooManyItemsError):
        apply_share(state, [item("priority"), item("wardmap"), item("sociogram"), item("network")])
    assert state.revision == 0 and state.items == ()


def test_share_then_unshare_replay():
    # replay the whole mutation log: share, share two, unshare
    state = ShareState(session_id="s")
    state = apply_share(state, [item("sociogram")])
    state = apply_share(state, [item("priority", 600_000, 900_000), item("wardmap", 600_000, 900_000)])
    state = apply_share(state, [])
    assert state.items == ()
    assert state.revision == 3


def test_share_unknown_viz_rejected():
    with pytest.raises(UnknownVizError):
        apply_share(ShareState(session_id="s"), [item("scatterplot")])


# --- service over HTTP ----------------------------------------------------------------


@pytest.fixture(scope="module")
def fixture_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("sessions")
    script = random_script(123)
    generate_session(script, root / "fixtureA")
    return root


@pytest.fixture()
def client(fixture_root):
    service, app = build_service(fixture_root)
    with TestClient(app) as client:
        client.service = service
        yield client


@pytest.fixture()
def sealed_client(client):
    # fixtureA may already be sealed by an earlier test in this module
    store = client.service.store("fixtureA")
    if not store.sealed:
        assert client.post("/sessions/fixtureA/seal", json={}).status_code == 200
    return client


def test_create_upload_seal_flow(client, tmp_path):
    response = client.post("/sessions", json={"session_id": "manual-1"})
    assert response.status_code == 200
    positions = serialize_positions(
        [PositionSample(t, Role.PN1, 5000.0, 1700.0, 0.0) for t in range(0, 5_000, 100)]
    )
    r = client.post("/sessions/manual-1/streams/positions", content=positions.encode())
    assert r.json()["rows"] == 50
    voice = serialize_voice_jsonl([VoiceSegment(Role.PN1, 0, 2_000)])
    assert client.post("/sessions/manual-1/streams/voice", content=voice.encode()).status_code == 200
    utts = '{"entity":"PN1","from_ms":0,"to_ms":900,"text":"Okay."}\n'
    assert client.post("/sessions/manual-1/streams/utterances", content=utts.encode()).status_code == 200
    sealed = client.post("/sessions/manual-1/seal", json={"end_ms": 5_000}).json()
    assert sealed["end_ms"] == 5_000
    assert sealed["stream_rows"]["positions"] == 50
    timeline = client.get("/sessions/manual-1/timeline").json()
    assert timeline["status"] == "sealed"
    assert timeline["end_ms"] == 5_000
    payload = client.get(
        "/sessions/manual-1/analytics/priority", params={"from_ms": 0, "to_ms": 5_000}
    ).json()
    assert payload["fractions"]["INDIVIDUAL_PRIMARY"] == 1.0


def test_analytics_requires_sealed_session(client):
    client.post("/sessions", json={"session_id": "rec-1", "end_ms": 10_000})
    r = client.get("/sessions/rec-1/analytics/priority", params={"from_ms": 0, "to_ms": 100})
    assert r.status_code == 409
    assert r.json()["error"]["type"] == "NotSealedError"


def test_unknown_session_404(client):
    r = client.get("/sessions/ghost/timeline")
    assert r.status_code == 404


def test_analytics_unknown_viz_404(sealed_client):
    r = sealed_client.get(
        "/sessions/fixtureA/analytics/scatter", params={"from_ms": 0, "to_ms": 100}
    )
    assert r.status_code == 404
    assert r.json()["error"]["type"] == "UnknownVizError"


def test_analytics_invalid_window_422(sealed_client):
    r = sealed_client.get(
        "/sessions/fixtureA/analytics/priority", params={"from_ms": 500, "to_ms": 100}
    )
    assert r.status_code == 422
    r = sealed_client.get(
        "/sessions/fixtureA/analytics/priority",
        params={"from_ms": 0, "to_ms": 99_999_999},
    )
    assert r.status_code == 422


def test_analytics_bytes_deterministic_and_match_goldens(sealed_client):
    session = sealed_client.service.session("fixtureA")
    end = session.timeline.end_ms
    for viz in ("priority", "wardmap", "sociogram", "network"):
        r1 = sealed_client.get(
            f"/sessions/fixtureA/analytics/{viz}", params={"from_ms": 0, "to_ms": end}
        )
        r2 = sealed_client.get(
            f"/sessions/fixtureA/analytics/{viz}", params={"from_ms": 0, "to_ms": end}
        )
        assert r1.content == r2.content
    # golden check: the served sociogram equals the independent oracle
    payload = json.loads(
        sealed_client.get(
            "/sessions/fixtureA/analytics/sociogram", params={"from_ms": 0, "to_ms": end}
        ).content
    )
    expected = oracles.oracle_sociogram(session, TimeWindow(0, end))
    assert payload["nodes"] == expected["nodes"]
    assert {(e["from"], e["to"]): e["ms"] for e in payload["edges"]} == expected["edges"]
    net = json.loads(
        sealed_client.get(
            "/sessions/fixtureA/analytics/network", params={"from_ms": 0, "to_ms": end}
        ).content
    )
    exp_net = oracles.oracle_network(session.utterances, TimeWindow(0, end), 2)
    assert net["node_counts"] == exp_net["node_counts"]


def test_annotation_endpoints(client):
    client.post("/sessions", json={"session_id": "ann-1", "end_ms": 1_000_000})
    r = client.post(
        "/sessions/ann-1/annotations",
        json={"kind": "PHASE_TAG", "phase": "P1_HANDOVER_ENDS", "t_ms": 100_000},
    )
    assert r.status_code == 200
    r = client.post(
        "/sessions/ann-1/annotations",
        json={"kind": "PHASE_TAG", "phase": "P3_DOCTOR_ENTER", "t_ms": 50_000},
    )
    assert r.status_code == 409
    assert r.json()["error"]["type"] == "OutOfOrderError"
    r = client.post(
        "/sessions/ann-1/annotations",
        json={"kind": "ACTION_TAG", "action_id": "met_called", "t_ms": 200_000, "favorite": True},
    )
    assert r.status_code == 200
    r = client.post(
        "/sessions/ann-1/annotations",
        json={"kind": "ACTION_TAG", "action_id": "nope", "t_ms": 1_000},
    )
    assert r.status_code == 404
    listed = client.get("/sessions/ann-1/annotations").json()
    assert [a["t_ms"] for a in listed] == [100_000, 200_000]
    favorites = client.get(
        "/sessions/ann-1/annotations", params={"favorites_only": "true"}
    ).json()
    assert len(favorites) == 1 and favorites[0]["action_id"] == "met_called"
    timeline = client.get("/sessions/ann-1/timeline").json()
    assert timeline["handover_ends_ms"] == 100_000


def test_snippet_endpoint(client):
    client.post("/sessions", json={"session_id": "snip-1", "end_ms": 1_500_000})
    r = client.get("/sessions/snip-1/snippet", params={"at_ms": 723_000})
    assert r.json() == {"from_ms": 718_000, "to_ms": 738_000}
    r = client.get("/sessions/snip-1/snippet", params={"at_ms": 2_000})
    assert r.json() == {"from_ms": 0, "to_ms": 17_000}


def test_interactions_append_order_and_close(client):
    client.post("/sessions", json={"session_id": "int-1", "end_ms": 10_000})
    for i in range(100):
        r = client.post(
            "/sessions/int-1/interactions",
            json={"actor": "t1", "event": "select_phase", "payload": {"phase": "ALL", "i": i}},
        )
        assert r.status_code == 200
    store = client.service.store("int-1")
    lines = store.interactions_path().read_text().splitlines()
    assert len(lines) == 100
    assert [json.loads(l)["payload"]["i"] for l in lines] == list(range(100))
    assert client.post("/sessions/int-1/debrief/close").status_code == 200
    r = client.post(
        "/sessions/int-1/interactions",
        json={"actor": "t1", "event": "share", "payload": {}},
    )
    assert r.status_code == 409
    assert r.json()["error"]["type"] == "SessionClosedError"
    with pytest.raises(SessionClosedError):
        client.service.room("int-1").log_interaction({"event": "share"})


def test_interactions_reject_unknown_event(client):
    client.post("/sessions", json={"session_id": "int-2", "end_ms": 10_000})
    r = client.post(
        "/sessions/int-2/interactions", json={"actor": "t1", "event": "dance"}
    )
    assert r.status_code == 404 or r.status_code == 400


def test_catalog_endpoint(client):
    client.post("/sessions", json={"session_id": "cat-1"})
    data = client.get("/sessions/cat-1/catalog").json()
    assert any(a["action_id"] == "met_called" for a in data["actions"])


# --- broadcast protocol -----------------------------------------------------------------


def ws_path(session_id):
    return f"/ws/debrief/{session_id}"


def test_share_fans_out_to_all_screens_and_control(sealed_client):
    c = sealed_client
    with c.websocket_connect(ws_path("fixtureA")) as control, c.websocket_connect(
        ws_path("fixtureA")
    ) as screen1, c.websocket_connect(ws_path("fixtureA")) as screen2:
        for ws in (control, screen1, screen2):
            first = ws.receive_json()
            assert first["type"] == "state"
        base_rev = first["revision"]
        control.send_json(
            {
                "type": "share",
                "items": [{"viz": "sociogram", "from_ms": 0, "to_ms": 1_000}],
            }
        )
        for ws in (control, screen1, screen2):
            msg = ws.receive_json()
            assert msg["revision"] == base_rev + 1
            assert [i["viz"] for i in msg["items"]] == ["sociogram"]
        control.send_json({"type": "unshare"})
        for ws in (control, screen1, screen2):
            msg = ws.receive_json()
            assert msg["revision"] == base_rev + 2
            assert msg["items"] == []


def test_share_of_four_items_rejected_only_to_sender(sealed_client):
    c = sealed_client
    with c.websocket_connect(ws_path("fixtureA")) as control, c.websocket_connect(
        ws_path("fixtureA")
    ) as screen:
        control.receive_json()
        joined = screen.receive_json()
        items = [
            {"viz": v, "from_ms": 0, "to_ms": 1_000}
            for v in ("priority", "wardmap", "sociogram", "network")
        ]
        control.send_json({"type": "share", "items": items})
        err = control.receive_json()
        assert err["type"] == "error"
        assert err["error"] == "TooManyItemsError"
        # state unchanged: a subsequent valid share is exactly one revision later
        control.send_json(
            {"type": "share", "items": [{"viz": "priority", "from_ms": 0, "to_ms": 1_000}]}
        )
        after = screen.receive_json()
        assert after["revision"] == joined["revision"] + 1


def test_late_joiner_receives_current_state(sealed_client):
    c = sealed_client
    with c.websocket_connect(ws_path("fixtureA")) as control:
        control.receive_json()
        control.send_json(
            {
                "type": "share",
                "items": [
                    {"viz": "priority", "from_ms": 0, "to_ms": 1_000},
                    {"viz": "wardmap", "from_ms": 0, "to_ms": 1_000},
                ],
            }
        )
        shared = control.receive_json()
        with c.websocket_connect(ws_path("fixtureA")) as late:
            joined = late.receive_json()
            assert joined["revision"] == shared["revision"]
            assert joined["items"] == shared["items"]


def test_play_snippet_broadcasts_snippet_item(sealed_client):
    c = sealed_client
    with c.websocket_connect(ws_path("fixtureA")) as control, c.websocket_connect(
        ws_path("fixtureA")
    ) as screen:
        control.receive_json()
        screen.receive_json()
        control.send_json({"type": "play_snippet", "from_ms": 10_000, "to_ms": 30_000})
        msg = screen.receive_json()
        assert msg["items"] == [{"viz": "snippet", "from_ms": 10_000, "to_ms": 30_000}]


def test_unknown_message_type_errors_without_revision_bump(sealed_client):
    c = sealed_client
    with c.websocket_connect(ws_path("fixtureA")) as control:
        first = control.receive_json()
        control.send_json({"type": "rotate"})
        err = control.receive_json()
        assert err["type"] == "error"
        control.send_json({"type": "unshare"})
        assert control.receive_json()["revision"] == first["revision"] + 1


def test_randomized_mutation_schedules_preserve_revision_order(sealed_client):
    c = sealed_client
    rng = random.Random(99)
    vizzes = ["priority", "wardmap", "sociogram", "network", "snippet"]
    with c.websocket_connect(ws_path("fixtureA")) as control, c.websocket_connect(
        ws_path("fixtureA")
    ) as screen1, c.websocket_connect(ws_path("fixtureA")) as screen2:
        state = control.receive_json()
        seen1 = [screen1.receive_json()["revision"]]
        seen2 = [screen2.receive_json()["revision"]]
        sent = 0
        for _ in range(100):
            action = rng.random()
            if action < 0.6:
                n = rng.randint(1, 3)
                items = [
                    {"viz": rng.choice(vizzes), "from_ms": 0, "to_ms": rng.randrange(100, 5_000)}
                    for _ in range(n)
                ]
                control.send_json({"type": "share", "items": items})
                sent += 1
            elif action < 0.8:
                control.send_json({"type": "unshare"})
                sent += 1
            else:
                control.send_json(
                    {"type": "play_snippet", "from_ms": 0, "to_ms": rng.randrange(500, 20_000)}
                )
                sent += 1
            control.receive_json()
            seen1.append(screen1.receive_json()["revision"])
            seen2.append(screen2.receive_json()["revision"])
        for seen in (seen1, seen2):
            assert all(b > a for a, b in zip(seen, seen[1:]))
            assert seen[-1] == state["revision"] + sent
        # convergence: server state matches what the screens last rendered
        assert c.service.room("fixtureA").state.revision == seen1[-1]


def test_screens_never_receive_more_than_three_items(sealed_client):
    c = sealed_client
    rng = random.Random(5)
    with c.websocket_connect(ws_path("fixtureA")) as control:
        control.receive_json()
        for _ in range(30):
            n = rng.randint(1, 5)
            items = [
                {"viz": "priority", "from_ms": 0, "to_ms": 1_000} for _ in range(n)
            ]
            control.send_json({"type": "share", "items": items})
            msg = control.receive_json()
            if n > 3:
                assert msg["type"] == "error"
            else:
                assert len(msg["items"]) <= 3
