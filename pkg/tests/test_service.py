"""HTTP service tests: sessions, error mapping, replay frames, analytics."""

import json
from itertools import zip_longest

import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings
from hypothesis import strategies as st

from arctraj.engine import ActionRequest
from arctraj.ingest import parse_trajectory
from arctraj.replay import replay
from arctraj.service import create_app
from arctraj.analytics.summary import summaries_by_task

from synth import make_task, record_script


def two_by_two_task(task_id="t1"):
    return make_task([[0, 0], [0, 0]], [[3, 0], [0, 3]], task_id=task_id)


def solved_trajectory(task, trajectory_id="demo1"):
    return record_script(
        task,
        [
            ActionRequest(operation="SelectCell", position=(0, 0)),
            ActionRequest(operation="Paint", color=3),
            ActionRequest(operation="SelectCell", position=(1, 1)),
            ActionRequest(operation="Paint", color=3),
            ActionRequest(operation="Submit"),
        ],
        trajectory_id=trajectory_id,
    )


@pytest.fixture()
def task():
    return two_by_two_task()


@pytest.fixture()
def client(task):
    traj = solved_trajectory(task)
    app = create_app({"t1": task}, {"demo1": traj})
    return TestClient(app)


SOLVE_BODIES = [
    {"operation": "SelectCell", "position": [0, 0]},
    {"operation": "Paint", "color": 3},
    {"operation": "SelectCell", "position": [1, 1]},
    {"operation": "Paint", "color": 3},
    {"operation": "Submit"},
]


def start(client, task_id="t1", test_index=0):
    r = client.post("/sessions", json={"task_id": task_id, "test_index": test_index})
    assert r.status_code == 201
    return r.json()


class TestTaskEndpoints:
    def test_listing_counts(self, client):
        doc = client.get("/tasks").json()
        assert doc == {
            "tasks": [
                {"task_id": "t1", "demos": 1, "tests": 1, "test_dims": [[2, 2]]}
            ]
        }

    def test_detail_withholds_test_target_cells(self, client):
        doc = client.get("/tasks/t1").json()
        assert doc["demos"][0].keys() == {"input", "output"}
        test = doc["tests"][0]
        assert test == {"input": [[0, 0], [0, 0]], "target_height": 2,
                        "target_width": 2}
        assert "output" not in test

    def test_unknown_task_is_404(self, client):
        r = client.get("/tasks/nope")
        assert r.status_code == 404
        assert r.json()["detail"]["error"] == "TaskNotFound"


class TestSessions:
    def test_create_returns_fresh_state(self, client):
        state = start(client)
        assert state["grid"] == [[0, 0], [0, 0]]
        assert state["selection"] == []
        assert state["step_count"] == 0
        assert state["submitted"] is False
        assert state["target_height"] == 2 and state["target_width"] == 2

    def test_create_unknown_task_404(self, client):
        r = client.post("/sessions", json={"task_id": "nope"})
        assert r.status_code == 404

    def test_create_bad_test_index_422(self, client):
        r = client.post("/sessions", json={"task_id": "t1", "test_index": 5})
        assert r.status_code == 422

    def test_create_missing_task_id_422(self, client):
        r = client.post("/sessions", json={})
        assert r.status_code == 422

    def test_position_is_row_col_on_the_wire(self, client):
        sid = start(client)["session_id"]
        client.post(f"/sessions/{sid}/actions",
                    json={"operation": "SelectCell", "position": [0, 1]})
        r = client.post(f"/sessions/{sid}/actions",
                        json={"operation": "Paint", "color": 7})
        assert r.json()["grid"] == [[0, 7], [0, 0]]

    def test_selection_reported_as_sorted_pairs(self, client):
        sid = start(client)["session_id"]
        r = client.post(f"/sessions/{sid}/actions",
                        json={"operation": "SelectGrid",
                              "cells": [[1, 1], [0, 0]]})
        assert r.json()["selection"] == [[0, 0], [1, 1]]

    def test_outcome_travels_with_each_action(self, client):
        sid = start(client)["session_id"]
        r = client.post(f"/sessions/{sid}/actions", json=SOLVE_BODIES[0])
        assert r.json()["outcome"] == {
            "reward": 0, "overlapped": False, "terminal": False, "note": None
        }

    def test_solve_ends_with_terminal_reward(self, client):
        sid = start(client)["session_id"]
        for body in SOLVE_BODIES:
            r = client.post(f"/sessions/{sid}/actions", json=body)
            assert r.status_code == 200
        assert r.json()["outcome"]["reward"] == 1
        assert r.json()["outcome"]["terminal"] is True
        assert r.json()["submitted"] is True

    def test_sessions_are_isolated(self, client):
        a = start(client)["session_id"]
        b = start(client)["session_id"]
        client.post(f"/sessions/{a}/actions",
                    json={"operation": "SelectCell", "position": [0, 0]})
        client.post(f"/sessions/{a}/actions",
                    json={"operation": "Paint", "color": 9})
        state_b = client.get(f"/sessions/{b}").json()
        assert state_b["grid"] == [[0, 0], [0, 0]]
        assert state_b["step_count"] == 0

    def test_missing_session_404(self, client):
        assert client.get("/sessions/ghost").status_code == 404
        r = client.post("/sessions/ghost/actions", json=SOLVE_BODIES[0])
        assert r.status_code == 404


class TestActionErrors:
    def test_unknown_operation_422(self, client):
        sid = start(client)["session_id"]
        r = client.post(f"/sessions/{sid}/actions", json={"operation": "Zap"})
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "UnknownOperation"

    def test_engine_rejection_maps_to_422_with_class_name(self, client):
        sid = start(client)["session_id"]
        # Paint with nothing selected is an engine-level rejection
        r = client.post(f"/sessions/{sid}/actions",
                        json={"operation": "Paint", "color": 3})
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "EmptySelectionForOperation"

    def test_acting_after_submit_is_409(self, client):
        sid = start(client)["session_id"]
        for body in SOLVE_BODIES:
            client.post(f"/sessions/{sid}/actions", json=body)
        r = client.post(f"/sessions/{sid}/actions", json=SOLVE_BODIES[0])
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "AlreadySubmitted"

    def test_rejected_action_does_not_advance_state(self, client):
        sid = start(client)["session_id"]
        client.post(f"/sessions/{sid}/actions",
                    json={"operation": "Paint", "color": 3})
        state = client.get(f"/sessions/{sid}").json()
        assert state["step_count"] == 0
        assert state["grid"] == [[0, 0], [0, 0]]


class TestTrajectoryDownload:
    def test_download_parses_and_replays_divergence_free(self, client, task):
        sid = start(client)["session_id"]
        for body in SOLVE_BODIES:
            client.post(f"/sessions/{sid}/actions", json=body)
        doc = client.get(f"/sessions/{sid}/trajectory").json()
        t = parse_trajectory(doc)
        result = replay(t, task, mode="strict")
        assert result.divergences == ()
        assert result.success_check is True

    def test_download_success_flag(self, client):
        sid = start(client)["session_id"]
        for body in SOLVE_BODIES:
            client.post(f"/sessions/{sid}/actions", json=body)
        assert client.get(f"/sessions/{sid}/trajectory").json()["success"] is True

        other = start(client)["session_id"]
        client.post(f"/sessions/{other}/actions", json=SOLVE_BODIES[0])
        assert client.get(f"/sessions/{other}/trajectory").json()["success"] is False

    def test_download_preserves_action_count_and_ids(self, client):
        sid = start(client)["session_id"]
        for body in SOLVE_BODIES[:3]:
            client.post(f"/sessions/{sid}/actions", json=body)
        doc = client.get(f"/sessions/{sid}/trajectory").json()
        assert doc["trajectory_id"] == sid
        assert doc["task_id"] == "t1"
        assert len(doc["actionSequence"]) == 3


class TestReplayFrames:
    def test_three_actions_give_four_frames(self, task):
        traj = record_script(
            task,
            [
                ActionRequest(operation="SelectCell", position=(0, 0)),
                ActionRequest(operation="Paint", color=3),
                ActionRequest(operation="Submit"),
            ],
            trajectory_id="short",
        )
        client = TestClient(create_app({"t1": task}, {"short": traj}))
        doc = client.get("/trajectories/short/frames").json()
        assert len(doc["frames"]) == 4
        first = doc["frames"][0]
        assert first == {"step": 0, "grid": [[0, 0], [0, 0]], "action": None,
                         "diverged": False}
        assert [f["step"] for f in doc["frames"]] == [0, 1, 2, 3]
        assert doc["frames"][1]["action"]["operation"] == "SelectCell"
        assert doc["frames"][2]["grid"] == [[3, 0], [0, 0]]

    def test_listing_and_missing_trajectory(self, client):
        doc = client.get("/trajectories").json()
        assert [t["trajectory_id"] for t in doc["trajectories"]] == ["demo1"]
        assert doc["trajectories"][0]["actions"] == 5
        assert client.get("/trajectories/ghost/frames").status_code == 404


class TestAnalytics:
    def test_payload_matches_batch_summary_byte_for_byte(self, client, task):
        served = client.get("/analytics/tasks/t1")
        assert served.status_code == 200
        direct = summaries_by_task({"t1": task}, [solved_trajectory(task)])["t1"]
        assert (json.dumps(served.json(), sort_keys=True)
                == json.dumps(direct, sort_keys=True))

    def test_unknown_task_404(self, client):
        assert client.get("/analytics/tasks/nope").status_code == 404

    def test_not_computed_is_409(self, task):
        client = TestClient(create_app({"t1": task}))
        r = client.get("/analytics/tasks/t1")
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "NotYetComputed"


class TestLifecycle:
    def test_idle_sessions_expire(self, task):
        now = [1000.0]
        app = create_app({"t1": task}, ttl_seconds=60.0, time_fn=lambda: now[0])
        client = TestClient(app)
        sid = start(client)["session_id"]
        now[0] += 30.0
        assert client.get(f"/sessions/{sid}").status_code == 200
        now[0] += 61.0
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_activity_refreshes_the_ttl(self, task):
        now = [1000.0]
        app = create_app({"t1": task}, ttl_seconds=60.0, time_fn=lambda: now[0])
        client = TestClient(app)
        sid = start(client)["session_id"]
        for _ in range(3):
            now[0] += 45.0
            assert client.get(f"/sessions/{sid}").status_code == 200

    def test_journal_gets_meta_then_one_line_per_action(self, task, tmp_path):
        app = create_app({"t1": task}, journal_dir=tmp_path)
        client = TestClient(app)
        sid = start(client)["session_id"]
        for body in SOLVE_BODIES[:2]:
            client.post(f"/sessions/{sid}/actions", json=body)
        lines = [json.loads(l) for l in
                 (tmp_path / f"{sid}.jsonl").read_text().splitlines()]
        assert lines[0]["meta"]["task_id"] == "t1"
        assert [l["action"]["operation"] for l in lines[1:]] == [
            "SelectCell", "Paint"
        ]

    def test_shutdown_flushes_open_sessions(self, task, tmp_path):
        app = create_app({"t1": task}, journal_dir=tmp_path)
        with TestClient(app) as client:
            sid = start(client)["session_id"]
            client.post(f"/sessions/{sid}/actions", json=SOLVE_BODIES[0])
        lines = [json.loads(l) for l in
                 (tmp_path / f"{sid}.jsonl").read_text().splitlines()]
        assert lines[-1] == {"closed": {"actions": 1}}

    def test_eviction_flushes_the_journal(self, task, tmp_path):
        now = [0.0]
        app = create_app({"t1": task}, ttl_seconds=10.0, journal_dir=tmp_path,
                         time_fn=lambda: now[0])
        client = TestClient(app)
        sid = start(client)["session_id"]
        now[0] += 11.0
        client.get("/tasks")  # unrelated request; eviction is purge-on-access
        assert client.get(f"/sessions/{sid}").status_code == 404
        lines = [json.loads(l) for l in
                 (tmp_path / f"{sid}.jsonl").read_text().splitlines()]
        assert lines[-1] == {"closed": {"actions": 0}}

    def test_cors_allowlist(self, task):
        app = create_app({"t1": task}, cors_origins=("http://ui.test",))
        client = TestClient(app)
        r = client.get("/tasks", headers={"Origin": "http://ui.test"})
        assert r.headers.get("access-control-allow-origin") == "http://ui.test"
        r = client.get("/tasks", headers={"Origin": "http://evil.test"})
        assert "access-control-allow-origin" not in r.headers


@pytest.mark.properties
class TestServiceProperties:
    @settings(max_examples=10, deadline=None)
    @given(
        cells_a=st.lists(
            st.tuples(st.integers(0, 1), st.integers(0, 1)),
            min_size=1, max_size=4, unique=True),
        cells_b=st.lists(
            st.tuples(st.integers(0, 1), st.integers(0, 1)),
            min_size=1, max_size=4, unique=True),
        color_a=st.integers(1, 9),
        color_b=st.integers(1, 9),
    )
    def test_interleaved_sessions_never_bleed(self, cells_a, cells_b,
                                              color_a, color_b):
        task = two_by_two_task()
        client = TestClient(create_app({"t1": task}))
        a = start(client)["session_id"]
        b = start(client)["session_id"]
        for pa, pb in zip_longest(cells_a, cells_b):
            if pa is not None:
                client.post(f"/sessions/{a}/actions",
                            json={"operation": "SelectCell",
                                  "position": list(pa)})
            if pb is not None:
                client.post(f"/sessions/{b}/actions",
                            json={"operation": "SelectCell",
                                  "position": list(pb)})
        client.post(f"/sessions/{a}/actions",
                    json={"operation": "Paint", "color": color_a})
        client.post(f"/sessions/{b}/actions",
                    json={"operation": "Paint", "color": color_b})

        grid_a = client.get(f"/sessions/{a}").json()["grid"]
        grid_b = client.get(f"/sessions/{b}").json()["grid"]
        la, ca_ = cells_a[-1]
        lb, cb_ = cells_b[-1]
        assert grid_a[la][ca_] == color_a
        assert grid_b[lb][cb_] == color_b
        painted_a = {(r, c) for r in range(2) for c in range(2)
                     if grid_a[r][c] != 0}
        assert painted_a == {cells_a[-1]}
