"""HTTP endpoints: lifecycle, control, streaming, results, interviews."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from teamsim.scenarios import rescue_scenario
from teamsim.server import create_app
from teamsim.store import validate_record


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=str(tmp_path))
    with TestClient(app) as test_client:
        yield test_client


def post_scenario(client, **kwargs):
    doc = rescue_scenario(**kwargs)
    response = client.post("/scenarios", json=doc.to_dict())
    assert response.status_code == 201, response.text
    return response.json()["id"]


def start_run(client, scenario_id, config=None, step_delay_ms=0):
    body = {"scenario_id": scenario_id, "config": config or {"seed": 3}}
    if step_delay_ms:
        body["step_delay_ms"] = step_delay_ms
    created = client.post("/simulations", json=body)
    assert created.status_code == 201, created.text
    run_id = created.json()["id"]
    token = created.json()["owner_token"]
    response = client.post(f"/simulations/{run_id}/control",
                           json={"verb": "start"},
                           headers={"X-Owner-Token": token})
    assert response.status_code == 200
    return run_id, token


def wait_finished(client, run_id, timeout=60):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/simulations/{run_id}/state").json()["status"]
        if status in ("succeeded", "timed_out", "aborted"):
            return status
        time.sleep(0.05)
    raise AssertionError("run did not finish in time")


# --- scenarios ---------------------------------------------------------------


def test_scenario_crud(client):
    scenario_id = post_scenario(client, agents=2, victims=3)
    fetched = client.get(f"/scenarios/{scenario_id}")
    assert fetched.status_code == 200
    assert fetched.json()["scenario"]["max_timesteps"] == 2000
    assert client.get("/scenarios/nope").status_code == 404


def test_scenario_validation_errors(client):
    response = client.post("/scenarios", json={"agents": [],
                                               "environment": {}})
    assert response.status_code == 400
    fields = {e["field"] for e in response.json()["detail"]["errors"]}
    assert "agents" in fields and "environment" in fields


def test_enhance_returns_goals(client):
    scenario_id = post_scenario(client, agents=2)
    response = client.post(f"/scenarios/{scenario_id}/enhance",
                           json={"description":
                                 "Locate two individuals who have gone missing"})
    assert response.status_code == 200
    goals = response.json()["goals"]
    assert any(g["verb"] == "locate" and g.get("count") == 2 for g in goals)


# --- lifecycle ---------------------------------------------------------------


def test_run_lifecycle_and_results(client):
    scenario_id = post_scenario(client, agents=2, victims=3, max_timesteps=600)
    run_id, token = start_run(client, scenario_id)
    assert client.get(f"/simulations/{run_id}/results").status_code == 409

    status = wait_finished(client, run_id)
    assert status == "succeeded"
    results = client.get(f"/simulations/{run_id}/results")
    assert results.status_code == 200
    team = results.json()["metrics"]["team"]
    assert team["targets_rescued"] == 3

    # Resuming a finished run is an illegal transition.
    response = client.post(f"/simulations/{run_id}/control",
                           json={"verb": "resume"},
                           headers={"X-Owner-Token": token})
    assert response.status_code == 409


def test_control_requires_token(client):
    scenario_id = post_scenario(client, agents=2, victims=3)
    created = client.post("/simulations", json={"scenario_id": scenario_id})
    run_id = created.json()["id"]
    response = client.post(f"/simulations/{run_id}/control",
                           json={"verb": "start"})
    assert response.status_code == 403


def test_pause_freezes_clock(client):
    scenario_id = post_scenario(client, agents=3, victims=35,
                                max_timesteps=2000)
    run_id, token = start_run(client, scenario_id, step_delay_ms=2)
    time.sleep(0.2)
    paused = client.post(f"/simulations/{run_id}/control",
                         json={"verb": "pause"},
                         headers={"X-Owner-Token": token})
    assert paused.status_code == 200
    time.sleep(0.2)  # let the loop reach the pause gate
    clock_a = client.get(f"/simulations/{run_id}/state").json()["view"]["clock"]
    time.sleep(0.2)
    clock_b = client.get(f"/simulations/{run_id}/state").json()["view"]["clock"]
    assert clock_a == clock_b
    # Pausing a paused run is a no-op 200.
    again = client.post(f"/simulations/{run_id}/control",
                        json={"verb": "pause"},
                        headers={"X-Owner-Token": token})
    assert again.status_code == 200
    aborted = client.post(f"/simulations/{run_id}/control",
                          json={"verb": "abort"},
                          headers={"X-Owner-Token": token})
    assert aborted.status_code == 200
    wait_finished(client, run_id)


def test_step_verb_advances_one_timestep(client):
    scenario_id = post_scenario(client, agents=2, victims=35)
    created = client.post("/simulations", json={"scenario_id": scenario_id})
    run_id = created.json()["id"]
    token = created.json()["owner_token"]

    def step():
        response = client.post(f"/simulations/{run_id}/control",
                               json={"verb": "step"},
                               headers={"X-Owner-Token": token})
        assert response.status_code == 200

    def clock():
        return client.get(f"/simulations/{run_id}/state").json()["view"]["clock"]

    step()
    deadline = time.time() + 5
    while clock() < 1 and time.time() < deadline:
        time.sleep(0.02)
    assert clock() == 1
    step()
    deadline = time.time() + 5
    while clock() < 2 and time.time() < deadline:
        time.sleep(0.02)
    assert clock() == 2
    client.post(f"/simulations/{run_id}/control", json={"verb": "abort"},
                headers={"X-Owner-Token": token})
    wait_finished(client, run_id)


def test_state_view_contains_matrix(client):
    scenario_id = post_scenario(client, agents=2, victims=3)
    created = client.post("/simulations", json={"scenario_id": scenario_id})
    run_id = created.json()["id"]
    view = client.get(f"/simulations/{run_id}/state").json()["view"]
    assert view["matrix"]["width"] == 30
    assert len(view["agents"]) == 2
    assert view["regions"]


# --- streaming ---------------------------------------------------------------


def read_sse_records(client, run_id, from_seq=0, limit=None):
    records = []
    with client.stream("GET", f"/simulations/{run_id}/events",
                       params={"from": from_seq}) as response:
        assert response.status_code == 200
        for line in response.iter_lines():
            if line.startswith("event: done"):
                break
            if line.startswith("data: "):
                records.append(json.loads(line[len("data: "):]))
                if limit and len(records) >= limit:
                    break
    return records


def test_stream_full_replay_after_finish(client, tmp_path):
    scenario_id = post_scenario(client, agents=2, victims=3, max_timesteps=600)
    run_id, _ = start_run(client, scenario_id)
    wait_finished(client, run_id)
    records = read_sse_records(client, run_id)
    assert records
    assert [r["seq"] for r in records] == list(range(len(records)))
    for record in records:
        validate_record(record)
    # The downloadable log carries the same records.
    download = client.get(f"/simulations/{run_id}/log")
    lines = [json.loads(l) for l in download.text.splitlines()]
    assert lines == records


def test_stream_resume_no_gaps_no_dups(client):
    scenario_id = post_scenario(client, agents=2, victims=3, max_timesteps=600)
    run_id, _ = start_run(client, scenario_id)
    wait_finished(client, run_id)
    full = read_sse_records(client, run_id)
    # Reconnect in chunks from arbitrary offsets.
    collected = []
    cursor = 0
    while True:
        chunk = read_sse_records(client, run_id, from_seq=cursor, limit=7)
        if not chunk:
            break
        collected.extend(chunk)
        cursor = chunk[-1]["seq"] + 1
    assert [r["seq"] for r in collected] == [r["seq"] for r in full]


# --- interviews ----------------------------------------------------------------


def test_interview_flow(client):
    scenario_id = post_scenario(client, agents=2, victims=3, max_timesteps=600)
    run_id, _ = start_run(client, scenario_id)

    # Too early: the run is still going (or just created).
    early = client.post(f"/simulations/{run_id}/interviews",
                        json={"agent_id": 2, "mode": "guided"})
    assert early.status_code in (409, 201)  # tiny runs may already be done
    wait_finished(client, run_id)

    started = client.post(f"/simulations/{run_id}/interviews",
                          json={"agent_id": 2, "mode": "guided"})
    assert started.status_code == 201
    payload = started.json()
    assert payload["first_question"].startswith("State your name")
    interview_id = payload["id"]

    answer = client.post(f"/interviews/{interview_id}/ask",
                         json={"question": "How did the mission go?"})
    assert answer.status_code == 200
    assert "explanation" in answer.json()

    survey = client.post(f"/interviews/{interview_id}/survey")
    assert survey.status_code == 200
    dims = survey.json()["dimensions"]
    assert len(dims) == 6
    assert all(v == 5.0 for v in dims.values())


def test_interview_on_running_run_rejected(client):
    scenario_id = post_scenario(client, agents=3, victims=35)
    run_id, token = start_run(client, scenario_id, step_delay_ms=2)
    response = client.post(f"/simulations/{run_id}/interviews",
                           json={"agent_id": 2, "mode": "guided"})
    assert response.status_code == 409
    client.post(f"/simulations/{run_id}/control", json={"verb": "abort"},
                headers={"X-Owner-Token": token})
    wait_finished(client, run_id)
