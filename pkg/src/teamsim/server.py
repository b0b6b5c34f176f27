"""HTTP service: scenario authoring, run lifecycle, streaming, interviews.

Each simulation executes on its own background thread; control verbs go
through a mailbox the engine polls between timesteps, and every timestep
publishes an immutable state view the API serves without locking the
engine.  Log records stream over a one-way server-push channel that a
client can resume from any sequence number, so reconnects never lose or
duplicate a record.
"""

from __future__ import annotations

import secrets
import threading
import time
from typing import Iterator, Optional

from fastapi import FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import PlainTextResponse, StreamingResponse

from . import engine as eng
from . import interview as iview
from .errors import (
    GatewayUnavailable,
    MalformedDocument,
    RunNotFinished,
    SchemaVersionUnsupported,
    TeamSimError,
    UnknownAgent,
)
from .gateway import Gateway
from .store import RunStore, ScenarioDocument, record_line

CONTROL_VERBS = ("start", "pause", "resume", "step", "abort")
DEFAULT_RUN_CAP = 4


class SimRun:
    """One simulation: engine state, control mailbox, worker thread."""

    def __init__(self, run_id: str, state: eng.SimulationState, owner_token: str,
                 step_delay_ms: int = 0):
        self.run_id = run_id
        self.state = state
        self.owner_token = owner_token
        self.step_delay_ms = step_delay_ms
        self.controls = eng.Controls()
        self.thread: Optional[threading.Thread] = None
        self.lock = threading.Lock()
        self.view = state.state_view()
        self.metrics: Optional[dict] = None
        self.started = False

    @property
    def status(self) -> str:
        if not self.started:
            return "created"
        return self.state.status

    def finished(self) -> bool:
        return self.started and self.state.status not in (eng.RUNNING, eng.PAUSED)

    def publish(self, state: eng.SimulationState) -> None:
        view = state.state_view()
        with self.lock:
            self.view = view
        if self.step_delay_ms:
            time.sleep(self.step_delay_ms / 1000.0)

    def start(self, paused: bool = False) -> None:
        self.started = True
        if paused:
            self.controls.send("pause")

        def work():
            metrics = eng.run(self.state, self.controls, on_step=self.publish)
            with self.lock:
                self.metrics = metrics.to_dict()
                self.view = self.state.state_view()

        self.thread = threading.Thread(target=work, daemon=True)
        self.thread.start()


def create_app(data_dir: Optional[str] = None,
               run_cap: int = DEFAULT_RUN_CAP) -> FastAPI:
    app = FastAPI(title="teamsim")
    # The browser UI is served as static files from another origin.
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    scenarios: dict[str, ScenarioDocument] = {}
    runs: dict[str, SimRun] = {}
    interviews: dict[str, tuple[iview.InterviewSession, str]] = {}
    store = RunStore(data_dir)
    registry_lock = threading.Lock()
    counters = {"scenario": 0, "run": 0, "interview": 0}

    def next_id(kind: str) -> str:
        with registry_lock:
            counters[kind] += 1
            return f"{kind}-{counters[kind]}"

    def get_scenario(scenario_id: str) -> ScenarioDocument:
        if scenario_id not in scenarios:
            raise HTTPException(404, f"no scenario {scenario_id}")
        return scenarios[scenario_id]

    def get_run(run_id: str) -> SimRun:
        if run_id not in runs:
            raise HTTPException(404, f"no simulation {run_id}")
        return runs[run_id]

    def require_owner(run: SimRun, token: Optional[str]) -> None:
        if token != run.owner_token:
            raise HTTPException(403, "control requires the owner token")

    # --- scenarios ---

    @app.post("/scenarios", status_code=201)
    def create_scenario(body: dict):
        try:
            doc = ScenarioDocument.from_dict(body)
        except SchemaVersionUnsupported as exc:
            raise HTTPException(400, detail={"errors": [
                {"field": "schema_version", "message": str(exc)}]})
        except MalformedDocument as exc:
            raise HTTPException(400, detail={"errors": [
                {"field": "document", "message": str(exc)}]})
        errors = []
        if not doc.agents:
            errors.append({"field": "agents", "message": "at least one agent"})
        env = doc.environment
        if not env.get("width") or not env.get("height"):
            errors.append({"field": "environment",
                           "message": "width and height are required"})
        elif env["width"] < 8 or env["height"] < 8:
            errors.append({"field": "environment",
                           "message": "grid must be at least 8x8"})
        if errors:
            raise HTTPException(400, detail={"errors": errors})
        scenario_id = next_id("scenario")
        scenarios[scenario_id] = doc
        return {"id": scenario_id, "scenario": doc.to_dict()}

    @app.get("/scenarios/{scenario_id}")
    def read_scenario(scenario_id: str):
        return {"id": scenario_id, "scenario": get_scenario(scenario_id).to_dict()}

    @app.post("/scenarios/{scenario_id}/enhance")
    def enhance_scenario(scenario_id: str, body: Optional[dict] = None):
        doc = get_scenario(scenario_id)
        description = (body or {}).get("description") or doc.description
        gateway = Gateway.from_config(eng.GatewayConfig())
        try:
            enhanced, goals = gateway.enhance_scenario(description)
        except (ValueError, GatewayUnavailable) as exc:
            raise HTTPException(400, str(exc))
        return {"enhanced": enhanced, "goals": goals}

    # --- simulations ---

    @app.post("/simulations", status_code=201)
    def create_simulation(body: dict):
        scenario_id = body.get("scenario_id")
        if not scenario_id:
            raise HTTPException(400, "scenario_id is required")
        doc = get_scenario(scenario_id)
        try:
            config = eng.SimulationConfig.from_dict(body.get("config", {}))
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"bad config: {exc}")
        config.max_timesteps = min(config.max_timesteps, doc.max_timesteps) \
            if body.get("config", {}).get("max_timesteps") else doc.max_timesteps
        active = sum(1 for r in runs.values() if r.started and not r.finished())
        if active >= run_cap:
            raise HTTPException(409, f"run cap of {run_cap} concurrent simulations")
        run_id = next_id("run")
        log = store.create(run_id)
        try:
            state = eng.init_simulation(doc, config, log=log)
        except TeamSimError as exc:
            raise HTTPException(400, str(exc))
        run = SimRun(run_id, state, secrets.token_hex(8),
                     step_delay_ms=int(body.get("step_delay_ms", 0)))
        runs[run_id] = run
        return {"id": run_id, "owner_token": run.owner_token,
                "status": run.status}

    @app.post("/simulations/{run_id}/control")
    def control(run_id: str, body: dict,
                x_owner_token: Optional[str] = Header(default=None)):
        run = get_run(run_id)
        require_owner(run, x_owner_token)
        verb = body.get("verb")
        if verb not in CONTROL_VERBS:
            raise HTTPException(400, f"verb must be one of {CONTROL_VERBS}")
        if run.finished():
            raise HTTPException(409, f"run is {run.status}")
        if verb == "start":
            if run.started:
                raise HTTPException(409, "already started")
            run.start()
        elif verb == "pause":
            if not run.started:
                raise HTTPException(409, "not started")
            run.controls.send("pause")  # pausing a paused run is a no-op
        elif verb == "resume":
            if not run.started:
                raise HTTPException(409, "not started")
            run.controls.send("resume")
        elif verb == "step":
            if not run.started:
                run.start(paused=True)
            run.controls.send("step")
        elif verb == "abort":
            if not run.started:
                run.started = True
                run.state.status = eng.ABORTED
                run.state.duration_steps = run.state.clock
                run.state.log and run.state.log.close()
            else:
                run.controls.send("abort")
        return {"id": run_id, "status": run.status}

    @app.get("/simulations/{run_id}/state")
    def get_state(run_id: str):
        run = get_run(run_id)
        with run.lock:
            view = run.view
        return {"id": run_id, "status": run.status, "view": view}

    @app.get("/simulations/{run_id}/events")
    def stream_events(run_id: str, request: Request,
                      from_seq: int = Query(default=0, alias="from")):
        run = get_run(run_id)
        log = store.get(run_id)

        def generate() -> Iterator[str]:
            cursor = from_seq
            while True:
                for record in log.read(cursor):
                    cursor = record["seq"] + 1
                    yield f"id: {record['seq']}\ndata: {record_line(record)}\n\n"
                if run.finished() and log.next_seq <= cursor:
                    yield "event: done\ndata: {}\n\n"
                    return
                log.wait_for(cursor, timeout=0.2)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/simulations/{run_id}/log")
    def download_log(run_id: str):
        get_run(run_id)
        records = store.read_log(run_id)
        body = "\n".join(record_line(r) for r in records)
        return PlainTextResponse(body + ("\n" if body else ""),
                                 media_type="application/x-ndjson")

    @app.get("/simulations/{run_id}/results")
    def get_results(run_id: str):
        run = get_run(run_id)
        if not run.finished():
            raise HTTPException(409, "run has not finished")
        with run.lock:
            metrics = run.metrics
        if metrics is None:
            metrics = eng.collect_metrics(run.state).to_dict()
        return {"id": run_id, "status": run.status, "metrics": metrics}

    # --- interviews ---

    @app.post("/simulations/{run_id}/interviews", status_code=201)
    def start_interview(run_id: str, body: dict):
        run = get_run(run_id)
        if not run.finished():
            raise HTTPException(409, "run has not finished")
        agent_id = body.get("agent_id")
        mode = body.get("mode", "guided")
        interview_id = next_id("interview")
        try:
            session = iview.start_interview(run.state, agent_id, mode,
                                            session_id=interview_id)
        except RunNotFinished as exc:
            raise HTTPException(409, str(exc))
        except UnknownAgent as exc:
            raise HTTPException(404, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        interviews[interview_id] = (session, run_id)
        return {"id": interview_id, "run_id": run_id, "agent_id": agent_id,
                "mode": mode, "first_question": session.next_question()}

    @app.post("/interviews/{interview_id}/ask")
    def interview_ask(interview_id: str, body: dict):
        if interview_id not in interviews:
            raise HTTPException(404, f"no interview {interview_id}")
        session, _ = interviews[interview_id]
        try:
            if body.get("next"):
                result = iview.ask_next(session)
                if result is None:
                    raise HTTPException(409, "questionnaire is complete")
                return result
            question = body.get("question")
            if not question:
                raise HTTPException(400, "question (or next: true) is required")
            return iview.ask(session, question)
        except GatewayUnavailable as exc:
            raise HTTPException(502, str(exc))

    @app.post("/interviews/{interview_id}/survey")
    def interview_survey(interview_id: str):
        if interview_id not in interviews:
            raise HTTPException(404, f"no interview {interview_id}")
        session, run_id = interviews[interview_id]
        run = get_run(run_id)
        if not run.finished():
            raise HTTPException(409, "run has not finished")
        try:
            survey = iview.run_ego_survey(run.state, session.agent_id,
                                          session.session_id)
        except GatewayUnavailable as exc:
            raise HTTPException(502, str(exc))
        return survey.to_dict()

    return app


def main(host: str = "127.0.0.1", port: int = 8000,
         data_dir: Optional[str] = None) -> None:
    import uvicorn

    uvicorn.run(create_app(data_dir), host=host, port=port, log_level="warning")
