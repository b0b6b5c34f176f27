"""Persistence: scenario documents, run logs, snapshots, results export.

Scenario files and snapshots are versioned, self-describing JSON documents.
Run logs are append-only newline-delimited JSON, one file per run, with a
fixed key order so that a deterministic run produces byte-identical bytes;
an in-memory ring buffer keeps the most recent records for live streaming,
while reads of the full history go back to the file.
"""

from __future__ import annotations

import json
import os
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    CorruptSnapshot,
    MalformedDocument,
    RunNotFinished,
    SchemaVersionUnsupported,
    UnknownRun,
)

SCENARIO_SCHEMA_VERSION = 1
SNAPSHOT_SCHEMA_VERSION = 1
RING_BUFFER_SIZE = 1000

_SCENARIO_FIELDS = (
    "schema_version", "title", "description", "goals", "environment",
    "agents", "entities", "success", "max_timesteps",
)


@dataclass
class ScenarioDocument:
    """Everything needed to initialize a simulation."""

    title: str = "Untitled scenario"
    description: str = ""
    goals: list[dict] = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    agents: list[dict] = field(default_factory=list)
    entities: list[dict] = field(default_factory=list)
    success: list[dict] = field(default_factory=list)
    max_timesteps: int = 2000
    schema_version: int = SCENARIO_SCHEMA_VERSION
    extras: dict = field(default_factory=dict)  # unknown fields, kept opaque

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in _SCENARIO_FIELDS}
        d.update(self.extras)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ScenarioDocument":
        if not isinstance(d, dict):
            raise MalformedDocument("scenario document must be an object")
        version = d.get("schema_version", SCENARIO_SCHEMA_VERSION)
        if version != SCENARIO_SCHEMA_VERSION:
            raise SchemaVersionUnsupported(f"scenario schema version {version}")
        known = {k: v for k, v in d.items() if k in _SCENARIO_FIELDS}
        extras = {k: v for k, v in d.items() if k not in _SCENARIO_FIELDS}
        doc = ScenarioDocument(**{k: v for k, v in known.items()
                                  if k != "schema_version"})
        doc.extras = extras
        if not isinstance(doc.environment, dict):
            raise MalformedDocument("environment section must be an object")
        if not isinstance(doc.agents, list):
            raise MalformedDocument("agents section must be a list")
        return doc


def save_scenario(doc: ScenarioDocument, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path: str) -> ScenarioDocument:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON in {path}: {exc}")
    return ScenarioDocument.from_dict(data)


# ---------------------------------------------------------------------------
# Run logs
# ---------------------------------------------------------------------------

RECORD_KINDS = ("decision", "event_executed", "conversation_turn",
                "validation", "success_check", "system")

#: Published log-record schema. Field names are normative for this artifact:
#: every emitted record carries timestep/seq/kind, and the optional sections
#: use exactly these keys.
LOG_RECORD_SCHEMA = {
    "required": {"timestep": int, "seq": int, "kind": str},
    "kinds": RECORD_KINDS,
    "sections": {
        "agent": {"id": int, "name": str, "role": str},
        "command": {"action": str, "rationale": str},
        "event": {"type": str, "duration": int, "participants": list},
        "outcome": {"success": bool, "reason": str},
        "data": dict,
    },
}


def validate_record(record: dict) -> None:
    """Check a record against the published schema; raise MalformedDocument."""
    if not isinstance(record, dict):
        raise MalformedDocument("log record must be an object")
    for name, typ in LOG_RECORD_SCHEMA["required"].items():
        if name not in record:
            raise MalformedDocument(f"log record missing field {name!r}")
        if not isinstance(record[name], typ) or isinstance(record[name], bool):
            raise MalformedDocument(f"log record field {name!r} must be {typ.__name__}")
    if record["timestep"] < 0 or record["seq"] < 0:
        raise MalformedDocument("timestep and seq must be non-negative")
    if record["kind"] not in RECORD_KINDS:
        raise MalformedDocument(f"unknown record kind {record['kind']!r}")
    for section, spec in LOG_RECORD_SCHEMA["sections"].items():
        if section not in record or record[section] is None:
            continue
        value = record[section]
        if not isinstance(value, dict):
            raise MalformedDocument(f"section {section!r} must be an object")
        if section == "data":
            continue
        for key, typ in spec.items():
            if key not in value:
                raise MalformedDocument(f"section {section!r} missing {key!r}")
            if typ is bool:
                if not isinstance(value[key], bool):
                    raise MalformedDocument(f"{section}.{key} must be a boolean")
            elif not isinstance(value[key], typ) or isinstance(value[key], bool):
                raise MalformedDocument(f"{section}.{key} must be {typ.__name__}")
    extra = set(record) - set(LOG_RECORD_SCHEMA["required"]) - set(LOG_RECORD_SCHEMA["sections"])
    if extra:
        raise MalformedDocument(f"unknown log record fields: {sorted(extra)}")


def record_line(record: dict) -> str:
    """Canonical serialized form: sorted keys, compact separators."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class RunLog:
    """Append-only record sink for one run, with subscriber wakeups."""

    def __init__(self, run_id: str, path: Optional[str] = None):
        self.run_id = run_id
        self.path = path
        self.next_seq = 0
        self._ring: deque[dict] = deque(maxlen=RING_BUFFER_SIZE)
        self._all: list[dict] = [] if path is None else None
        self._lock = threading.Lock()
        self._new_data = threading.Condition(self._lock)
        self.closed = False
        if path is not None:
            open(path, "w", encoding="utf-8").close()

    def append(self, record: dict) -> dict:
        """Assign a sequence number, validate, persist, and publish."""
        with self._lock:
            full = dict(record)
            full["seq"] = self.next_seq
            validate_record(full)
            self.next_seq += 1
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(record_line(full) + "\n")
            else:
                self._all.append(full)
            self._ring.append(full)
            self._new_data.notify_all()
            return full

    def read(self, from_seq: int = 0) -> list[dict]:
        """All flushed records with seq >= from_seq, in order."""
        with self._lock:
            if self.path is None:
                return [r for r in self._all if r["seq"] >= from_seq]
            if self._ring and self._ring[0]["seq"] <= from_seq:
                return [r for r in self._ring if r["seq"] >= from_seq]
            records = []
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    record = json.loads(line)
                    if record["seq"] >= from_seq:
                        records.append(record)
            return records

    def wait_for(self, seq: int, timeout: float = 0.5) -> bool:
        """Block until a record with this seq exists (or the log closes)."""
        with self._lock:
            if self.next_seq > seq or self.closed:
                return self.next_seq > seq
            self._new_data.wait(timeout)
            return self.next_seq > seq

    def close(self) -> None:
        with self._lock:
            self.closed = True
            self._new_data.notify_all()


class RunStore:
    """Registry of run logs, file-backed when given a directory."""

    def __init__(self, root: Optional[str] = None):
        self.root = root
        if root is not None:
            os.makedirs(root, exist_ok=True)
        self._logs: dict[str, RunLog] = {}

    def create(self, run_id: str) -> RunLog:
        path = None
        if self.root is not None:
            path = os.path.join(self.root, f"{run_id}.jsonl")
        log = RunLog(run_id, path)
        self._logs[run_id] = log
        return log

    def get(self, run_id: str) -> RunLog:
        if run_id not in self._logs:
            raise UnknownRun(f"no run named {run_id!r}")
        return self._logs[run_id]

    def append_log(self, run_id: str, record: dict) -> dict:
        return self.get(run_id).append(record)

    def read_log(self, run_id: str, from_seq: int = 0) -> list[dict]:
        return self.get(run_id).read(from_seq)


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


def save_snapshot(state_dict: dict) -> bytes:
    """Serialize a full simulation state into a portable document."""
    document = {
        "schema": "snapshot",
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "state": state_dict,
    }
    return json.dumps(document, sort_keys=True).encode("utf-8")


def load_snapshot(blob: bytes) -> dict:
    """Parse snapshot bytes back into a state dict; raise CorruptSnapshot."""
    try:
        document = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"unreadable snapshot: {exc}")
    if not isinstance(document, dict) or document.get("schema") != "snapshot":
        raise CorruptSnapshot("not a snapshot document")
    if document.get("schema_version") != SNAPSHOT_SCHEMA_VERSION:
        raise CorruptSnapshot(
            f"unsupported snapshot version {document.get('schema_version')!r}")
    if "state" not in document:
        raise CorruptSnapshot("snapshot has no state section")
    return document["state"]


# ---------------------------------------------------------------------------
# Results export
# ---------------------------------------------------------------------------


def export_results(metrics: dict, finished: bool, fmt: str = "json") -> str:
    """Render final metrics as a structured (json) or tabular (csv) document.

    The two formats carry the same content; re-parsing the tabular form
    reproduces the structured one.
    """
    if not finished:
        raise RunNotFinished("results are only available after the run ends")
    if fmt == "json":
        return json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        lines = ["section,key,metric,value"]
        for key in sorted(metrics["team"]):
            lines.append(f"team,,{key},{metrics['team'][key]}")
        for agent_id in sorted(metrics["per_agent"], key=int):
            stats = metrics["per_agent"][agent_id]
            for key in sorted(stats):
                value = stats[key]
                if isinstance(value, dict):
                    for verb in sorted(value):
                        lines.append(f"per_agent,{agent_id},{key}.{verb},{value[verb]}")
                else:
                    lines.append(f"per_agent,{agent_id},{key},{value}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def parse_results_csv(text: str) -> dict:
    """Inverse of the csv export, used to cross-check the two formats."""
    metrics: dict = {"team": {}, "per_agent": {}}
    lines = text.strip().splitlines()[1:]
    for line in lines:
        section, key, metric, value = line.split(",", 3)
        parsed: object
        try:
            parsed = int(value)
        except ValueError:
            try:
                parsed = float(value)
            except ValueError:
                parsed = value
        if section == "team":
            metrics["team"][metric] = parsed
        else:
            stats = metrics["per_agent"].setdefault(key, {})
            if "." in metric:
                outer, inner = metric.split(".", 1)
                stats.setdefault(outer, {})[inner] = parsed
            else:
                stats[metric] = parsed
    return metrics
