"""Time-ordered event queue with participant fan-out and cancellation.

Every scheduled activity is an event ``(type, exec_time, handler, payload,
participants)`` owned by one agent.  Scheduling an event with participants
also enqueues one mirror entry per participant at the same execution time;
mirrors carry no participants of their own and exist to block the
participant until the shared event resolves.  Events are executed in
nondecreasing ``(exec_time, id)`` order — ids are the insertion order, so
ties resolve FIFO and runs replay exactly.

Handlers are registered names, not callables, which keeps events
serializable into logs and snapshots; the engine resolves names to effects
when it drains the queue.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import PastTimestep, UnknownHandler

ACTION = "action"
COMMUNICATION = "communication"


@dataclass
class Event:
    id: int
    event_type: str  # ACTION or COMMUNICATION
    exec_time: int
    handler: str
    payload: dict
    participants: list[int]
    owner: int
    mirror_of: Optional[int] = None

    @property
    def is_mirror(self) -> bool:
        return self.mirror_of is not None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "event_type": self.event_type,
            "exec_time": self.exec_time,
            "handler": self.handler,
            "payload": self.payload,
            "participants": list(self.participants),
            "owner": self.owner,
            "mirror_of": self.mirror_of,
        }

    @staticmethod
    def from_dict(d: dict) -> "Event":
        return Event(
            id=d["id"],
            event_type=d["event_type"],
            exec_time=d["exec_time"],
            handler=d["handler"],
            payload=d["payload"],
            participants=list(d["participants"]),
            owner=d["owner"],
            mirror_of=d.get("mirror_of"),
        )


@dataclass
class ExecutionResult:
    """Outcome of one executed entry; handler failures never abort a sweep."""

    event: Event
    ok: bool
    error: Optional[str] = None


class EventQueue:
    """Priority queue over (exec_time, insertion id) with lazy cancellation."""

    def __init__(self, handlers: Iterable[str] = ()):
        self.clock = 0
        self.handlers: set[str] = set(handlers)
        self._next_id = 1
        self._events: dict[int, Event] = {}  # pending only
        self._heap: list[tuple[int, int]] = []

    def register_handler(self, name: str) -> None:
        self.handlers.add(name)

    # --- scheduling ---

    def add_event(
        self,
        event_type: str,
        exec_time: int,
        handler: str,
        payload: dict,
        participants: Iterable[int] = (),
        owner: int = 0,
    ) -> int:
        """Enqueue an event plus one mirror entry per participant.

        Returns the primary event's id.
        """
        if exec_time < self.clock:
            raise PastTimestep(f"exec_time {exec_time} is before clock {self.clock}")
        if handler not in self.handlers:
            raise UnknownHandler(f"no handler registered under {handler!r}")
        participants = [p for p in participants if p != owner]
        primary = self._push(
            Event(self._next_id, event_type, exec_time, handler, payload,
                  participants, owner)
        )
        for agent_id in participants:
            self._push(
                Event(self._next_id, event_type, exec_time, handler, payload,
                      [], agent_id, mirror_of=primary.id)
            )
        return primary.id

    def _push(self, event: Event) -> Event:
        self._next_id = event.id + 1
        self._events[event.id] = event
        heapq.heappush(self._heap, (event.exec_time, event.id))
        return event

    # --- execution ---

    def process_due(
        self, t: int, execute: Callable[[Event], None] = lambda e: None
    ) -> list[ExecutionResult]:
        """Execute every pending entry with exec_time <= t, in order.

        Advances the clock to ``t``.  ``execute`` exceptions are captured in
        the per-event result and the sweep continues.
        """
        if t < self.clock:
            raise PastTimestep(f"cannot process time {t} before clock {self.clock}")
        results: list[ExecutionResult] = []
        while self._heap and self._heap[0][0] <= t:
            _, event_id = heapq.heappop(self._heap)
            event = self._events.pop(event_id, None)
            if event is None:
                continue  # cancelled
            try:
                execute(event)
                results.append(ExecutionResult(event, True))
            except Exception as exc:  # noqa: BLE001 - reported per event
                results.append(ExecutionResult(event, False, str(exc)))
        self.clock = t
        return results

    # --- cancellation ---

    def cancel_agent_events(self, agent_id: int) -> int:
        """Drop everything the agent owns (with its mirrors) and unlist it
        from other agents' events.  Returns the number of entries removed."""
        removed = 0
        owned_primaries = set()
        for eid, event in list(self._events.items()):
            if event.owner == agent_id:
                if not event.is_mirror:
                    owned_primaries.add(eid)
                del self._events[eid]
                removed += 1
        for eid, event in list(self._events.items()):
            if event.mirror_of in owned_primaries:
                del self._events[eid]
                removed += 1
            elif not event.is_mirror and agent_id in event.participants:
                event.participants.remove(agent_id)
        return removed

    # --- inspection / persistence ---

    def pending(self) -> list[Event]:
        return [self._events[eid] for eid in sorted(self._events)]

    def pending_for(self, agent_id: int) -> list[Event]:
        return [e for e in self.pending() if e.owner == agent_id]

    def __len__(self) -> int:
        return len(self._events)

    def to_dict(self) -> dict:
        return {
            "clock": self.clock,
            "next_id": self._next_id,
            "handlers": sorted(self.handlers),
            "events": [e.to_dict() for e in self.pending()],
        }

    @staticmethod
    def from_dict(d: dict) -> "EventQueue":
        queue = EventQueue(d["handlers"])
        queue.clock = d["clock"]
        queue._next_id = d["next_id"]
        for ed in d["events"]:
            event = Event.from_dict(ed)
            queue._events[event.id] = event
            heapq.heappush(queue._heap, (event.exec_time, event.id))
        return queue
