"""Event queue ordering, fan-out, cancellation, conservation."""

import random

import pytest

from teamsim.errors import PastTimestep, UnknownHandler
from teamsim.scheduler import ACTION, COMMUNICATION, EventQueue


def make_queue():
    return EventQueue(handlers=["noop", "other"])


def test_fanout_creates_one_entry_per_participant():
    queue = make_queue()
    queue.add_event(ACTION, 5, "noop", {}, participants=[3, 4], owner=2)
    assert len(queue) == 3
    mirrors = [e for e in queue.pending() if e.is_mirror]
    assert {m.owner for m in mirrors} == {3, 4}
    assert all(m.participants == [] for m in mirrors)
    assert all(m.exec_time == 5 for m in mirrors)


def test_add_past_timestep_rejected():
    queue = make_queue()
    queue.process_due(10)
    with pytest.raises(PastTimestep):
        queue.add_event(ACTION, 9, "noop", {}, owner=2)


def test_unknown_handler_rejected():
    queue = make_queue()
    with pytest.raises(UnknownHandler):
        queue.add_event(ACTION, 1, "mystery", {}, owner=2)


def test_same_time_fifo():
    queue = make_queue()
    first = queue.add_event(ACTION, 4, "noop", {"n": 1}, owner=2)
    second = queue.add_event(ACTION, 4, "noop", {"n": 2}, owner=3)
    executed = [r.event.id for r in queue.process_due(4)]
    assert executed == [first, second]


def test_process_due_only_due_entries():
    queue = make_queue()
    early = queue.add_event(ACTION, 1, "noop", {}, owner=2)
    queue.add_event(ACTION, 3, "noop", {}, owner=2)
    executed = [r.event.id for r in queue.process_due(2)]
    assert executed == [early]
    assert queue.clock == 2
    assert len(queue) == 1


def test_process_empty_queue_advances_clock():
    queue = make_queue()
    assert queue.process_due(7) == []
    assert queue.clock == 7


def test_handler_failure_reported_not_raised():
    queue = make_queue()
    queue.add_event(ACTION, 1, "noop", {"boom": True}, owner=2)
    queue.add_event(ACTION, 1, "noop", {}, owner=3)

    def execute(event):
        if event.payload.get("boom"):
            raise RuntimeError("handler exploded")

    results = queue.process_due(1, execute)
    assert [r.ok for r in results] == [False, True]
    assert "exploded" in results[0].error


def test_cancel_owner_removes_primaries_and_mirrors():
    queue = make_queue()
    queue.add_event(ACTION, 5, "noop", {}, participants=[3, 4], owner=2)
    assert queue.cancel_agent_events(2) == 3
    assert len(queue) == 0


def test_cancel_agent_with_two_events():
    queue = make_queue()
    queue.add_event(ACTION, 5, "noop", {}, owner=2)
    queue.add_event(ACTION, 6, "noop", {}, owner=2)
    queue.add_event(ACTION, 6, "noop", {}, owner=3)
    assert queue.cancel_agent_events(2) == 2
    assert queue.cancel_agent_events(99) == 0
    assert len(queue) == 1


def test_cancel_participant_drops_from_others_events():
    queue = make_queue()
    primary = queue.add_event(ACTION, 5, "noop", {}, participants=[3, 4], owner=2)
    removed = queue.cancel_agent_events(3)
    assert removed == 1  # agent 3's mirror entry
    remaining = {e.id: e for e in queue.pending()}
    assert remaining[primary].participants == [4]
    assert len(queue) == 2


def test_replay_determinism():
    def drive():
        queue = make_queue()
        trace = []
        rng = random.Random(42)
        for step in range(50):
            for _ in range(rng.randint(0, 3)):
                queue.add_event(
                    rng.choice([ACTION, COMMUNICATION]),
                    queue.clock + rng.randint(1, 5),
                    "noop", {"step": step},
                    participants=[rng.randint(3, 5)] if rng.random() < 0.3 else [],
                    owner=2)
            if rng.random() < 0.2:
                queue.cancel_agent_events(rng.randint(2, 5))
            trace.extend(r.event.id for r in queue.process_due(step))
        return trace

    assert drive() == drive()


def test_serialization_roundtrip():
    queue = make_queue()
    queue.add_event(ACTION, 5, "noop", {"x": 1}, participants=[3], owner=2)
    queue.process_due(2)
    restored = EventQueue.from_dict(queue.to_dict())
    assert restored.to_dict() == queue.to_dict()
    order = [r.event.id for r in restored.process_due(10)]
    assert order == [e.id for e in sorted(queue.pending(), key=lambda e: (e.exec_time, e.id))]


def sort_oracle(entries):
    """Stable sort on (exec_time, insertion id): the executed-order oracle."""
    return [eid for _, eid in sorted(entries, key=lambda pair: (pair[0], pair[1]))]


def test_execution_order_matches_sort_oracle_random():
    rng = random.Random(7)
    for _ in range(200):
        queue = make_queue()
        alive = []  # (exec_time, id)
        trace = []
        clock = 0
        for _ in range(rng.randint(1, 20)):
            op = rng.random()
            if op < 0.6:
                exec_time = clock + rng.randint(0, 10)
                participants = [rng.randint(3, 6)] if rng.random() < 0.3 else []
                owner = rng.randint(2, 6)
                participants = [p for p in participants if p != owner]
                eid = queue.add_event(ACTION, exec_time, "noop", {},
                                      participants=participants, owner=owner)
                alive.append((exec_time, eid, owner, None))
                for offset, p in enumerate(participants, start=1):
                    alive.append((exec_time, eid + offset, p, eid))
            elif op < 0.8:
                victim = rng.randint(2, 6)
                queue.cancel_agent_events(victim)
                owned = {e for (_, e, o, m) in alive if o == victim and m is None}
                alive = [(t, e, o, m) for (t, e, o, m) in alive
                         if o != victim and m not in owned]
            else:
                clock += rng.randint(0, 5)
                due = [(t, e) for (t, e, _, _) in alive if t <= clock]
                alive = [(t, e, o, m) for (t, e, o, m) in alive if t > clock]
                executed = [r.event.id for r in queue.process_due(clock)]
                assert executed == sort_oracle(due)
                trace.extend(executed)
        # Drain: conservation means everything left executes exactly once.
        remaining = [(t, e) for (t, e, _, _) in alive]
        final = [r.event.id for r in queue.process_due(clock + 100)]
        assert final == sort_oracle(remaining)
