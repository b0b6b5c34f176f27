"""The simulation loop: observe, decide, validate, schedule, execute.

Each timestep sweeps non-busy agents in ascending id order, turning their
observations into validated commands and scheduling the resulting events;
the queue is then drained up to the current clock, the success predicate is
evaluated, and the clock advances.  Everything stochastic is a hash-draw of
the run seed, so a run is a pure function of (scenario, config) and can be
snapshotted and resumed without drift.

Ablation flags swap out one architectural piece at a time: route cues
(``no_navigation``), conversations (``no_communication``), the event queue
(``no_scheduler`` — per-agent action slots applied in rotating round-robin
order), and agent memory (``no_memory``).
"""

from __future__ import annotations

import json
import threading
import time as _time
from dataclasses import dataclass, field
from typing import Optional

from . import conversation as convo
from . import environment as envmod
from .agent import (
    AgentProfile,
    AgentState,
    Command,
    FIRST_AGENT_ID,
    MemoryStore,
    ObservationPacket,
    STATUS_ACTING,
    STATUS_CONVERSING,
    STATUS_IDLE,
    create_agent,
)
from .errors import InvalidScenario, UnknownAgent
from .gateway import Gateway, GatewayConfig
from .policy import Policy, make_policy
from .scheduler import ACTION, COMMUNICATION, Event, EventQueue
from .store import RunLog, ScenarioDocument

RUNNING = "running"
PAUSED = "paused"
SUCCEEDED = "succeeded"
TIMED_OUT = "timed_out"
ABORTED = "aborted"

ABLATION_FLAGS = ("no_navigation", "no_communication", "no_scheduler", "no_memory")

# Timesteps each action occupies; moves scale with path length.
DURATIONS = {"search": 3, "take": 1, "drop": 1, "give": 1, "communicate": 1,
             "idle": 1, "stabilize": 3, "clear": 3}

HANDLERS = ("complete_move", "complete_search", "complete_take",
            "complete_drop", "complete_give", "complete_stabilize",
            "complete_clear", "complete_idle", "conversation_open",
            "conversation_turn")

TRUST_PRIMES = {
    "high": " They trust their teammates completely and rely on them without hesitation.",
    "low": " They are wary of their teammates and double-check everything the team does.",
}


@dataclass
class SimulationConfig:
    seed: int = 0
    max_timesteps: int = 2000
    ablations: dict = field(default_factory=dict)
    policy_mode: str = "scripted"  # scripted | gateway | random
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    max_conversation_turns: int = convo.DEFAULT_MAX_TURNS
    memory_window: int = 20
    trust_prime: str = "none"  # none | high | low

    def __post_init__(self):
        if self.max_timesteps < 1:
            raise ValueError("max_timesteps must be >= 1")
        self.ablations = {flag: bool(self.ablations.get(flag, False))
                          for flag in ABLATION_FLAGS}

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "max_timesteps": self.max_timesteps,
            "ablations": dict(self.ablations),
            "policy_mode": self.policy_mode,
            "gateway": self.gateway.__dict__.copy(),
            "max_conversation_turns": self.max_conversation_turns,
            "memory_window": self.memory_window,
            "trust_prime": self.trust_prime,
        }

    @staticmethod
    def from_dict(d: dict) -> "SimulationConfig":
        d = dict(d)
        d["gateway"] = GatewayConfig.from_dict(d.get("gateway", {}))
        return SimulationConfig(**d)


@dataclass
class Metrics:
    team: dict
    per_agent: dict

    def to_dict(self) -> dict:
        return {"team": dict(self.team),
                "per_agent": {str(k): v for k, v in self.per_agent.items()}}


class SimulationState:
    """Mutable world of one run; owned by a single execution context."""

    def __init__(self, scenario: ScenarioDocument, config: SimulationConfig,
                 env: envmod.Environment, gateway: Gateway,
                 log: Optional[RunLog] = None):
        self.scenario = scenario
        self.config = config
        self.env = env
        self.gateway = gateway
        self.log = log
        self.clock = 0
        self.status = RUNNING
        self.duration_steps: Optional[int] = None

        self.profiles: dict[int, AgentProfile] = {}
        self.states: dict[int, AgentState] = {}
        self.memories: dict[int, MemoryStore] = {}
        self.agent_stats: dict[int, dict] = {}
        self.entities: dict[str, envmod.Entity] = {
            eid: envmod.Entity.from_dict(e.to_dict())
            for eid, e in env.entities.items()
        }
        self.searched_regions: set[int] = set()
        self.located_victims: set[str] = set()

        self.queue = EventQueue(HANDLERS)
        self.conversations: dict[int, convo.Conversation] = {}
        self.next_conversation_id = 1
        self.pending_slots: dict[int, dict] = {}  # no_scheduler action slots

        self.policy: Policy = make_policy(
            config.policy_mode, config.seed, config.ablations,
            gateway=gateway, scenario_description=scenario.description,
        )
        self._region_names = {
            leaf.name.lower(): rid for rid, leaf in env.leaves.items()
        }

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    @property
    def ablations(self) -> dict:
        return self.config.ablations

    def agent_ids(self) -> list[int]:
        return sorted(self.profiles)

    def hospital_region(self) -> Optional[int]:
        return self.env.region_tagged("hospital")

    def _emit(self, kind: str, agent: Optional[int] = None,
              command: Optional[dict] = None, event: Optional[dict] = None,
              outcome: Optional[dict] = None, data: Optional[dict] = None) -> None:
        if self.log is None:
            return
        record: dict = {"timestep": self.clock, "kind": kind}
        if agent is not None:
            profile = self.profiles[agent]
            record["agent"] = {"id": agent, "name": profile.name,
                               "role": profile.role}
        if command is not None:
            record["command"] = command
        if event is not None:
            record["event"] = event
        if outcome is not None:
            record["outcome"] = outcome
        if data is not None:
            record["data"] = data
        self.log.append(record)

    def resolve_region(self, text: str) -> Optional[int]:
        if text is None:
            return None
        raw = str(text).strip()
        if raw.isdigit() and int(raw) in self.env.leaves:
            return int(raw)
        low = raw.lower()
        if low in self._region_names:
            return self._region_names[low]
        if low in self.env.tags:
            return self.env.tags[low]
        return None

    def resolve_agent(self, text: str) -> Optional[int]:
        raw = str(text).strip()
        if raw.isdigit() and int(raw) in self.profiles:
            return int(raw)
        low = raw.lower()
        for agent_id in self.agent_ids():
            if self.profiles[agent_id].name.lower() == low:
                return agent_id
        return None

    def resolve_entity(self, text: str, region: Optional[int] = None) -> Optional[str]:
        raw = str(text).strip().lower()
        if raw in self.entities:
            return raw
        matches = []
        for eid in sorted(self.entities):
            entity = self.entities[eid]
            if entity.name.lower() == raw:
                if region is None or self._entity_region(entity) == region:
                    matches.append(eid)
        return matches[0] if matches else None

    def _entity_region(self, entity: envmod.Entity) -> Optional[int]:
        cell = entity.cell
        if cell is None:
            return None
        return envmod.room_of(self.env, cell)

    def _blocked_doors(self) -> set[tuple[int, int]]:
        blocked = set()
        for entity in self.entities.values():
            if (entity.state.get("blocks_door") and
                    not entity.state.get("cleared") and entity.cell is not None
                    and entity.cell in self.env.doors):
                blocked.add(entity.cell)
        return blocked

    def _entities_visible_from(self, region: int) -> list[envmod.Entity]:
        """Entities in the room, plus anything sitting on its doors."""
        door_cells = {door for _, door in self.env.adjacency[region]}
        out = []
        for eid in sorted(self.entities):
            entity = self.entities[eid]
            cell = entity.cell
            if cell is None:
                continue
            if cell in door_cells or envmod.room_of(self.env, cell) == region:
                out.append(entity)
        return out

    def occupied_cells(self) -> dict[int, tuple[int, int]]:
        return {aid: self.states[aid].location for aid in self.agent_ids()}

    # ------------------------------------------------------------------
    # observation
    # ------------------------------------------------------------------

    def observe(self, agent_id: int, forced: bool = False) -> ObservationPacket:
        if agent_id not in self.profiles:
            raise UnknownAgent(f"no agent {agent_id}")
        state = self.states[agent_id]
        if not forced and state.busy_until > self.clock:
            raise ValueError(f"agent {agent_id} is mid-event until {state.busy_until}")
        region = state.current_region
        leaf = self.env.leaves[region]
        searched = region in self.searched_regions
        blocked_doors = self._blocked_doors()

        visible = []
        for entity in self._entities_visible_from(region):
            hidden = (entity.kind == "interactive"
                      and not entity.state.get("blocks_door")
                      and envmod.room_of(self.env, entity.cell) not in self.searched_regions)
            if hidden:
                continue
            visible.append({"id": entity.id, "name": entity.name,
                            "kind": entity.kind,
                            "state": dict(sorted(entity.state.items()))})

        exits = []
        for neighbor, door in self.env.adjacency[region]:
            exits.append({
                "region": neighbor,
                "name": self.env.leaves[neighbor].name,
                "door": list(door),
                "blocked": door in blocked_doors,
            })

        routes: dict[int, dict] = {}
        if not self.ablations["no_navigation"]:
            for rid, info in envmod.region_routes(
                    self.env, region, blocked_doors=blocked_doors).items():
                routes[rid] = {
                    "next_region": info["next_region"],
                    "door": list(info["door"]),
                    "hops": info["hops"],
                    "name": self.env.leaves[rid].name,
                }

        # Obstructed doors an agent could walk up to (their near side is
        # reachable); engineers use these to unblock the map.
        reachable_blocked = []
        for door in sorted(blocked_doors):
            for side in self.env.doors[door]:
                if side == region or side in routes:
                    reachable_blocked.append({
                        "region": side,
                        "name": self.env.leaves[side].name,
                        "door": list(door),
                    })
                    break

        no_memory = self.ablations["no_memory"]
        known_victims = []
        if not no_memory:
            for eid in sorted(self.located_victims):
                entity = self.entities.get(eid)
                if (entity is None or entity.carried_by is not None
                        or entity.state.get("condition") == "rescued"):
                    continue
                known_victims.append(
                    {"id": eid, "region": envmod.room_of(self.env, entity.cell)})
        packet = ObservationPacket(
            clock=self.clock,
            agent_id=agent_id,
            region_id=region,
            region_name=leaf.name,
            region_description=leaf.description,
            region_searched=searched,
            visible_entities=visible,
            exits=sorted(exits, key=lambda e: e["region"]),
            routes=routes,
            visited_regions=[] if no_memory else sorted(state.visited_regions),
            searched_regions=[] if no_memory else sorted(self.searched_regions),
            known_victims=known_victims,
            inventory=list(state.inventory),
            teammates=[
                {"agent_id": other, "name": self.profiles[other].name,
                 "role": self.profiles[other].role,
                 "same_region": self.states[other].current_region == region}
                for other in self.agent_ids() if other != agent_id
            ],
            last_outcome=state.last_outcome,
            pending_messages=list(state.pending_messages),
            hospital_region=self.hospital_region(),
            steps_since_chat=self.clock - state.last_conversation_step,
            blocked_doors=reachable_blocked,
        )
        state.pending_messages.clear()
        return packet

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    def validate_action(self, command: Command, agent_id: int,
                        use_judge: bool = False) -> tuple[bool, str]:
        """Rule checks; in gateway mode a judge call may additionally veto."""
        ok, reason = self._rule_check(command, agent_id)
        if ok and use_judge and self.config.policy_mode == "gateway":
            verdict = self.gateway.complete("judge_validation", {
                "scenario": self.scenario.description,
                "world_state": f"clock={self.clock}",
                "agent": self.profiles[agent_id].name,
                "action": command.to_text(),
            })
            if verdict.strip().lower().startswith("invalid"):
                reason = verdict.split(":", 1)[1].strip() if ":" in verdict else "judge veto"
                return False, reason
        return ok, reason

    def _rule_check(self, command: Command, agent_id: int) -> tuple[bool, str]:
        state = self.states[agent_id]
        profile = self.profiles[agent_id]
        region = state.current_region

        if command.verb == "idle":
            return True, ""

        if command.verb == "move":
            target = self.resolve_region(command.to)
            if target is None:
                return False, f"unknown region {command.to!r}"
            if target == region:
                return False, "already there"
            if self.ablations["no_navigation"]:
                if target not in envmod.adjacent_rooms(self.env, region):
                    return False, "not an adjacent room"
            dest = self._pick_destination_cell(target)
            if dest is None:
                return False, "no free cell in target room"
            try:
                envmod.shortest_path(self.env, state.location, dest,
                                     extra_blocked=self._blocked_doors())
            except envmod.NoPath:
                return False, "no open route"
            except Exception:
                return False, "no open route"
            return True, ""

        if command.verb == "search":
            return True, ""

        if command.verb == "take":
            eid = self.resolve_entity(command.obj, region)
            if eid is None:
                return False, "not present"
            entity = self.entities[eid]
            if entity.kind != "interactive":
                return False, "cannot be picked up"
            if entity.carried_by is not None:
                return False, "already carried"
            if self._entity_region(entity) != region:
                return False, "not present"
            if eid.startswith("victim"):
                if entity.state.get("condition") == "critical":
                    return False, "victim is critical and needs stabilization first"
                if entity.state.get("condition") == "rescued":
                    return False, "already rescued"
                if any(item.startswith("victim") for item in state.inventory):
                    return False, "already carrying a victim"
            return True, ""

        if command.verb == "drop":
            eid = self.resolve_entity(command.obj)
            if eid is None or eid not in state.inventory:
                return False, "nothing to give" if not state.inventory else "not in inventory"
            return True, ""

        if command.verb == "give":
            eid = self.resolve_entity(command.obj)
            if eid is None or eid not in state.inventory:
                return False, "nothing to give"
            target = self.resolve_agent(command.to)
            if target is None or target == agent_id:
                return False, "no such teammate"
            if self.states[target].current_region != region:
                return False, "teammate is not here"
            if eid.startswith("victim") and any(
                    item.startswith("victim")
                    for item in self.states[target].inventory):
                return False, "their hands are full"
            return True, ""

        if command.verb == "communicate":
            if self.ablations["no_communication"]:
                return False, "communication disabled"
            if self.ablations["no_scheduler"]:
                return False, "multi-agent events need the event scheduler"
            targets = self._resolve_invitees(command.to, agent_id)
            if not targets:
                return False, "no such teammate"
            return True, ""

        if command.verb == "stabilize":
            if profile.role.lower() != "medic":
                return False, "only a medic can stabilize"
            eid = self.resolve_entity(command.obj, region)
            if eid is None or self._entity_region(self.entities[eid]) != region:
                return False, "not present"
            if self.entities[eid].state.get("condition") != "critical":
                return False, "does not need stabilization"
            return True, ""

        if command.verb == "clear":
            if profile.role.lower() != "engineer":
                return False, "only an engineer can clear rubble"
            eid = self.resolve_entity(command.obj, region)
            if eid is None:
                return False, "not present"
            entity = self.entities[eid]
            if not entity.state.get("blocks_door") or entity.state.get("cleared"):
                return False, "nothing to clear"
            door_cells = {door for _, door in self.env.adjacency[region]}
            if entity.cell not in door_cells:
                return False, "not reachable from here"
            return True, ""

        return False, f"unsupported verb {command.verb!r}"

    def _resolve_invitees(self, to: str, initiator: int) -> list[int]:
        targets = []
        for part in str(to).replace(" and ", ",").split(","):
            part = part.strip()
            if not part:
                continue
            agent = self.resolve_agent(part)
            if agent is not None and agent != initiator and agent not in targets:
                targets.append(agent)
        return targets

    def _pick_destination_cell(self, region: int,
                               avoid: frozenset = frozenset()) -> Optional[tuple[int, int]]:
        occupied = set(self.occupied_cells().values()) | set(avoid)
        for cell in self.env.region_free_cells(region):
            if cell not in occupied:
                return cell
        return None

    # ------------------------------------------------------------------
    # the step
    # ------------------------------------------------------------------

    def step(self) -> None:
        if self.status != RUNNING:
            raise ValueError(f"cannot step a {self.status} simulation")
        if self.ablations["no_scheduler"]:
            self._step_round_robin()
        else:
            for agent_id in self.agent_ids():
                if self._eligible(agent_id):
                    self._decide_and_schedule(agent_id)
            self.queue.process_due(self.clock, self._execute_event)
        self._check_success()
        if self.status != RUNNING:
            return
        self.clock += 1
        self.queue.clock = max(self.queue.clock, self.clock)
        if self.clock >= self.config.max_timesteps:
            self.status = TIMED_OUT
            self.duration_steps = self.config.max_timesteps
            self._emit("system", data={"event": "run_finished",
                                       "status": self.status,
                                       "duration": self.duration_steps})

    def _eligible(self, agent_id: int) -> bool:
        state = self.states[agent_id]
        return (state.status == STATUS_IDLE
                and state.busy_until <= self.clock
                and not self.queue.pending_for(agent_id))

    def _decide_and_schedule(self, agent_id: int) -> None:
        packet = self.observe(agent_id)
        self._remember_observation(agent_id, packet)
        command = self.policy.decide(self.profiles[agent_id], packet)
        self._emit("decision", agent=agent_id,
                   command={"action": command.to_text(),
                            "rationale": command.rationale})
        ok, reason = self.validate_action(command, agent_id, use_judge=True)
        self._emit("validation", agent=agent_id,
                   command={"action": command.to_text(),
                            "rationale": command.rationale},
                   outcome={"success": ok, "reason": reason})
        if not ok:
            # One re-prompt, then a forced idle.
            command = self.policy.decide(self.profiles[agent_id], packet)
            ok, reason = self.validate_action(command, agent_id, use_judge=True)
            self._emit("validation", agent=agent_id,
                       command={"action": command.to_text(),
                                "rationale": command.rationale},
                       outcome={"success": ok, "reason": reason})
            if not ok:
                self.states[agent_id].last_outcome = {
                    "action": command.verb, "success": False, "reason": reason}
                command = Command("idle", rationale="forced idle after invalid action")
        self._schedule_command(command, agent_id)

    def _remember_observation(self, agent_id: int, packet: ObservationPacket) -> None:
        memory = self.memories[agent_id]
        if not memory.enabled:
            return
        victims = sum(1 for e in packet.visible_entities
                      if e["id"].startswith("victim"))
        summary = (f"t={packet.clock} in {packet.region_name}: "
                   f"{victims} victims visible, "
                   f"exits {[e['name'] for e in packet.exits]}")
        if packet.last_outcome:
            summary += (f"; last action {packet.last_outcome.get('action')} "
                        f"{'succeeded' if packet.last_outcome.get('success') else 'failed'}")
        memory.remember(packet.clock, summary)

    def _schedule_command(self, command: Command, agent_id: int) -> None:
        state = self.states[agent_id]
        payload: dict = {"agent": agent_id, "verb": command.verb}
        participants: list[int] = []
        event_type = ACTION
        handler = "complete_idle"
        duration = DURATIONS.get(command.verb, 1)

        if command.verb == "move":
            target = self.resolve_region(command.to)
            dest = self._pick_destination_cell(target)
            path = envmod.shortest_path(self.env, state.location, dest,
                                        extra_blocked=self._blocked_doors())
            duration = max(1, len(path) - 1)
            payload.update(target_region=target, dest=list(dest),
                           path_length=len(path) - 1)
            state.path = path[1:]
            handler = "complete_move"
        elif command.verb == "search":
            payload.update(region=state.current_region)
            handler = "complete_search"
        elif command.verb == "take":
            payload.update(entity=self.resolve_entity(command.obj, state.current_region))
            handler = "complete_take"
        elif command.verb == "drop":
            payload.update(entity=self.resolve_entity(command.obj))
            handler = "complete_drop"
        elif command.verb == "give":
            payload.update(entity=self.resolve_entity(command.obj),
                           target=self.resolve_agent(command.to))
            handler = "complete_give"
        elif command.verb == "stabilize":
            payload.update(entity=self.resolve_entity(command.obj, state.current_region))
            handler = "complete_stabilize"
        elif command.verb == "clear":
            payload.update(entity=self.resolve_entity(command.obj, state.current_region))
            handler = "complete_clear"
        elif command.verb == "communicate":
            invitees = self._resolve_invitees(command.to, agent_id)
            payload.update(invitees=invitees, opener_rationale=command.rationale)
            participants = invitees
            event_type = COMMUNICATION
            handler = "conversation_open"
            self.agent_stats[agent_id]["communications_initiated"] += 1

        payload["duration_steps"] = duration
        exec_time = self.clock + duration
        if self.ablations["no_scheduler"]:
            self.pending_slots[agent_id] = {
                "handler": handler, "payload": payload, "exec_time": exec_time,
                "event_type": event_type, "duration": duration,
            }
        else:
            self.queue.add_event(event_type, exec_time, handler, payload,
                                 participants, owner=agent_id)
        state.status = STATUS_ACTING
        state.busy_until = exec_time

    # --- round-robin mode (no_scheduler ablation) ---

    def _step_round_robin(self) -> None:
        ids = self.agent_ids()
        if not ids:
            return
        start = self.clock % len(ids)
        order = ids[start:] + ids[:start]
        for agent_id in order:
            state = self.states[agent_id]
            if (state.status == STATUS_IDLE and state.busy_until <= self.clock
                    and agent_id not in self.pending_slots):
                self._decide_and_schedule(agent_id)
        for agent_id in order:
            slot = self.pending_slots.get(agent_id)
            if slot and slot["exec_time"] <= self.clock:
                del self.pending_slots[agent_id]
                event = Event(0, slot["event_type"], slot["exec_time"],
                              slot["handler"], slot["payload"], [], agent_id)
                self._execute_event(event)

    # ------------------------------------------------------------------
    # event execution
    # ------------------------------------------------------------------

    def _execute_event(self, event: Event) -> None:
        if event.is_mirror:
            return  # mirrors only block; the primary carries the effect
        handler = getattr(self, f"_on_{event.handler}")
        handler(event)

    def _finish(self, event: Event, success: bool, reason: str = "",
                extra: Optional[dict] = None) -> None:
        agent_id = event.payload["agent"]
        verb = event.payload["verb"]
        state = self.states[agent_id]
        state.status = STATUS_IDLE
        state.path = []
        outcome = {"action": verb, "success": success, "reason": reason}
        if extra:
            outcome.update(extra)
        state.last_outcome = outcome
        stats = self.agent_stats[agent_id]
        stats["action_counts"][verb] = stats["action_counts"].get(verb, 0) + 1
        self._emit(
            "event_executed", agent=agent_id,
            event={"type": event.event_type,
                   "duration": event.payload.get("duration_steps",
                                                 DURATIONS.get(verb, 1)),
                   "participants": list(event.participants)},
            outcome={"success": success, "reason": reason},
            data={"verb": verb, **(extra or {})},
        )

    def _on_complete_idle(self, event: Event) -> None:
        self._finish(event, True)

    def _on_complete_move(self, event: Event) -> None:
        agent_id = event.payload["agent"]
        state = self.states[agent_id]
        target = event.payload["target_region"]
        dest = tuple(event.payload["dest"])
        occupied = {cell for aid, cell in self.occupied_cells().items()
                    if aid != agent_id}
        if dest in occupied:
            fallback = None
            for cell in self.env.region_free_cells(target):
                if cell not in occupied:
                    fallback = cell
                    break
            if fallback is None:
                self._finish(event, False, "target room is full")
                return
            dest = fallback
        state.location = dest
        state.current_region = target
        state.visited_regions.add(target)
        state.steps_taken += event.payload.get("path_length", 0)
        self._finish(event, True,
                     extra={"region": target,
                            "cells": event.payload.get("path_length", 0)})

    def _on_complete_search(self, event: Event) -> None:
        agent_id = event.payload["agent"]
        region = event.payload["region"]
        newly = []
        for eid in sorted(self.entities):
            entity = self.entities[eid]
            if not eid.startswith("victim") or entity.cell is None:
                continue
            if envmod.room_of(self.env, entity.cell) == region and eid not in self.located_victims:
                newly.append(eid)
        self.located_victims.update(newly)
        self.searched_regions.add(region)
        self.agent_stats[agent_id]["targets_located"] += len(newly)
        self._finish(event, True, extra={"found": len(newly), "region": region})

    def _on_complete_take(self, event: Event) -> None:
        agent_id = event.payload["agent"]
        eid = event.payload.get("entity")
        state = self.states[agent_id]
        entity = self.entities.get(eid)
        # The world may have changed since validation; re-check before acting.
        if (entity is None or entity.carried_by is not None
                or entity.cell is None
                or envmod.room_of(self.env, entity.cell) != state.current_region):
            self._finish(event, False, "no longer there")
            return
        if eid.startswith("victim"):
            if entity.state.get("condition") == "critical":
                self._finish(event, False, "victim is critical and needs stabilization first")
                return
            if any(item.startswith("victim") for item in state.inventory):
                self._finish(event, False, "already carrying a victim")
                return
        entity.location = ("carried", agent_id)
        state.inventory.append(eid)
        self._finish(event, True, extra={"entity": eid})

    def _on_complete_drop(self, event: Event) -> None:
        agent_id = event.payload["agent"]
        eid = event.payload.get("entity")
        state = self.states[agent_id]
        if eid not in state.inventory:
            self._finish(event, False, "not in inventory")
            return
        state.inventory.remove(eid)
        entity = self.entities[eid]
        entity.location = state.location
        extra = {"entity": eid}
        hospital = self.hospital_region()
        if (eid.startswith("victim") and hospital is not None
                and state.current_region == hospital):
            entity.state["condition"] = "rescued"
            extra["rescued"] = True
        self._finish(event, True, extra=extra)

    def _on_complete_give(self, event: Event) -> None:
        agent_id = event.payload["agent"]
        eid = event.payload.get("entity")
        target = event.payload.get("target")
        state = self.states[agent_id]
        if eid not in state.inventory:
            self._finish(event, False, "nothing to give")
            return
        if target not in self.states or \
                self.states[target].current_region != state.current_region:
            self._finish(event, False, "teammate is not here")
            return
        if eid.startswith("victim") and any(
                item.startswith("victim") for item in self.states[target].inventory):
            self._finish(event, False, "their hands are full")
            return
        state.inventory.remove(eid)
        self.states[target].inventory.append(eid)
        self.entities[eid].location = ("carried", target)
        self._finish(event, True, extra={"entity": eid, "to": target})

    def _on_complete_stabilize(self, event: Event) -> None:
        eid = event.payload.get("entity")
        entity = self.entities.get(eid)
        if entity is None or entity.state.get("condition") != "critical":
            self._finish(event, False, "does not need stabilization")
            return
        entity.state["condition"] = "stable"
        self._finish(event, True, extra={"entity": eid})

    def _on_complete_clear(self, event: Event) -> None:
        eid = event.payload.get("entity")
        entity = self.entities.get(eid)
        if entity is None or not entity.state.get("blocks_door") \
                or entity.state.get("cleared"):
            self._finish(event, False, "nothing to clear")
            return
        entity.state["cleared"] = "true"
        entity.state.pop("blocks_door", None)
        self._finish(event, True, extra={"entity": eid})

    # --- conversations ---

    def _selector(self):
        if self.config.policy_mode != "gateway":
            return None

        def select(conversation: convo.Conversation):
            names = [self.profiles[p].name for p in conversation.participants]
            last = conversation.last_speaker
            response = self.gateway.complete("next_speaker", {
                "participants": ", ".join(names),
                "last_speaker": self.profiles[last].name if last is not None else "",
                "transcript": "\n".join(t.text for t in conversation.transcript[-6:]),
            })
            return self.resolve_agent(response.strip())

        return select

    def _judge(self):
        if self.config.policy_mode != "gateway":
            return None

        def judge(conversation: convo.Conversation) -> bool:
            response = self.gateway.complete("judge_redundancy", {
                "transcript": "\n".join(t.text for t in conversation.transcript),
            })
            return response.strip().lower().startswith("redundant")

        return judge

    def _on_conversation_open(self, event: Event) -> None:
        initiator = event.payload["agent"]
        invitees = list(event.payload["invitees"])
        conv_id = self.next_conversation_id
        self.next_conversation_id += 1
        opener = self.policy.utterance(self.profiles[initiator], [], self.clock)
        conversation = convo.open_conversation(
            conv_id, initiator, invitees, opener, self.clock,
            max_turns=self.config.max_conversation_turns)
        self.conversations[conv_id] = conversation

        for invitee in invitees:
            state = self.states[invitee]
            busy = state.status == STATUS_ACTING and state.busy_until > self.clock
            accepted = (state.status != STATUS_CONVERSING
                        and self.policy.accept_invitation(
                            self.profiles[invitee],
                            any(i.startswith("victim") for i in state.inventory),
                            busy, self.clock))
            convo.record_invitation_reply(conversation, invitee, accepted)
            if accepted:
                if busy or self.queue.pending_for(invitee):
                    self.queue.cancel_agent_events(invitee)
                    state.path = []
                    state.last_outcome = {"action": "join", "success": True,
                                          "reason": "abandoned current event to talk"}
                state.status = STATUS_CONVERSING
                state.conversation_id = conv_id
                state.busy_until = self.clock
            else:
                self._emit("system", agent=invitee,
                           data={"event": "invitation_declined",
                                 "conversation_id": conv_id})

        if conversation.is_open():
            ini_state = self.states[initiator]
            ini_state.status = STATUS_CONVERSING
            ini_state.conversation_id = conv_id
            self._echo_turn(conversation, conversation.transcript[0])
            self._finish_conversation_event(event, True, "", conv_id)
            self._schedule_next_turn(conversation)
        else:
            ini_state = self.states[initiator]
            ini_state.status = STATUS_IDLE
            ini_state.last_conversation_step = self.clock
            ini_state.last_outcome = {
                "action": "communicate", "success": False,
                "reason": "all invitees declined"}
            self._finish_conversation_event(event, False, "all invitees declined",
                                            conv_id)

    def _finish_conversation_event(self, event: Event, success: bool,
                                   reason: str, conv_id: int) -> None:
        agent_id = event.payload["agent"]
        stats = self.agent_stats[agent_id]
        verb = event.payload["verb"]
        stats["action_counts"][verb] = stats["action_counts"].get(verb, 0) + 1
        self._emit(
            "event_executed", agent=agent_id,
            event={"type": COMMUNICATION, "duration": 1,
                   "participants": list(event.participants)},
            outcome={"success": success, "reason": reason},
            data={"verb": verb, "conversation_id": conv_id},
        )

    def _echo_turn(self, conversation: convo.Conversation, turn: convo.Turn) -> None:
        speaker = self.profiles[turn.speaker]
        self._emit("conversation_turn", agent=turn.speaker,
                   data={"conversation_id": conversation.conversation_id,
                         "turn": turn.index, "utterance": turn.text})
        for participant in conversation.participants:
            memory = self.memories[participant]
            memory.remember(self.clock, f"{speaker.name} said: {turn.text}")
            if participant != turn.speaker:
                self.states[participant].pending_messages.append(
                    {"from": speaker.name, "text": turn.text,
                     "timestep": self.clock})

    def _schedule_next_turn(self, conversation: convo.Conversation) -> None:
        speaker = convo.next_speaker(conversation, self._selector())
        others = [p for p in conversation.participants if p != speaker]
        self.queue.add_event(
            COMMUNICATION, self.clock + 1, "conversation_turn",
            {"agent": speaker, "verb": "communicate",
             "conversation_id": conversation.conversation_id},
            participants=others, owner=speaker)
        for participant in conversation.participants:
            self.states[participant].busy_until = self.clock + 1

    def _on_conversation_turn(self, event: Event) -> None:
        conv_id = event.payload["conversation_id"]
        conversation = self.conversations.get(conv_id)
        agent_id = event.payload["agent"]
        if conversation is None or not conversation.is_open() \
                or agent_id not in conversation.participants:
            self._finish_conversation_event(event, False, "conversation ended",
                                            conv_id)
            self._release_if_conversing(agent_id, conv_id)
            return
        transcript = [t.text for t in conversation.transcript]
        utterance = self.policy.utterance(self.profiles[agent_id], transcript,
                                          self.clock)
        convo.advance_turn(conversation, agent_id, utterance, self.clock)
        self._echo_turn(conversation, conversation.transcript[-1])
        self._finish_conversation_event(event, True, "", conv_id)
        terminate, reason = convo.should_terminate(conversation, self._judge())
        if terminate:
            conversation.close(reason)
            self._close_conversation(conversation)
        else:
            self._schedule_next_turn(conversation)

    def _close_conversation(self, conversation: convo.Conversation) -> None:
        for participant in conversation.participants:
            state = self.states[participant]
            if state.conversation_id == conversation.conversation_id:
                state.status = STATUS_IDLE
                state.conversation_id = None
                state.last_conversation_step = self.clock
                state.busy_until = self.clock
        self._emit("system",
                   data={"event": "conversation_closed",
                         "conversation_id": conversation.conversation_id,
                         "reason": conversation.close_reason,
                         "turns": len(conversation.transcript)})

    def _release_if_conversing(self, agent_id: int, conv_id: int) -> None:
        state = self.states[agent_id]
        if state.status == STATUS_CONVERSING and state.conversation_id == conv_id:
            state.status = STATUS_IDLE
            state.conversation_id = None
            state.last_conversation_step = self.clock

    # ------------------------------------------------------------------
    # success + metrics
    # ------------------------------------------------------------------

    def evaluate_success(self) -> bool:
        """Pure evaluation of the scenario's success clauses.

        A scenario without clauses has no detectable goal and never
        succeeds; it runs until the step cap.
        """
        if not self.scenario.success:
            return False
        return all(self._clause_holds(clause) for clause in self.scenario.success)

    def _clause_holds(self, clause: dict) -> bool:
        count = self._clause_count(clause)
        threshold = clause["threshold"]
        op = clause.get("op", ">=")
        return {
            ">=": count >= threshold,
            "<=": count <= threshold,
            "==": count == threshold,
            "!=": count != threshold,
            ">": count > threshold,
            "<": count < threshold,
        }[op]

    def _clause_count(self, clause: dict) -> int:
        filt = clause.get("filter", {})
        location = clause.get("location")
        total = 0
        for eid in sorted(self.entities):
            entity = self.entities[eid]
            if "name_prefix" in filt:
                prefix = filt["name_prefix"].lower()
                if not (eid.startswith(prefix)
                        or entity.name.lower().startswith(prefix)):
                    continue
            if "kind" in filt and entity.kind != filt["kind"]:
                continue
            if "attr" in filt and entity.state.get(filt["attr"]) != filt.get("value"):
                continue
            if location is not None:
                if "carried" in location:
                    if bool(entity.carried_by is not None) != bool(location["carried"]):
                        continue
                else:
                    if entity.cell is None:
                        continue
                    region = envmod.room_of(self.env, entity.cell)
                    if "region_tag" in location:
                        if region != self.env.region_tagged(location["region_tag"]):
                            continue
                    if "region_id" in location and region != location["region_id"]:
                        continue
            total += 1
        return total

    def _check_success(self) -> None:
        success = self.evaluate_success()
        self._emit("success_check",
                   outcome={"success": success, "reason": ""})
        if success:
            self.status = SUCCEEDED
            self.duration_steps = self.clock
            self._emit("system", data={"event": "run_finished",
                                       "status": self.status,
                                       "duration": self.duration_steps})

    def victim_total(self) -> int:
        return sum(1 for eid in self.entities if eid.startswith("victim"))

    def victims_rescued(self) -> int:
        return sum(1 for eid, e in self.entities.items()
                   if eid.startswith("victim")
                   and e.state.get("condition") == "rescued")

    def check_conservation(self) -> None:
        """Every victim is in exactly one place: a cell or one inventory."""
        for eid, entity in self.entities.items():
            if not eid.startswith("victim"):
                continue
            holders = [aid for aid, st in self.states.items()
                       if eid in st.inventory]
            if entity.carried_by is None:
                if holders or entity.cell is None:
                    raise AssertionError(f"{eid} conservation violated: {holders}")
            else:
                if holders != [entity.carried_by]:
                    raise AssertionError(
                        f"{eid} carried by {entity.carried_by} but held by {holders}")

    # ------------------------------------------------------------------
    # views + persistence
    # ------------------------------------------------------------------

    def state_view(self) -> dict:
        matrix = envmod.to_matrix(self.env, self.occupied_cells())
        return {
            "clock": self.clock,
            "status": self.status,
            "matrix": matrix.to_dict(),
            "agents": [
                {
                    "id": aid,
                    "name": self.profiles[aid].name,
                    "role": self.profiles[aid].role,
                    "location": list(self.states[aid].location),
                    "region": self.states[aid].current_region,
                    "status": self.states[aid].status,
                    "inventory": list(self.states[aid].inventory),
                    "narrative": self._narrative(aid),
                }
                for aid in self.agent_ids()
            ],
            "entities": [self.entities[eid].to_dict()
                         for eid in sorted(self.entities)],
            "conversations": [self.conversations[cid].to_dict()
                              for cid in sorted(self.conversations)],
            "searched_regions": sorted(self.searched_regions),
            "regions": [
                {"id": rid, "name": leaf.name, "rect": list(leaf.free_rect)}
                for rid, leaf in sorted(self.env.leaves.items())
            ],
            "doors": [list(door) for door in sorted(self.env.doors)],
        }

    def _narrative(self, agent_id: int) -> str:
        state = self.states[agent_id]
        leaf = self.env.leaves[state.current_region]
        doing = {STATUS_IDLE: "awaiting a task",
                 STATUS_ACTING: "busy with an action",
                 STATUS_CONVERSING: "talking with teammates"}[state.status]
        carrying = ", carrying " + ", ".join(state.inventory) if state.inventory else ""
        return f"{self.profiles[agent_id].name} is in {leaf.name}, {doing}{carrying}."

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "config": self.config.to_dict(),
            "environment": self.env.to_dict(),
            "clock": self.clock,
            "status": self.status,
            "duration_steps": self.duration_steps,
            "profiles": [self.profiles[a].to_dict() for a in self.agent_ids()],
            "states": {str(a): self.states[a].to_dict() for a in self.agent_ids()},
            "memories": {str(a): self.memories[a].to_dict() for a in self.agent_ids()},
            "agent_stats": {str(a): self.agent_stats[a] for a in self.agent_ids()},
            "entities": [self.entities[eid].to_dict() for eid in sorted(self.entities)],
            "searched_regions": sorted(self.searched_regions),
            "located_victims": sorted(self.located_victims),
            "queue": self.queue.to_dict(),
            "conversations": [self.conversations[cid].to_dict()
                              for cid in sorted(self.conversations)],
            "next_conversation_id": self.next_conversation_id,
            "pending_slots": {str(a): slot for a, slot in
                              sorted(self.pending_slots.items())},
            "log_next_seq": self.log.next_seq if self.log else 0,
        }

    @staticmethod
    def from_dict(d: dict, log: Optional[RunLog] = None,
                  gateway: Optional[Gateway] = None) -> "SimulationState":
        scenario = ScenarioDocument.from_dict(d["scenario"])
        config = SimulationConfig.from_dict(d["config"])
        env = envmod.Environment.from_dict(d["environment"])
        gateway = gateway or Gateway.from_config(config.gateway)
        state = SimulationState(scenario, config, env, gateway, log)
        state.clock = d["clock"]
        state.status = d["status"]
        state.duration_steps = d.get("duration_steps")
        for pd in d["profiles"]:
            profile = AgentProfile.from_dict(pd)
            state.profiles[profile.agent_id] = profile
        for key, sd in d["states"].items():
            state.states[int(key)] = AgentState.from_dict(sd)
        for key, md in d["memories"].items():
            state.memories[int(key)] = MemoryStore.from_dict(md, state.gateway.embed)
        state.agent_stats = {int(k): v for k, v in d["agent_stats"].items()}
        state.entities = {e["id"]: envmod.Entity.from_dict(e)
                          for e in d["entities"]}
        state.searched_regions = set(d["searched_regions"])
        state.located_victims = set(d["located_victims"])
        state.queue = EventQueue.from_dict(d["queue"])
        state.conversations = {
            cd["conversation_id"]: convo.Conversation.from_dict(cd)
            for cd in d["conversations"]
        }
        state.next_conversation_id = d["next_conversation_id"]
        state.pending_slots = {int(k): v for k, v in d["pending_slots"].items()}
        return state


# ---------------------------------------------------------------------------
# lifecycle
# ---------------------------------------------------------------------------


def init_simulation(scenario: ScenarioDocument, config: SimulationConfig,
                    log: Optional[RunLog] = None,
                    gateway: Optional[Gateway] = None) -> SimulationState:
    """Build the initial state: environment, agents at the start region."""
    if not scenario.agents:
        raise InvalidScenario("a scenario needs at least one agent")
    envp = scenario.environment
    if not envp.get("width") or not envp.get("height"):
        raise InvalidScenario("environment needs width and height")

    gateway = gateway or Gateway.from_config(config.gateway)
    env = envmod.generate_environment(
        seed=envp.get("seed", config.seed),
        width=envp["width"],
        height=envp["height"],
        complexity=envp.get("complexity", "low"),
        entity_specs=[envmod.EntitySpec.from_dict(e) for e in scenario.entities],
        tags=tuple(envp.get("regions", ())),
    )
    state = SimulationState(scenario, config, env, gateway, log)

    start_region = env.region_tagged("hospital")
    if start_region is None:
        start_region = env.leaf_ids()[0]
    start_cells = [c for c in env.region_free_cells(start_region)]
    if len(start_cells) < len(scenario.agents):
        raise InvalidScenario("start region cannot hold the whole team")

    for index, spec in enumerate(scenario.agents):
        agent_id = FIRST_AGENT_ID + index
        try:
            profile = create_agent(spec, gateway, agent_id)
        except ValueError as exc:
            raise InvalidScenario(f"agent {index}: {exc}")
        if config.trust_prime in TRUST_PRIMES:
            profile.backstory += TRUST_PRIMES[config.trust_prime]
        state.profiles[agent_id] = profile
        state.states[agent_id] = AgentState(
            location=start_cells[index], current_region=start_region)
        state.memories[agent_id] = MemoryStore(
            gateway.embed, window=config.memory_window,
            enabled=not config.ablations["no_memory"])
        state.agent_stats[agent_id] = {
            "communications_initiated": 0,
            "targets_located": 0,
            "action_counts": {},
        }

    state._emit("system", data={
        "event": "run_started",
        "seed": config.seed,
        "agents": len(scenario.agents),
        "ablations": {k: v for k, v in sorted(config.ablations.items())},
        "config_digest": _config_digest(scenario, config),
    })
    return state


def _config_digest(scenario: ScenarioDocument, config: SimulationConfig) -> str:
    import hashlib

    blob = json.dumps({"scenario": scenario.to_dict(),
                       "config": config.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def collect_metrics(state: SimulationState,
                    records: Optional[list[dict]] = None) -> Metrics:
    """Team and per-agent outcome statistics.

    Event counts come from the log when available so that a recount of the
    raw records reproduces them exactly.
    """
    records = records if records is not None else (
        state.log.read() if state.log else [])
    action_events = sum(
        1 for r in records
        if r["kind"] == "event_executed" and r["event"]["type"] == ACTION)
    communication_events = sum(
        1 for r in records
        if r["kind"] == "event_executed" and r["event"]["type"] == COMMUNICATION)

    total = state.victim_total()
    located = len(state.located_victims)
    visited_union: set[int] = set()
    for aid in state.agent_ids():
        visited_union |= state.states[aid].visited_regions

    duration = state.duration_steps
    if duration is None:
        duration = state.clock

    team = {
        "targets_located": located,
        "targets_remaining": total - located,
        "targets_rescued": state.victims_rescued(),
        "areas_discovered": len(visited_union),
        "communication_events": communication_events,
        "action_events": action_events,
        "duration_steps": duration,
    }
    per_agent = {}
    for aid in state.agent_ids():
        stats = state.agent_stats[aid]
        per_agent[aid] = {
            "steps_taken": state.states[aid].steps_taken,
            "communications_initiated": stats["communications_initiated"],
            "rooms_visited": len(state.states[aid].visited_regions),
            "targets_located": stats["targets_located"],
            "action_counts": dict(sorted(stats["action_counts"].items())),
        }
    return Metrics(team, per_agent)


def snapshot(state: SimulationState) -> bytes:
    """Serialize the full simulation state. Take it between timesteps only."""
    from .store import save_snapshot

    return save_snapshot(state.to_dict())


def restore(blob: bytes, log: Optional[RunLog] = None,
            gateway: Optional[Gateway] = None) -> SimulationState:
    """Rebuild a state from snapshot bytes.

    A fresh log is aligned to continue the original sequence numbering, so
    the resumed run's records are an exact suffix of the uninterrupted one.
    """
    from .store import load_snapshot

    state_dict = load_snapshot(blob)
    if log is not None and log.next_seq == 0:
        log.next_seq = state_dict.get("log_next_seq", 0)
    return SimulationState.from_dict(state_dict, log=log, gateway=gateway)


class Controls:
    """Thread-safe mailbox for pause/resume/step/abort verbs."""

    def __init__(self):
        self._lock = threading.Lock()
        self._paused = False
        self._abort = False
        self._step_once = False

    def send(self, verb: str) -> None:
        with self._lock:
            if verb == "pause":
                self._paused = True
            elif verb == "resume":
                self._paused = False
            elif verb == "step":
                self._step_once = True
            elif verb == "abort":
                self._abort = True
            else:
                raise ValueError(f"unknown control verb {verb!r}")

    def snapshot(self) -> tuple[bool, bool, bool]:
        with self._lock:
            step_once, self._step_once = self._step_once, False
            return self._paused, self._abort, step_once


def run(state: SimulationState, controls: Optional[Controls] = None,
        on_step=None) -> Metrics:
    """Drive the loop to completion, honoring controls between timesteps."""
    while state.status in (RUNNING, PAUSED):
        if controls is not None:
            paused, abort, step_once = controls.snapshot()
            if abort:
                state.status = ABORTED
                state.duration_steps = state.clock
                state._emit("system", data={"event": "run_finished",
                                            "status": ABORTED,
                                            "duration": state.clock})
                break
            if paused and not step_once:
                if state.status == RUNNING:
                    state.status = PAUSED
                _time.sleep(0.01)
                continue
            if state.status == PAUSED:
                state.status = RUNNING
        if state.status != RUNNING:
            break
        state.step()
        if on_step is not None:
            on_step(state)
    if state.log is not None:
        state.log.close()
    return collect_metrics(state)
