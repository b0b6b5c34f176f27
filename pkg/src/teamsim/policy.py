"""Decision policies: gateway-backed, scripted, and fuzzing.

Every policy turns an observation packet into exactly one command.  The
scripted rescue policy is the deterministic reference used by the offline
test suites; the gateway policy assembles the mission prompt and parses the
model's reply, retrying a bounded number of times before falling back to
idle.
"""

from __future__ import annotations

import logging
from typing import Optional

from . import seeding
from .agent import AgentProfile, Command, ObservationPacket, parse_command
from .errors import UnparsableResponse

logger = logging.getLogger(__name__)

PARSE_RETRIES = 3
CHAT_COOLDOWN_STEPS = 15  # after sharing a discovery
IDLE_CHAT_COOLDOWN_STEPS = 60  # unprompted check-ins are rarer


class Policy:
    """Interface shared by all decision policies."""

    def decide(self, profile: AgentProfile, packet: ObservationPacket) -> Command:
        raise NotImplementedError

    def accept_invitation(self, profile: AgentProfile, carrying: bool,
                          busy: bool, clock: int) -> bool:
        raise NotImplementedError

    def utterance(self, profile: AgentProfile, transcript: list[str],
                  clock: int) -> str:
        raise NotImplementedError


def _chat_probability(profile: AgentProfile) -> float:
    # Extraversion biases how often an agent opens a conversation.
    return 0.1 + 0.3 * profile.big_five.extraversion


class ScriptedPolicy(Policy):
    """Deterministic rescue behavior: search, carry, deliver, explore.

    All stochastic choices are hash-draws of (seed, tag, clock, agent), so
    identical inputs replay identically and snapshots need no RNG state.
    """

    def __init__(self, seed: int, ablations: Optional[dict] = None):
        self.seed = seed
        self.ablations = dict(ablations or {})

    # -- helpers --

    def _no(self, flag: str) -> bool:
        return bool(self.ablations.get(flag, False))

    def decide(self, profile: AgentProfile, packet: ObservationPacket) -> Command:
        carrying = [e for e in packet.inventory if e.startswith("victim")]

        # Deliver first: a carried victim outranks everything else.
        if carrying:
            if packet.hospital_region is not None:
                if packet.region_id == packet.hospital_region:
                    return Command("drop", obj=carrying[0],
                                   rationale="deliver the victim to safety")
                return self._move_toward(packet, packet.hospital_region,
                                         "carry the victim to the hospital")
            return Command("drop", obj=carrying[0], rationale="nowhere to deliver")

        chat = self._maybe_communicate(profile, packet)
        if chat is not None:
            return chat

        if not packet.region_searched:
            return Command("search", rationale="sweep this room for targets")

        victims = [e for e in packet.visible_entities
                   if e["id"].startswith("victim")]
        stable = [e for e in victims if e["state"].get("condition", "stable") == "stable"]
        critical = [e for e in victims if e["state"].get("condition") == "critical"]
        if critical and profile.role.lower() == "medic":
            target = min(critical, key=lambda e: e["id"])
            return Command("stabilize", obj=target["id"],
                           rationale="stabilize a critical victim before transport")
        if stable:
            target = min(stable, key=lambda e: e["id"])
            return Command("take", obj=target["id"],
                           rationale="pick up the nearest victim")

        if profile.role.lower() == "engineer":
            rubble = [e for e in packet.visible_entities
                      if e["state"].get("blocks_door") and e["kind"] == "interactive"]
            if rubble:
                target = min(rubble, key=lambda e: e["id"])
                return Command("clear", obj=target["id"],
                               rationale="clear the blocked doorway")
            # A blocked door elsewhere outranks exploration for an engineer.
            seek = self._seek_blocked_door(packet)
            if seek is not None:
                return seek

        # Nothing demands attention here: an extraverted agent may check in
        # with the team before moving on.
        chat = self._maybe_communicate(profile, packet, idle_phase=True)
        if chat is not None:
            return chat
        return self._explore(packet)

    def _seek_blocked_door(self, packet: ObservationPacket) -> Optional[Command]:
        targets = []
        for blocked in packet.blocked_doors:
            rid = blocked["region"]
            if rid == packet.region_id:
                continue  # the pile here is already visible and handled
            if rid in packet.routes:
                targets.append((packet.routes[rid]["hops"], rid, blocked["name"]))
            elif any(e["region"] == rid and not e["blocked"]
                     for e in packet.exits):
                targets.append((1, rid, blocked["name"]))
        if not targets:
            return None
        _, _, name = min(targets)
        return Command("move", to=name, rationale="reach the blocked doorway")

    def _maybe_communicate(self, profile: AgentProfile,
                           packet: ObservationPacket,
                           idle_phase: bool = False) -> Optional[Command]:
        if self._no("no_communication") or self._no("no_scheduler"):
            return None
        if not packet.teammates:
            return None
        outcome = packet.last_outcome or {}
        found = (outcome.get("action") == "search" and outcome.get("success")
                 and outcome.get("found", 0) > 0)
        if found:
            if packet.steps_since_chat < CHAT_COOLDOWN_STEPS:
                return None
        elif idle_phase:
            if packet.steps_since_chat < IDLE_CHAT_COOLDOWN_STEPS:
                return None
        else:
            return None
        draw = seeding.unit_float(self.seed, "chatter", packet.clock, packet.agent_id)
        if draw >= _chat_probability(profile):
            return None
        same_room = [t for t in packet.teammates if t["same_region"]]
        pool = same_room or packet.teammates
        target = min(pool, key=lambda t: t["agent_id"])
        why = ("share what this room held" if found
               else "check in with the team")
        return Command("communicate", to=target["name"], rationale=why)

    def _ordinal(self, packet: ObservationPacket) -> int:
        # Rank of this agent in the team; used to spread targets so the
        # whole team does not converge on one room.
        ids = sorted([packet.agent_id] + [t["agent_id"] for t in packet.teammates])
        return ids.index(packet.agent_id)

    def _explore(self, packet: ObservationPacket) -> Command:
        open_exits = [e for e in packet.exits if not e["blocked"]]
        if self._no("no_memory"):
            # Without memory there is no notion of "already seen": wander.
            pool = open_exits or packet.exits
            if not pool:
                return Command("idle", rationale="no reachable exit")
            pick = seeding.choice(
                sorted(pool, key=lambda e: e["region"]),
                self.seed, "wander", packet.clock, packet.agent_id,
            )
            return Command("move", to=pick["name"], rationale="wander onward")

        searched = set(packet.searched_regions)
        victim_regions = sorted({v["region"] for v in packet.known_victims
                                 if v["region"] != packet.region_id})

        if packet.routes:
            fresh = sorted(
                (info["hops"], rid, info["name"])
                for rid, info in packet.routes.items()
                if rid not in searched
            )
            if fresh:
                _, _, name = fresh[self._ordinal(packet) % len(fresh)]
                return Command("move", to=name,
                               rationale="head for the nearest unsearched room")
            fetchable = sorted(
                (packet.routes[rid]["hops"], rid, packet.routes[rid]["name"])
                for rid in victim_regions if rid in packet.routes
            )
            if fetchable:
                _, _, name = fetchable[self._ordinal(packet) % len(fetchable)]
                return Command("move", to=name,
                               rationale="fetch a located victim")
            return Command("idle", rationale="nothing left to do")

        # Navigation ablated: only adjacent rooms are known.
        fresh_exits = [e for e in open_exits if e["region"] not in searched]
        victim_exits = [e for e in open_exits if e["region"] in victim_regions]
        pool = fresh_exits or victim_exits or open_exits
        if not pool:
            return Command("idle", rationale="no reachable exit")
        pick = seeding.choice(
            sorted(pool, key=lambda e: e["region"]),
            self.seed, "adjacent", packet.clock, packet.agent_id,
        )
        return Command("move", to=pick["name"],
                       rationale="try the next room over")

    def _move_toward(self, packet: ObservationPacket, region_id: int,
                     why: str) -> Command:
        if packet.routes and region_id in packet.routes:
            return Command("move", to=packet.routes[region_id]["name"], rationale=why)
        # Adjacent-only view: step through the exit that is the target, if
        # visible, otherwise pick a deterministic open exit.
        for exit_info in packet.exits:
            if exit_info["region"] == region_id and not exit_info["blocked"]:
                return Command("move", to=exit_info["name"], rationale=why)
        open_exits = [e for e in packet.exits if not e["blocked"]]
        if not open_exits:
            return Command("idle", rationale="boxed in")
        pick = seeding.choice(
            sorted(open_exits, key=lambda e: e["region"]),
            self.seed, "toward", packet.clock, packet.agent_id,
        )
        return Command("move", to=pick["name"], rationale=why)

    def accept_invitation(self, profile: AgentProfile, carrying: bool,
                          busy: bool, clock: int) -> bool:
        # Join unless mid-delivery; joining abandons the current event.
        return not carrying

    def utterance(self, profile: AgentProfile, transcript: list[str],
                  clock: int) -> str:
        lines = (
            "I just finished sweeping my room; moving to the next one.",
            "Found targets here, marking them for pickup.",
            "Copy that. I will keep to my side of the map.",
            "Nothing new over here, continuing the search.",
        )
        pick = seeding.choice(lines, self.seed, "utterance", clock,
                              profile.agent_id, len(transcript))
        return f"{profile.name}: {pick}"


class GatewayPolicy(Policy):
    """Prompt-assembly policy: the model chooses among offered actions."""

    def __init__(self, gateway, scenario_description: str, seed: int = 0):
        self.gateway = gateway
        self.scenario_description = scenario_description
        self.seed = seed

    def decide(self, profile: AgentProfile, packet: ObservationPacket) -> Command:
        options = self._available_actions(packet)
        known_objects = [e["id"] for e in packet.visible_entities]
        known_objects += [e["name"] for e in packet.exits]
        known_objects += list(packet.inventory)
        known_agents = [t["name"] for t in packet.teammates]
        bindings = {
            "scenario_description": self.scenario_description,
            "AgentRole": profile.role,
            "available_actions": "; ".join(options),
            # Not a template slot; it keeps offline decisions observation-
            # dependent and gives live prompts debuggable context.
            "observation": (f"t={packet.clock} in {packet.region_name}, "
                            f"searched={packet.region_searched}, "
                            f"carrying={len(packet.inventory)}"),
        }
        for _ in range(PARSE_RETRIES):
            response = self.gateway.complete("mission_user", bindings)
            try:
                return parse_command(response, known_objects, known_agents,
                                     rationale=response[:200])
            except UnparsableResponse:
                continue
        logger.warning("agent %s: unparsable responses, forcing idle",
                       profile.agent_id)
        return Command("idle", rationale="fallback after unparsable responses")

    def _available_actions(self, packet: ObservationPacket) -> list[str]:
        options: list[str] = []
        if not packet.region_searched:
            options.append("search")
        for entity in packet.visible_entities:
            if entity["kind"] == "interactive" and entity["id"].startswith("victim"):
                options.append(f"take {entity['id']}")
        for item in packet.inventory:
            options.append(f"drop {item}")
        for exit_info in packet.exits:
            if not exit_info["blocked"]:
                options.append(f"move to {exit_info['name']}")
        for rid, info in sorted(packet.routes.items()):
            line = f"move to {info['name']}"
            if line not in options:
                options.append(line)
        for teammate in packet.teammates:
            options.append(f"communicate with {teammate['name']}")
        options.append("idle")
        return options

    def accept_invitation(self, profile: AgentProfile, carrying: bool,
                          busy: bool, clock: int) -> bool:
        return not busy

    def utterance(self, profile: AgentProfile, transcript: list[str],
                  clock: int) -> str:
        return self.gateway.complete(
            "conversation_turn",
            {
                "agent_name": profile.name,
                "agent_role": profile.role,
                "context": self.scenario_description,
                "transcript": "\n".join(transcript[-6:]),
            },
        )


class RandomPolicy(Policy):
    """Seeded chaos for fuzz tests: legal and illegal commands alike."""

    def __init__(self, seed: int, ablations: Optional[dict] = None):
        self.seed = seed
        self.ablations = dict(ablations or {})

    def decide(self, profile: AgentProfile, packet: ObservationPacket) -> Command:
        parts = (self.seed, "fuzz", packet.clock, packet.agent_id)
        verbs = ["move", "search", "take", "drop", "give", "idle"]
        if not self.ablations.get("no_communication") and packet.teammates:
            verbs.append("communicate")
        verb = seeding.choice(verbs, *parts, "verb")
        entities = sorted(e["id"] for e in packet.visible_entities)
        exits = sorted(e["name"] for e in packet.exits)
        teammates = sorted(t["name"] for t in packet.teammates)
        if verb == "move" and exits:
            return Command("move", to=seeding.choice(exits, *parts, "exit"))
        if verb == "take" and entities:
            return Command("take", obj=seeding.choice(entities, *parts, "ent"))
        if verb == "drop" and packet.inventory:
            return Command("drop", obj=seeding.choice(sorted(packet.inventory),
                                                      *parts, "inv"))
        if verb == "give" and packet.inventory and teammates:
            return Command("give", obj=seeding.choice(sorted(packet.inventory),
                                                      *parts, "inv"),
                           to=seeding.choice(teammates, *parts, "mate"))
        if verb == "communicate" and teammates:
            return Command("communicate", to=seeding.choice(teammates, *parts, "mate"))
        if verb == "search":
            return Command("search")
        return Command("idle")

    def accept_invitation(self, profile: AgentProfile, carrying: bool,
                          busy: bool, clock: int) -> bool:
        return seeding.unit_float(self.seed, "accept", clock,
                                  profile.agent_id) < 0.5

    def utterance(self, profile: AgentProfile, transcript: list[str],
                  clock: int) -> str:
        return f"{profile.name}: noted."


def make_policy(mode: str, seed: int, ablations: Optional[dict] = None,
                gateway=None, scenario_description: str = "") -> Policy:
    if mode == "scripted":
        return ScriptedPolicy(seed, ablations)
    if mode == "random":
        return RandomPolicy(seed, ablations)
    if mode == "gateway":
        if gateway is None:
            raise ValueError("gateway mode requires a gateway client")
        return GatewayPolicy(gateway, scenario_description, seed)
    raise ValueError(f"unknown policy mode {mode!r}")
