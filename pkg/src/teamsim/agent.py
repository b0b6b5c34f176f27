"""Agent identity, memory, and the command language.

Profiles hold who an agent is (role, Big Five traits, backstory); states hold
where it is and what it carries.  Free-text decisions — whether typed by a
model or generated by a scripted policy — are canonicalized into ``Command``
values by ``parse_command``, whose grammar round-trips: any command rendered
with ``Command.to_text()`` parses back to an equal command.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .errors import UnparsableResponse

Coord = tuple[int, int]

VERBS = ("move", "search", "take", "drop", "give", "communicate", "idle",
         "stabilize", "clear")

# First agent id is 2: the traversability matrix reserves 0 for blocked and
# 1 for free cells.
FIRST_AGENT_ID = 2

TRAIT_NAMES = ("openness", "conscientiousness", "extraversion",
               "agreeableness", "neuroticism")


@dataclass
class BigFive:
    openness: float = 0.5
    conscientiousness: float = 0.5
    extraversion: float = 0.5
    agreeableness: float = 0.5
    neuroticism: float = 0.5

    def __post_init__(self):
        for name in TRAIT_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"trait {name} must be in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in TRAIT_NAMES}

    @staticmethod
    def from_dict(d: dict) -> "BigFive":
        return BigFive(**{name: d.get(name, 0.5) for name in TRAIT_NAMES})


@dataclass
class AgentProfile:
    agent_id: int
    name: str
    role: str
    big_five: BigFive = field(default_factory=BigFive)
    demographics: dict[str, str] = field(default_factory=dict)
    backstory: str = ""
    skills: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.role:
            raise ValueError("agent role must be non-empty")

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "name": self.name,
            "role": self.role,
            "big_five": self.big_five.to_dict(),
            "demographics": dict(sorted(self.demographics.items())),
            "backstory": self.backstory,
            "skills": list(self.skills),
        }

    @staticmethod
    def from_dict(d: dict) -> "AgentProfile":
        return AgentProfile(
            agent_id=d["agent_id"],
            name=d["name"],
            role=d["role"],
            big_five=BigFive.from_dict(d.get("big_five", {})),
            demographics=dict(d.get("demographics", {})),
            backstory=d.get("backstory", ""),
            skills=list(d.get("skills", [])),
        )


def create_agent(spec: dict, gateway=None, agent_id: int = FIRST_AGENT_ID) -> AgentProfile:
    """Build a profile from a partial spec, filling gaps with defaults.

    Explicit fields are never overwritten.  Offline, missing traits default
    to 0.5 and missing names to ``Agent-{id}``; a live gateway may be asked
    to rate traits from the backstory, but user-provided values always win.
    """
    spec = dict(spec or {})
    name = spec.get("name") or f"Agent-{agent_id}"
    role = spec.get("role") or "Member"
    traits = {t: 0.5 for t in TRAIT_NAMES}
    provided = spec.get("big_five", {})
    for t in TRAIT_NAMES:
        if t in spec:
            traits[t] = spec[t]
        elif t in provided:
            traits[t] = provided[t]
    backstory = spec.get("backstory")
    if backstory is None:
        backstory = f"{name} is an experienced {role.lower()} ready to support the team."
    return AgentProfile(
        agent_id=agent_id,
        name=name,
        role=role,
        big_five=BigFive(**traits),
        demographics=dict(spec.get("demographics", {})),
        backstory=backstory,
        skills=list(spec.get("skills", [])),
    )


STATUS_IDLE = "idle"
STATUS_ACTING = "acting"
STATUS_CONVERSING = "conversing"


@dataclass
class AgentState:
    location: Coord
    current_region: int
    inventory: list[str] = field(default_factory=list)
    visited_regions: set[int] = field(default_factory=set)
    busy_until: int = 0
    status: str = STATUS_IDLE
    path: list[Coord] = field(default_factory=list)  # remaining move waypoints
    last_outcome: Optional[dict] = None
    pending_messages: list[dict] = field(default_factory=list)
    conversation_id: Optional[int] = None
    last_conversation_step: int = -(10**9)
    steps_taken: int = 0

    def __post_init__(self):
        self.visited_regions.add(self.current_region)

    def to_dict(self) -> dict:
        return {
            "location": list(self.location),
            "current_region": self.current_region,
            "inventory": list(self.inventory),
            "visited_regions": sorted(self.visited_regions),
            "busy_until": self.busy_until,
            "status": self.status,
            "path": [list(c) for c in self.path],
            "last_outcome": self.last_outcome,
            "pending_messages": list(self.pending_messages),
            "conversation_id": self.conversation_id,
            "last_conversation_step": self.last_conversation_step,
            "steps_taken": self.steps_taken,
        }

    @staticmethod
    def from_dict(d: dict) -> "AgentState":
        state = AgentState(
            location=tuple(d["location"]),
            current_region=d["current_region"],
            inventory=list(d["inventory"]),
            visited_regions=set(d["visited_regions"]),
            busy_until=d["busy_until"],
            status=d["status"],
            path=[tuple(c) for c in d["path"]],
            last_outcome=d.get("last_outcome"),
            pending_messages=list(d.get("pending_messages", [])),
            conversation_id=d.get("conversation_id"),
            last_conversation_step=d.get("last_conversation_step", -(10**9)),
            steps_taken=d.get("steps_taken", 0),
        )
        return state


class MemoryStore:
    """Bounded short-term window plus embedded long-term entries.

    ``recall`` ranks by cosine similarity, breaking ties toward the most
    recent entry.  When disabled (memory ablation) both operations are
    no-ops.
    """

    def __init__(self, embed: Callable[[str], list[float]], window: int = 20,
                 enabled: bool = True):
        self.embed = embed
        self.window = window
        self.enabled = enabled
        self.short_term: deque[tuple[int, str]] = deque(maxlen=window)
        self.long_term: list[tuple[str, list[float]]] = []

    def remember(self, timestep: int, text: str) -> None:
        if not self.enabled:
            return
        self.short_term.append((timestep, text))
        self.long_term.append((text, self.embed(text)))

    def recall(self, query: str, k: int = 5) -> list[str]:
        if not self.enabled or not self.long_term or k <= 0:
            return []
        query_vec = self.embed(query)
        scored = [
            (_cosine(query_vec, vec), index, text)
            for index, (text, vec) in enumerate(self.long_term)
        ]
        scored.sort(key=lambda item: (-item[0], -item[1]))
        return [text for _, _, text in scored[:k]]

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "enabled": self.enabled,
            "short_term": [[t, text] for t, text in self.short_term],
            "long_term": [[text, vec] for text, vec in self.long_term],
        }

    @staticmethod
    def from_dict(d: dict, embed: Callable[[str], list[float]]) -> "MemoryStore":
        store = MemoryStore(embed, window=d["window"], enabled=d["enabled"])
        for t, text in d["short_term"]:
            store.short_term.append((t, text))
        store.long_term = [(text, list(vec)) for text, vec in d["long_term"]]
        return store


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = sum(x * x for x in a) ** 0.5
    nb = sum(y * y for y in b) ** 0.5
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@dataclass
class Command:
    verb: str
    obj: Optional[str] = None
    to: Optional[str] = None
    rationale: str = ""

    def __post_init__(self):
        if self.verb not in VERBS:
            raise ValueError(f"unknown verb {self.verb!r}")
        if self.verb == "give" and (not self.obj or not self.to):
            raise ValueError("give requires both an object and a recipient")
        if self.verb == "move" and not self.to:
            raise ValueError("move requires a target")
        if self.verb == "communicate" and not self.to:
            raise ValueError("communicate requires at least one agent")
        if self.verb in ("stabilize", "clear", "take", "drop") and not self.obj:
            raise ValueError(f"{self.verb} requires an object")

    def to_text(self) -> str:
        """Canonical surface form; parse_command inverts this exactly."""
        if self.verb == "move":
            return f"move to {self.to}"
        if self.verb == "communicate":
            return f"communicate with {self.to}"
        if self.verb == "give":
            return f"give {self.obj} to {self.to}"
        if self.verb == "idle":
            return "idle"
        if self.verb == "search" and not self.obj:
            return "search"
        return f"{self.verb} {self.obj}"

    def to_dict(self) -> dict:
        return {"verb": self.verb, "object": self.obj, "to": self.to,
                "rationale": self.rationale}

    @staticmethod
    def from_dict(d: dict) -> "Command":
        return Command(d["verb"], d.get("object"), d.get("to"),
                       d.get("rationale", ""))


def command_to_json(cmd: Command) -> str:
    """Verb-object JSON in the shape the action parser emits."""
    if cmd.verb == "give":
        payload: dict = {"give": {"object": cmd.obj, "to": cmd.to}}
    elif cmd.verb == "communicate":
        payload = {"communicate": cmd.to}
    elif cmd.verb == "move":
        payload = {"move": cmd.to}
    else:
        payload = {cmd.verb: cmd.obj or ""}
    return json.dumps(payload)


_VERB_SYNONYMS = {
    "move": "move", "go": "move", "walk": "move", "head": "move", "travel": "move",
    "search": "search", "explore": "search", "look": "search", "inspect": "search",
    "take": "take", "grab": "take", "pick": "take", "pickup": "take",
    "carry": "take", "get": "take",
    "drop": "drop", "place": "drop", "put": "drop", "leave": "drop",
    "give": "give", "hand": "give", "pass": "give",
    "communicate": "communicate", "talk": "communicate", "speak": "communicate",
    "message": "communicate", "tell": "communicate", "ask": "communicate",
    "idle": "idle", "wait": "idle", "rest": "idle", "stay": "idle",
    "stabilize": "stabilize", "treat": "stabilize", "heal": "stabilize",
    "clear": "clear",
}

_FILLER = {"the", "a", "an", "to", "with", "at", "up", "on", "in", "into",
           "room", "area"}


def normalize_name(raw: str, candidates: Sequence[str]) -> str:
    """Snap a free-text name onto the closest candidate.

    Case-insensitive exact match first, then the candidate sharing the
    longest common substring; the original text is returned when no
    candidate overlaps at all.
    """
    if not candidates:
        return raw
    low = raw.lower()
    for cand in candidates:
        if cand.lower() == low:
            return cand
    best, best_len = None, 0
    for cand in candidates:
        length = _longest_common_substring(low, cand.lower())
        if length > best_len:
            best, best_len = cand, length
    if best is not None and best_len >= 2:
        return best
    return raw


def _longest_common_substring(a: str, b: str) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    best = 0
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = previous[j - 1] + 1
                if current[j] > best:
                    best = current[j]
        previous = current
    return best


def parse_command(
    text: str,
    known_objects: Sequence[str] = (),
    known_agents: Sequence[str] = (),
    rationale: str = "",
) -> Command:
    """Canonicalize model output or typed input into a Command.

    Accepts both verb-object JSON (``{"take": "sword"}``) and plain text
    (``take the sword``).  Object and agent names are normalized onto the
    provided candidate lists.
    """
    if not text or not text.strip():
        raise UnparsableResponse("empty command text")
    stripped = text.strip()

    if stripped.startswith("{"):
        try:
            payload = json.loads(stripped)
        except json.JSONDecodeError:
            payload = None
        if isinstance(payload, dict):
            for key, value in payload.items():
                verb = _VERB_SYNONYMS.get(key.lower())
                if verb is None:
                    continue
                if verb == "give" and isinstance(value, dict):
                    return Command(
                        "give",
                        normalize_name(str(value.get("object", "")), known_objects),
                        normalize_name(str(value.get("to", "")), known_agents),
                        rationale,
                    )
                return _command_from_parts(verb, str(value or ""), known_objects,
                                           known_agents, rationale)
            raise UnparsableResponse(f"no recognizable verb in JSON: {stripped!r}")

    words = re.findall(r"[\w'-]+", stripped.lower())
    verb = None
    index = 0
    for index, word in enumerate(words):
        if word in _VERB_SYNONYMS:
            verb = _VERB_SYNONYMS[word]
            break
    if verb is None:
        raise UnparsableResponse(f"no recognizable verb in {text!r}")
    rest = words[index + 1:]

    if verb == "give":
        # "give OBJ to AGENT"
        if "to" in rest:
            split = rest.index("to")
            obj_words = [w for w in rest[:split] if w not in _FILLER]
            to_words = [w for w in rest[split + 1:] if w not in _FILLER]
            if obj_words and to_words:
                return Command(
                    "give",
                    normalize_name(" ".join(obj_words), known_objects),
                    normalize_name(" ".join(to_words), known_agents),
                    rationale,
                )
        raise UnparsableResponse(f"could not parse give command: {text!r}")

    remainder = " ".join(w for w in rest if w not in _FILLER)
    return _command_from_parts(verb, remainder, known_objects, known_agents, rationale)


def _command_from_parts(
    verb: str,
    remainder: str,
    known_objects: Sequence[str],
    known_agents: Sequence[str],
    rationale: str,
) -> Command:
    remainder = remainder.strip()
    if verb == "idle":
        return Command("idle", rationale=rationale)
    if verb == "move":
        if not remainder:
            raise UnparsableResponse("move needs a destination")
        return Command("move", to=normalize_name(remainder, known_objects),
                       rationale=rationale)
    if verb == "communicate":
        if not remainder:
            raise UnparsableResponse("communicate needs a target agent")
        return Command("communicate", to=normalize_name(remainder, known_agents),
                       rationale=rationale)
    if verb == "search":
        obj = normalize_name(remainder, known_objects) if remainder else None
        return Command("search", obj=obj, rationale=rationale)
    if not remainder:
        raise UnparsableResponse(f"{verb} needs an object")
    return Command(verb, obj=normalize_name(remainder, known_objects),
                   rationale=rationale)


# ---------------------------------------------------------------------------
# Observations
# ---------------------------------------------------------------------------


@dataclass
class ObservationPacket:
    """What one agent is told at a decision point."""

    clock: int
    agent_id: int
    region_id: int
    region_name: str
    region_description: str
    region_searched: bool
    visible_entities: list[dict]
    exits: list[dict]  # adjacent rooms: {region, name, door, blocked}
    routes: dict  # region id -> {next_region, door, hops}; empty when ablated
    visited_regions: list[int]
    searched_regions: list[int]
    known_victims: list[dict]  # located, unrescued, uncarried: {id, region}
    inventory: list[str]
    teammates: list[dict]  # {agent_id, name, role, same_region}
    last_outcome: Optional[dict]
    pending_messages: list[dict]
    hospital_region: Optional[int] = None
    steps_since_chat: int = 10**9
    blocked_doors: list[dict] = field(default_factory=list)  # reachable side

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["routes"] = {str(k): v for k, v in self.routes.items()}
        return d
