"""Language-model access: prompt rendering, completion, embeddings.

Two interchangeable backends sit behind one client:

* ``MockBackend`` — a pure function of (template id, salient bindings, seed).
  It answers every prompt the simulator can emit with deterministic canned
  logic, which is what makes the whole system testable offline.
* ``HttpBackend`` — any chat-completions-compatible HTTP endpoint.  Endpoint
  URL, model name, and key come from configuration, never code.

Rendering never touches the network, and every live exchange is recorded
before its result is used.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import time
from dataclasses import dataclass
from typing import Callable, Optional

from .errors import GatewayUnavailable, GatewayTimeout, MissingBinding, RateLimited

_PLACEHOLDER = re.compile(r"\$\{(\w+)\}")

# Template texts. Placeholders use ${name}; render() requires every one bound.
TEMPLATES: dict[str, list[tuple[str, str]]] = {
    "env_rooms": [
        ("system",
         "You are a helpful assistant. The user is asking for a list of ideas for rooms "
         "to populate an adventure game.\n"
         "Respond with a list of ideas for rooms on different lines with 2 to 4 words per room.\n"
         "Each room should be unique and thematically appropriate.\n"
         "DO NOT prefix the names with numbers or other special characters."),
        ("user", "List ${count} room ideas for this setting: ${theme}"),
    ],
    "env_objects": [
        ("system",
         "You are a helpful assistant. The user is asking for a list of ideas for objects "
         "to populate an adventure game.\n"
         "Respond with a list of names for objects on different lines with 1 or 2 words per object.\n"
         "The user will provide a description of the room where the object will be placed.\n"
         "The object should be appropriate for the room."),
        ("user", "${room_description}"),
    ],
    "mission_system": [
        ("system",
         "You have access to other agents. You can ask them for directions from your "
         "location to another location or for assistance with objects.\n"
         "Say \"Ask Agent\" to get help from the other agent. For example, you could say: "
         "\"Ask Agent for directions to the Fire Station\".\n\n"
         "You can only use the available exits from this room to move to a new location. "
         "State only one action that you will take next in a single sentence."),
    ],
    "mission_user": [
        ("user",
         "In this scenario (${scenario_description}), you play the AgentRole of (${AgentRole}).\n"
         "Your primary objective is to take actions that move the mission forward effectively.\n"
         "Only initiate communication with other agents if it is absolutely essential to "
         "complete a task or if critical, time-sensitive information needs to be coordinated.\n"
         "Avoid repeated or unnecessary communication and focus on direct actions whenever possible.\n"
         "Do not initiate communication with a teammate if you just had a conversation with them "
         "(${available_actions})."),
    ],
    "world_state": [
        ("system",
         "You are the game master of a text adventure game based on a scenario. You are "
         "responsible for describing the world state to the player. You will be given a "
         "scenario description, a character description of the observer, their AgentRole in "
         "the scenario, a JSON object representing the game world, and a JSON object "
         "representing the character's inventory.\n"
         "You should interpret the JSON object in terms that the character described would "
         "understand.\n\n"
         "Give a detailed description of the contents of each room and a brief description "
         "of the character's inventory in the style of a text adventure game.\n\n"
         "You may include smells, sounds, or other details that are not present in the JSON "
         "object representation of the game world.\n"
         "However, you MUST NOT add characters to the description that are not present in "
         "the JSON object representation of the game world.\n\n"
         "Always include the potential exits from the room in your description. Always "
         "include the full text of the agent's response in your description."),
        ("user",
         "The scenario is (${description}).\n"
         "The observer is (${observer}).\n"
         "Their AgentRole in this scenario is (${AgentRole}).\n"
         "The JSON representation of the area described is (${world_state}).\n"
         "The character's inventory is (${inventory}).\n"
         "The player has access to other players and can communicate with them using "
         "communicate.\n"
         "Remove any reference to characters or items that are not present in the JSON "
         "object representation of the game world."),
    ],
    "result_description": [
        ("system",
         "You are the game master of a text adventure game based on a scenario.\n"
         "You are responsible for interpreting player actions and describing their result "
         "in the game world.\n"
         "The player has taken an action that may have changed the world state or their "
         "inventory. The world state, previous world state, and action result are "
         "represented as JSON objects.\n\n"
         "If the action succeeded, you would see {\"success\": true, \"reason\": \"reason "
         "for success\"}.\n\n"
         "If the action failed, you would see {\"success\": false, \"reason\": \"reason for "
         "failure\"}.\n\n"
         "Incorporate the reason for success or failure into your description of the world "
         "state.\n\n"
         "You may include smells, sounds, or other details that are not present in the JSON "
         "object representation of the game world.\n"
         "However, you MUST NOT add characters to the description that are not present in "
         "the JSON object representation of the game world.\n"
         "Always include the potential exits from the room in your description."),
        ("user",
         "The scenario is (${description}).\n"
         "The observer is (${observer}).\n"
         "Their AgentRole in this scenario is (${AgentRole}).\n"
         "The world state was (${prev_world_state}) and is now (${world_state}).\n"
         "The action taken was (${action}).\n"
         "The action result was (${action_result}).\n"
         "The character's inventory was (${prev_inventory}) and is now (${inventory}).\n"
         "Remove any reference to characters or items that are not present in the JSON "
         "object representation of the game world."),
    ],
    "parse_action": [
        ("system",
         "You are a natural language parser skilled at interpreting natural language as "
         "structured data. You are responsible for interpreting player actions in a text "
         "adventure game and outputting verb-object pairs.\n\n"
         "The player can interact with the world by typing commands. Take those commands "
         "and a JSON object representing the game world, and generate a list of verbs and "
         "objects that can be used to update the game world.\n\n"
         "For example, if the player types 'take the sword' you should generate "
         "{\"take\": \"sword\"}. If the player types 'move to the castle', you should "
         "generate {\"move\": \"castle\"}.\n\n"
         "For a transitive verb like 'give sword to player2', you should generate "
         "{\"give\": {\"object\": \"sword\", \"to\": \"player2\"}}.\n"
         "The player has access to other players and can communicate with them using the "
         "'communicate' verb.\n\n"
         "If they communicate with another player, you should generate a verb-object pair "
         "that represents the communication.\n"
         "For example, if they say 'Communicate with player2', you should generate "
         "{\"communicate\": \"player2\"}\n\n"
         "Do not generate anything that is not valid JSON. Do not output an explanation. "
         "Only output the JSON object.\n"
         "Rewrite this JSON object to use the objects from a specified list. Replace "
         "anything with its closest match."),
        ("user",
         "The current room state is (${room_state}).\n"
         "The player has typed the command (${command})."),
    ],
    "judge_validation": [
        ("system",
         "You judge whether a proposed agent action is possible given the scenario and the "
         "current state of the environment. Answer with exactly one word, 'valid' or "
         "'invalid', optionally followed by a colon and a short reason."),
        ("user",
         "Scenario: ${scenario}\n"
         "Environment state: ${world_state}\n"
         "Agent: ${agent}\n"
         "Proposed action: ${action}"),
    ],
    "judge_redundancy": [
        ("system",
         "You monitor a conversation between teammates. Answer 'redundant' if the exchange "
         "has stopped adding information, otherwise answer 'continue'."),
        ("user", "Transcript:\n${transcript}"),
    ],
    "next_speaker": [
        ("system",
         "You coordinate a conversation between agents. Given the participants and the "
         "transcript so far, name the participant most likely to speak next. Answer with "
         "the participant's name only."),
        ("user",
         "Participants: ${participants}\n"
         "Last speaker: ${last_speaker}\n"
         "Transcript:\n${transcript}"),
    ],
    "conversation_turn": [
        ("system",
         "You are ${agent_name}, the ${agent_role}. Continue the conversation with your "
         "teammates in one short, purposeful message."),
        ("user", "Mission context: ${context}\nTranscript so far:\n${transcript}"),
    ],
    "enhance_scenario": [
        ("system",
         "You help users refine team-simulation scenario descriptions. Improve the "
         "description with concrete, simulation-ready detail, then list the scenario's "
         "measurable goals, one per line, each as 'verb: object (count N)'."),
        ("user", "${description}"),
    ],
    "interview": [
        ("system",
         "You are ${agent_name}, who served as ${agent_role} on a simulated team mission. "
         "Answer the interviewer in character, grounded in your memories and the mission "
         "record. When asked to rate something on a scale from 1-10, begin your answer "
         "with the number."),
        ("user", "Mission record: ${context}\n\nInterviewer: ${question}"),
    ],
}


def render(template_id: str, bindings: dict) -> list[dict]:
    """Expand a template into chat messages. Pure text substitution."""
    if template_id not in TEMPLATES:
        raise MissingBinding(f"unknown template {template_id!r}")
    messages = []
    for role, text in TEMPLATES[template_id]:
        def sub(match: re.Match) -> str:
            name = match.group(1)
            if name not in bindings:
                raise MissingBinding(f"template {template_id!r} needs binding {name!r}")
            return str(bindings[name])
        messages.append({"role": role, "content": _PLACEHOLDER.sub(sub, text)})
    return messages


def _stable_hash(*parts) -> int:
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def extract_goals(description: str) -> list[dict]:
    """Keyword-rule goal extraction used by the mock enhancement path."""
    words_to_num = {
        "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
        "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11,
        "twelve": 12, "all": None, "every": None,
    }
    goals = []
    for verb in ("locate", "rescue", "find", "evacuate", "search", "deliver", "clear"):
        for match in re.finditer(rf"\b{verb}\w*\b", description, re.IGNORECASE):
            tail = description[match.end():].strip()
            count = None
            obj_words = []
            for token in re.findall(r"[\w']+", tail)[:6]:
                low = token.lower()
                if low.isdigit():
                    count = int(low)
                elif low in words_to_num:
                    count = words_to_num[low]
                elif low in {"the", "a", "an", "and", "who", "that", "to", "of"}:
                    if obj_words:
                        break
                else:
                    obj_words.append(low)
                    if count is not None or len(obj_words) >= 2:
                        break
            goal = {"verb": verb, "object": " ".join(obj_words) or None}
            if count is not None:
                goal["count"] = count
            if goal not in goals:
                goals.append(goal)
    return goals


class MockBackend:
    """Deterministic offline backend.

    Responses are a pure function of (template id, salient bindings, seed).
    A ``script`` mapping may pin specific template ids to fixed strings or to
    callables of the bindings, which is how tests stub judge behavior.
    """

    def __init__(self, seed: int = 0, script: Optional[dict] = None):
        self.seed = seed
        self.script = dict(script or {})

    def complete(self, messages: list[dict], params: dict) -> str:
        template_id = params.get("template_id", "")
        bindings = params.get("bindings", {})
        if template_id in self.script:
            entry = self.script[template_id]
            return entry(bindings) if callable(entry) else entry
        return self._canned(template_id, bindings, messages)

    def _canned(self, template_id: str, bindings: dict, messages: list[dict]) -> str:
        if template_id == "parse_action":
            from .agent import command_to_json, parse_command

            return command_to_json(parse_command(str(bindings.get("command", ""))))
        if template_id == "env_rooms":
            count = int(bindings.get("count", 1))
            return "\n".join(f"Room-{i}" for i in range(count))
        if template_id == "env_objects":
            return "\n".join(f"Object-{i}" for i in range(3))
        if template_id == "judge_validation":
            return "valid"
        if template_id == "judge_redundancy":
            transcript = str(bindings.get("transcript", ""))
            lines = [l for l in transcript.splitlines() if l.strip()]
            if len(lines) >= 2 and lines[-1] == lines[-2]:
                return "redundant"
            return "continue"
        if template_id == "next_speaker":
            participants = [p.strip() for p in str(bindings.get("participants", "")).split(",") if p.strip()]
            last = str(bindings.get("last_speaker", ""))
            if not participants:
                return ""
            if last in participants:
                return participants[(participants.index(last) + 1) % len(participants)]
            return participants[0]
        if template_id == "enhance_scenario":
            description = str(bindings.get("description", ""))
            goals = extract_goals(description)
            lines = [description.strip()]
            for g in goals:
                line = f"{g['verb']}: {g['object'] or 'objective'}"
                if "count" in g:
                    line += f" (count {g['count']})"
                lines.append(line)
            return "\n".join(lines)
        if template_id == "interview":
            question = str(bindings.get("question", ""))
            return ("5 - Considering the mission as a whole, I would call our effort "
                    f"adequate. Asked about: {question[:80]}")
        if template_id == "conversation_turn":
            name = bindings.get("agent_name", "Agent")
            pick = _stable_hash(self.seed, template_id, bindings.get("transcript", "")) % 3
            lines = [
                f"{name} here: continuing with my current task.",
                f"{name}: acknowledged, I will cover the unexplored side.",
                f"{name}: understood, flag anything urgent.",
            ]
            return lines[pick]
        if template_id in ("world_state", "result_description"):
            observer = bindings.get("observer", "the agent")
            return f"A plain description of the surroundings as seen by {observer}."
        if template_id in ("mission_user", "mission_system"):
            options = [o.strip() for o in str(bindings.get("available_actions", "")).split(";") if o.strip()]
            if options:
                fingerprint = json.dumps(bindings, sort_keys=True, default=str)
                pick = _stable_hash(self.seed, "mission", fingerprint) % len(options)
                return options[pick]
            return "idle"
        digest = _stable_hash(self.seed, template_id, json.dumps(bindings, sort_keys=True, default=str))
        return f"mock-response-{digest % 10_000}"

    def embed(self, text: str, dim: int) -> list[float]:
        raw = []
        for i in range(dim):
            h = _stable_hash("embed", self.seed, text, i)
            raw.append((h / 2**64) * 2.0 - 1.0)
        norm = math.sqrt(sum(v * v for v in raw)) or 1.0
        return [v / norm for v in raw]


class HttpBackend:
    """Chat-completions-compatible HTTP endpoint with timeout and retries."""

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        model: str = "gpt-4o-mini",
        timeout: float = 60.0,
        retries: int = 2,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.retries = retries

    def _post(self, path: str, body: dict) -> dict:
        import httpx

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = httpx.post(
                    f"{self.endpoint}{path}",
                    json=body,
                    headers={"Authorization": f"Bearer {self.api_key}"},
                    timeout=self.timeout,
                )
                if response.status_code == 429:
                    retry_after = float(response.headers.get("retry-after", 1.0))
                    last_error = RateLimited("rate limited", retry_after)
                    time.sleep(min(retry_after, 2.0**attempt))
                    continue
                response.raise_for_status()
                return response.json()
            except RateLimited:
                raise
            except httpx.TimeoutException as exc:
                last_error = GatewayTimeout(str(exc))
            except Exception as exc:  # noqa: BLE001 - transient transport errors
                last_error = exc
            if attempt < self.retries:
                time.sleep(2.0**attempt * 0.5)
        if isinstance(last_error, RateLimited):
            raise last_error
        raise GatewayUnavailable(f"gateway unreachable: {last_error}")

    def complete(self, messages: list[dict], params: dict) -> str:
        body = {
            "model": params.get("model", self.model),
            "messages": messages,
            "temperature": params.get("temperature", 0.7),
        }
        if "max_tokens" in params:
            body["max_tokens"] = params["max_tokens"]
        data = self._post("/chat/completions", body)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise GatewayUnavailable(f"malformed completion response: {exc}")

    def embed(self, text: str, dim: int) -> list[float]:
        data = self._post("/embeddings", {"model": self.model, "input": text})
        try:
            return list(data["data"][0]["embedding"])
        except (KeyError, IndexError) as exc:
            raise GatewayUnavailable(f"malformed embedding response: {exc}")


@dataclass
class GatewayConfig:
    mode: str = "mock"  # "mock" | "live"
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "TEAMSIM_GATEWAY_KEY"
    model: str = "gpt-4o-mini"
    temperature: float = 0.7
    embed_dim: int = 64
    seed: int = 0
    mock_script_path: Optional[str] = None

    @staticmethod
    def from_dict(d: dict) -> "GatewayConfig":
        cfg = GatewayConfig()
        for key, value in d.items():
            if hasattr(cfg, key):
                setattr(cfg, key, value)
        return cfg


class Gateway:
    """Client facade over a backend, with exchange logging and usage counters."""

    def __init__(
        self,
        backend,
        embed_dim: int = 64,
        on_exchange: Optional[Callable[[dict], None]] = None,
        default_params: Optional[dict] = None,
    ):
        self.backend = backend
        self.embed_dim = embed_dim
        self.on_exchange = on_exchange
        self.default_params = dict(default_params or {})
        self.usage = {"requests": 0, "prompt_chars": 0, "response_chars": 0}
        self.exchanges: list[dict] = []

    @staticmethod
    def from_config(config: GatewayConfig, on_exchange=None) -> "Gateway":
        if config.mode == "live":
            api_key = os.environ.get(config.api_key_env, "")
            backend = HttpBackend(config.endpoint, api_key, config.model)
        else:
            script = None
            if config.mock_script_path:
                with open(config.mock_script_path, encoding="utf-8") as fh:
                    script = json.load(fh)
            backend = MockBackend(seed=config.seed, script=script)
        return Gateway(
            backend,
            embed_dim=config.embed_dim,
            on_exchange=on_exchange,
            default_params={"model": config.model, "temperature": config.temperature},
        )

    # --- core calls ---

    def complete(self, template_id: str, bindings: dict, params: Optional[dict] = None) -> str:
        messages = render(template_id, bindings)
        return self.complete_messages(messages, template_id, bindings, params)

    def complete_messages(
        self,
        messages: list[dict],
        template_id: str = "",
        bindings: Optional[dict] = None,
        params: Optional[dict] = None,
    ) -> str:
        call_params = dict(self.default_params)
        call_params.update(params or {})
        call_params["template_id"] = template_id
        call_params["bindings"] = bindings or {}
        response = self.backend.complete(messages, call_params)
        self._record(template_id, messages, response)
        return response

    def embed(self, text: str) -> list[float]:
        if not text:
            raise ValueError("cannot embed empty text")
        vector = self.backend.embed(text, self.embed_dim)
        self.usage["requests"] += 1
        self.usage["prompt_chars"] += len(text)
        return vector

    def _record(self, template_id: str, messages: list[dict], response: str) -> None:
        prompt_chars = sum(len(m["content"]) for m in messages)
        self.usage["requests"] += 1
        self.usage["prompt_chars"] += prompt_chars
        self.usage["response_chars"] += len(response)
        digest = hashlib.sha256(
            json.dumps(messages, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]
        record = {"template_id": template_id, "request_digest": digest, "response": response}
        self.exchanges.append(record)
        if self.on_exchange is not None:
            self.on_exchange(record)

    # --- scenario-level operations ---

    def enhance_scenario(self, description: str) -> tuple[str, list[dict]]:
        """Return (revised text, extracted goal list) for a scenario draft."""
        if not description or not description.strip():
            raise ValueError("scenario description must be non-empty")
        response = self.complete("enhance_scenario", {"description": description})
        goals = extract_goals(description)
        lines = [l.strip() for l in response.splitlines() if l.strip()]
        body = [l for l in lines if not re.match(r"^\w+:", l)]
        enhanced = "\n".join(body) if body else description.strip()
        return enhanced, goals

    def generate_room_names(self, count: int, theme: str) -> list[str]:
        if count < 1:
            raise ValueError("count must be >= 1")
        response = self.complete("env_rooms", {"count": count, "theme": theme})
        return _clean_name_list(response, count, max_words=4)

    def generate_object_names(self, room_description: str, count: int = 3) -> list[str]:
        if count < 1:
            raise ValueError("count must be >= 1")
        response = self.complete("env_objects", {"room_description": room_description})
        return _clean_name_list(response, count, max_words=2)


def _clean_name_list(response: str, count: int, max_words: int) -> list[str]:
    names: list[str] = []
    for line in response.splitlines():
        # Strip numbering or bullet prefixes the model may add anyway.
        cleaned = re.sub(r"^\s*(?:\d+[\.\)]|[-*•])\s*", "", line).strip()
        if not cleaned:
            continue
        words = cleaned.split()
        cleaned = " ".join(words[:max_words])
        if cleaned not in names:
            names.append(cleaned)
        if len(names) == count:
            break
    while len(names) < count:
        names.append(f"Area {len(names)}")
    return names
