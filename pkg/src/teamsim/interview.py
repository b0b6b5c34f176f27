"""Post-run agent interviews: guided questionnaire, free chat, ego survey.

After a run ends, each agent can be interviewed in character.  The guided
mode walks a fixed 24-item questionnaire (items 4-24 are rated 1-10, items
1-3 are open); the ego survey asks all items and aggregates the ratings
into six team-functioning dimensions.  Sessions are read-only over the
finished run: they never touch simulation state or logs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .engine import PAUSED, RUNNING, SimulationState, collect_metrics
from .errors import RunNotFinished, UnknownAgent

SCALE_MIN, SCALE_MAX = 1, 10

_SCALE_TAIL = (" Answer on a scale from 1-10 (1 = \"Strongly Disagree\", "
               "10 = \"Strongly Agree\"). Provide justification.")

_PERSPECTIVE = ("Based on this mission's success or failure, and considering "
                "the outcome from your <AgentRole>'s perspective, ")
_INDIVIDUAL = ("Based on this mission's success or failure, and based on "
               "your unique individual perspective, ")

QUESTIONNAIRE: tuple[str, ...] = (
    "State your name and your <AgentRole> on your team.",
    "Describe the composition of your team.",
    "Did your team succeed or fail in its mission?",
    _INDIVIDUAL + "to what extent did your team actively work to ensure that "
    "everyone on your team clearly understood your goals?" + _SCALE_TAIL,
    _PERSPECTIVE + "to what extent would the <AgentRole> say that your team "
    "actively worked to ensure that everyone on the team clearly understood "
    "the goals?",
    _PERSPECTIVE + "to what extent would the <AgentRole> say that your team "
    "actively worked to coordinate activities with one another?",
    _INDIVIDUAL + "to what extent did your team actively work to coordinate "
    "your activities with one another?",
    _PERSPECTIVE + "to what extent would the <AgentRole> say that your team "
    "actively worked to coordinate activities with one another?",
    _INDIVIDUAL + "to what extent did the team's recommendations improve "
    "team score?",
    _INDIVIDUAL + "to what extent did you feel comfortable depending on "
    "the team?",
    _INDIVIDUAL + "to what extent did you understand why the team made its "
    "recommendations?",
    _PERSPECTIVE + "to what extent do you believe the <AgentRole> thought the "
    "team's recommendations improved team score?",
    _PERSPECTIVE + "to what extent do you believe the <AgentRole> felt "
    "comfortable depending on the team?",
    _PERSPECTIVE + "to what extent do you believe the <AgentRole> understood "
    "why the team made its recommendations?",
    _INDIVIDUAL + "to what extent was the <AgentRole> a leader during the "
    "most recent mission?",
    _INDIVIDUAL + "to what extent did the <AgentRole> keep other team members "
    "focused or on task?",
    _INDIVIDUAL + "to what extent did the <AgentRole> help coordinate the "
    "actions of team members?",
    _PERSPECTIVE + "to what extent would the <AgentRole> say you were a "
    "leader during the most recent mission?",
    _PERSPECTIVE + "to what extent would the <AgentRole> say you kept other "
    "team members focused or on task?",
    _PERSPECTIVE + "to what extent would the <AgentRole> say you helped "
    "coordinate the actions of team members?",
    _INDIVIDUAL + "if you did this mission again with the same teammates, to "
    "what extent do you expect that your team would plan a successful "
    "strategy?",
    _INDIVIDUAL + "if you did this mission again with the same teammates, to "
    "what extent do you expect that your team would maintain positive "
    "interactions within the team?",
    _PERSPECTIVE + "if you all did this mission again with these same "
    "teammates, to what extent do you expect the <AgentRole> believes that "
    "your team would plan a successful strategy?",
    _PERSPECTIVE + "if you all did this mission again with these same "
    "teammates, to what extent do you expect the <AgentRole> believes that "
    "your team would maintain positive interactions within the team?",
)

assert len(QUESTIONNAIRE) == 24

# Items 1-3 are open questions; 4-24 carry a 1-10 rating.
LIKERT_ITEMS = tuple(range(4, 25))

DIMENSIONS: dict[str, tuple[int, ...]] = {
    "team_communication": (4, 5, 6),
    "team_coordination": (7, 8, 17, 20),
    "trust_in_team": (9, 10, 11, 12, 13, 14),
    "emerging_leadership": (15, 16, 18, 19),
    "collective_efficacy": (21, 23),
    "team_processes": (22, 24),
}

_RATING = re.compile(r"\b([1-9]|10)\b")


def question_text(item: int, agent_name: str, agent_role: str) -> str:
    text = QUESTIONNAIRE[item - 1]
    return (text.replace("<AgentName>", agent_name)
                .replace("<AgentRole>", agent_role))


def parse_rating(response: str) -> Optional[int]:
    """First standalone integer in [1, 10], or None."""
    match = _RATING.search(response)
    return int(match.group(1)) if match else None


@dataclass
class SurveyResponse:
    agent_id: int
    items: dict[int, dict] = field(default_factory=dict)
    dimensions: dict[str, Optional[float]] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "items": {str(k): v for k, v in sorted(self.items.items())},
            "dimensions": dict(sorted(self.dimensions.items())),
            "flags": list(self.flags),
        }


@dataclass
class InterviewSession:
    session_id: str
    agent_id: int
    agent_name: str
    agent_role: str
    mode: str  # "guided" | "custom"
    context: str
    gateway: object
    remaining_items: list[int] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)

    def next_item(self) -> Optional[int]:
        return self.remaining_items[0] if self.remaining_items else None

    def next_question(self) -> Optional[str]:
        item = self.next_item()
        if item is None:
            return None
        return question_text(item, self.agent_name, self.agent_role)


def _finished(state: SimulationState) -> bool:
    return state.status not in (RUNNING, PAUSED)


def _build_context(state: SimulationState, agent_id: int) -> str:
    profile = state.profiles[agent_id]
    memory = state.memories[agent_id]
    metrics = collect_metrics(state).team
    recent = [text for _, text in list(memory.short_term)[-10:]]
    lines = [
        f"You are {profile.name}, the team's {profile.role}.",
        f"Backstory: {profile.backstory}",
        f"Mission outcome: {state.status}, duration {metrics['duration_steps']} steps, "
        f"{metrics['targets_rescued']} targets rescued, "
        f"{metrics['targets_remaining']} never located.",
    ]
    if recent:
        lines.append("Your recent memories: " + " | ".join(recent))
    return "\n".join(lines)


def start_interview(state: SimulationState, agent_id: int, mode: str = "guided",
                    session_id: str = "interview-1") -> InterviewSession:
    """Open a read-only interview session against a finished run."""
    if not _finished(state):
        raise RunNotFinished("interviews open only after the run ends")
    if agent_id not in state.profiles:
        raise UnknownAgent(f"no agent {agent_id} in this run")
    if mode not in ("guided", "custom"):
        raise ValueError(f"unknown interview mode {mode!r}")
    profile = state.profiles[agent_id]
    return InterviewSession(
        session_id=session_id,
        agent_id=agent_id,
        agent_name=profile.name,
        agent_role=profile.role,
        mode=mode,
        context=_build_context(state, agent_id),
        gateway=state.gateway,
        remaining_items=list(range(1, 25)) if mode == "guided" else [],
    )


def ask(session: InterviewSession, question: str,
        item: Optional[int] = None) -> dict:
    """Pose one question; parse a rating when the item is Likert-scaled.

    A missing rating triggers exactly one re-ask before it is recorded as
    absent.
    """
    bindings = {
        "agent_name": session.agent_name,
        "agent_role": session.agent_role,
        "context": session.context,
        "question": question,
    }
    response = session.gateway.complete("interview", bindings)
    rating = None
    if item in LIKERT_ITEMS:
        rating = parse_rating(response)
        if rating is None:
            bindings["question"] = (question +
                                    " Please include a single 1-10 rating.")
            response = session.gateway.complete("interview", bindings)
            rating = parse_rating(response)
    entry = {"item": item, "question": question, "rating": rating,
             "explanation": response}
    session.transcript.append(entry)
    if item is not None and session.remaining_items and \
            session.remaining_items[0] == item:
        session.remaining_items.pop(0)
    return {"rating": rating, "explanation": response}


def ask_next(session: InterviewSession) -> Optional[dict]:
    """Guided mode: ask the next queued questionnaire item."""
    item = session.next_item()
    if item is None:
        return None
    question = question_text(item, session.agent_name, session.agent_role)
    result = ask(session, question, item)
    return {"item": item, "question": question, **result}


def dimension_scores(items: dict[int, dict]) -> tuple[dict, list[str]]:
    """Mean rating per dimension; unrated items are excluded and flagged."""
    scores: dict[str, Optional[float]] = {}
    flags: list[str] = []
    for dimension, members in DIMENSIONS.items():
        ratings = []
        for item in members:
            rating = items.get(item, {}).get("rating")
            if rating is None:
                flags.append(f"item {item} has no rating; excluded from {dimension}")
            else:
                ratings.append(rating)
        scores[dimension] = (sum(ratings) / len(ratings)) if ratings else None
    return scores, flags


def run_ego_survey(state: SimulationState, agent_id: int,
                   session_id: str = "survey-1") -> SurveyResponse:
    """Ask all 24 items in order and aggregate the six dimension means."""
    session = start_interview(state, agent_id, "guided", session_id)
    survey = SurveyResponse(agent_id=agent_id)
    while True:
        result = ask_next(session)
        if result is None:
            break
        survey.items[result["item"]] = {
            "rating": result["rating"],
            "explanation": result["explanation"],
        }
    survey.dimensions, survey.flags = dimension_scores(survey.items)
    return survey
