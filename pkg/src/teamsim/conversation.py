"""Multi-party conversations: invitation, turn-taking, termination.

A conversation opens with the initiator's utterance as turn 0; invitees may
accept or decline when the invitation event is delivered.  Speakers then
alternate — a selector (model-backed or round-robin) proposes who talks
next — until a judge flags the exchange as redundant, the turn cap is hit,
everyone declined, or a participant leaves.  Each turn costs one timestep,
so talking competes with acting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import ClosedConversation, EmptyInvitees, NonParticipant

logger = logging.getLogger(__name__)

OPEN = "open"
CLOSED = "closed"

REASON_REDUNDANT = "redundant"
REASON_MAX_TURNS = "max_turns"
REASON_DECLINED = "declined"
REASON_PARTICIPANT_LEFT = "participant_left"

DEFAULT_MAX_TURNS = 8


@dataclass
class Turn:
    index: int
    speaker: int
    text: str
    timestep: int

    def to_dict(self) -> dict:
        return {"index": self.index, "speaker": self.speaker,
                "text": self.text, "timestep": self.timestep}


@dataclass
class Conversation:
    conversation_id: int
    initiator: int
    participants: list[int]  # initiator first; decliners are removed
    transcript: list[Turn] = field(default_factory=list)
    status: str = OPEN
    close_reason: Optional[str] = None
    max_turns: int = DEFAULT_MAX_TURNS
    pending_invitees: list[int] = field(default_factory=list)

    @property
    def last_speaker(self) -> Optional[int]:
        return self.transcript[-1].speaker if self.transcript else None

    def is_open(self) -> bool:
        return self.status == OPEN

    def close(self, reason: str) -> None:
        self.status = CLOSED
        self.close_reason = reason

    def to_dict(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "initiator": self.initiator,
            "participants": list(self.participants),
            "transcript": [t.to_dict() for t in self.transcript],
            "status": self.status,
            "close_reason": self.close_reason,
            "max_turns": self.max_turns,
            "pending_invitees": list(self.pending_invitees),
        }

    @staticmethod
    def from_dict(d: dict) -> "Conversation":
        return Conversation(
            conversation_id=d["conversation_id"],
            initiator=d["initiator"],
            participants=list(d["participants"]),
            transcript=[Turn(**t) for t in d["transcript"]],
            status=d["status"],
            close_reason=d.get("close_reason"),
            max_turns=d.get("max_turns", DEFAULT_MAX_TURNS),
            pending_invitees=list(d.get("pending_invitees", [])),
        )


def open_conversation(
    conversation_id: int,
    initiator: int,
    invitees: list[int],
    opening_utterance: str,
    clock: int,
    max_turns: int = DEFAULT_MAX_TURNS,
) -> Conversation:
    """Create a conversation whose turn 0 is the initiator's opener."""
    if not invitees:
        raise EmptyInvitees("a conversation needs at least one invitee")
    if initiator in invitees:
        raise ValueError("the initiator cannot invite itself")
    conversation = Conversation(
        conversation_id=conversation_id,
        initiator=initiator,
        participants=[initiator] + list(invitees),
        max_turns=max_turns,
        pending_invitees=list(invitees),
    )
    conversation.transcript.append(Turn(0, initiator, opening_utterance, clock))
    return conversation


def record_invitation_reply(conversation: Conversation, invitee: int,
                            accepted: bool) -> None:
    """Apply one invitee's accept/decline at delivery time."""
    if invitee in conversation.pending_invitees:
        conversation.pending_invitees.remove(invitee)
    if not accepted and invitee in conversation.participants:
        conversation.participants.remove(invitee)
    if len(conversation.participants) < 2 and not conversation.pending_invitees:
        conversation.close(REASON_DECLINED)


def next_speaker(
    conversation: Conversation,
    selector: Optional[Callable[[Conversation], object]] = None,
) -> int:
    """Pick who talks next: a participant other than the last speaker.

    A selector may propose a speaker; an illegal proposal is retried once
    and then the round-robin order takes over.
    """
    if not conversation.is_open():
        raise ClosedConversation("conversation is closed")
    if not conversation.transcript:
        raise ValueError("next_speaker needs at least one prior turn")

    def fallback() -> int:
        order = conversation.participants
        last = conversation.last_speaker
        if last in order:
            return order[(order.index(last) + 1) % len(order)]
        return order[0] if order[0] != last else order[1 % len(order)]

    if selector is None:
        return fallback()
    for _ in range(2):
        try:
            proposed = selector(conversation)
        except Exception as exc:  # noqa: BLE001 - selector failures degrade
            logger.warning("next-speaker selector failed: %s", exc)
            break
        if proposed in conversation.participants and proposed != conversation.last_speaker:
            return proposed
        logger.warning("selector proposed illegal speaker %r", proposed)
    return fallback()


def should_terminate(
    conversation: Conversation,
    judge: Optional[Callable[[Conversation], bool]] = None,
) -> tuple[bool, Optional[str]]:
    """Decide whether the exchange should stop and why.

    The turn cap always applies; a judge may additionally flag redundancy.
    Judge failures never kill a conversation — they log and continue.
    """
    if not conversation.is_open():
        raise ClosedConversation("conversation is closed")
    if len(conversation.transcript) >= conversation.max_turns:
        return True, REASON_MAX_TURNS
    if judge is not None:
        try:
            if judge(conversation):
                return True, REASON_REDUNDANT
        except Exception as exc:  # noqa: BLE001
            logger.warning("redundancy judge failed: %s", exc)
    return False, None


def advance_turn(conversation: Conversation, speaker: int, utterance: str,
                 clock: int) -> Conversation:
    """Append one turn. The caller owns speaker selection and memory echo."""
    if not conversation.is_open():
        raise ClosedConversation("conversation is closed")
    if speaker not in conversation.participants:
        raise NonParticipant(f"agent {speaker} is not in this conversation")
    if speaker == conversation.last_speaker:
        raise ValueError("consecutive turns cannot share a speaker")
    conversation.transcript.append(
        Turn(len(conversation.transcript), speaker, utterance, clock)
    )
    return conversation


def participant_left(conversation: Conversation, agent_id: int) -> None:
    """Remove an agent mid-conversation; close if fewer than two remain."""
    if agent_id in conversation.participants:
        conversation.participants.remove(agent_id)
    if conversation.is_open() and len(conversation.participants) < 2:
        conversation.close(REASON_PARTICIPANT_LEFT)
