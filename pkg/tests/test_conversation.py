"""Invitation, speaker rotation, termination, transcript rules."""

import pytest

from teamsim.conversation import (
    Conversation,
    REASON_DECLINED,
    REASON_MAX_TURNS,
    REASON_PARTICIPANT_LEFT,
    REASON_REDUNDANT,
    advance_turn,
    next_speaker,
    open_conversation,
    participant_left,
    record_invitation_reply,
    should_terminate,
)
from teamsim.errors import ClosedConversation, EmptyInvitees, NonParticipant


def dyad():
    return open_conversation(1, 2, [3], "anyone near the east wing?", clock=5)


def test_open_dyadic():
    conv = dyad()
    assert conv.participants == [2, 3]
    assert conv.transcript[0].speaker == 2
    assert conv.transcript[0].index == 0
    assert conv.is_open()


def test_open_multiparty():
    conv = open_conversation(1, 2, [3, 4, 5], "team sync", clock=0)
    assert len(conv.participants) == 4


def test_open_requires_invitees():
    with pytest.raises(EmptyInvitees):
        open_conversation(1, 2, [], "hello", clock=0)
    with pytest.raises(ValueError):
        open_conversation(1, 2, [2], "hello", clock=0)


def test_all_decline_closes():
    conv = open_conversation(1, 2, [3, 4], "hello", clock=0)
    record_invitation_reply(conv, 3, False)
    assert conv.is_open()  # 4 has not answered yet
    record_invitation_reply(conv, 4, False)
    assert not conv.is_open()
    assert conv.close_reason == REASON_DECLINED


def test_partial_decline_keeps_open():
    conv = open_conversation(1, 2, [3, 4], "hello", clock=0)
    record_invitation_reply(conv, 3, False)
    record_invitation_reply(conv, 4, True)
    assert conv.is_open()
    assert conv.participants == [2, 4]


def test_next_speaker_dyadic_alternates():
    conv = dyad()
    assert next_speaker(conv) == 3
    advance_turn(conv, 3, "on my way", clock=6)
    assert next_speaker(conv) == 2


def test_next_speaker_round_robin():
    conv = open_conversation(1, 2, [3, 4], "sync", clock=0)
    advance_turn(conv, 3, "here", clock=1)
    assert next_speaker(conv) == 4  # after b comes c in participant order


def test_selector_outsider_falls_back():
    conv = dyad()
    calls = []

    def bad_selector(conversation):
        calls.append(1)
        return 99

    assert next_speaker(conv, bad_selector) == 3
    assert len(calls) == 2  # one retry before the round-robin fallback


def test_selector_failure_falls_back():
    conv = dyad()

    def broken(conversation):
        raise RuntimeError("model down")

    assert next_speaker(conv, broken) == 3


def test_terminate_on_max_turns():
    conv = dyad()
    speakers = [3, 2]
    for turn in range(7):
        advance_turn(conv, speakers[turn % 2], f"turn {turn}", clock=turn)
    assert len(conv.transcript) == 8
    decision, reason = should_terminate(conv)
    assert decision and reason == REASON_MAX_TURNS


def test_no_terminate_early():
    conv = dyad()
    advance_turn(conv, 3, "hi", clock=1)
    assert should_terminate(conv) == (False, None)


def test_judge_redundant():
    conv = dyad()
    advance_turn(conv, 3, "copy", clock=1)
    decision, reason = should_terminate(conv, judge=lambda c: True)
    assert decision and reason == REASON_REDUNDANT


def test_judge_failure_continues():
    conv = dyad()
    advance_turn(conv, 3, "copy", clock=1)

    def broken(conversation):
        raise RuntimeError("judge down")

    assert should_terminate(conv, judge=broken) == (False, None)


def test_advance_rules():
    conv = dyad()
    advance_turn(conv, 3, "hi", clock=1)
    with pytest.raises(ValueError):
        advance_turn(conv, 3, "me again", clock=2)  # no self-reply
    with pytest.raises(NonParticipant):
        advance_turn(conv, 9, "intruder", clock=2)
    conv.close(REASON_MAX_TURNS)
    with pytest.raises(ClosedConversation):
        advance_turn(conv, 2, "too late", clock=3)


def test_turn_indices_unique_and_ordered():
    conv = open_conversation(1, 2, [3, 4], "sync", clock=0)
    advance_turn(conv, 3, "a", clock=1)
    advance_turn(conv, 4, "b", clock=2)
    indices = [t.index for t in conv.transcript]
    assert indices == [0, 1, 2]
    speakers = [t.speaker for t in conv.transcript]
    assert all(a != b for a, b in zip(speakers, speakers[1:]))


def test_participant_left_closes_small():
    conv = dyad()
    participant_left(conv, 3)
    assert not conv.is_open()
    assert conv.close_reason == REASON_PARTICIPANT_LEFT


def test_roundtrip():
    conv = open_conversation(1, 2, [3], "hello", clock=0)
    advance_turn(conv, 3, "hi", clock=1)
    restored = Conversation.from_dict(conv.to_dict())
    assert restored.to_dict() == conv.to_dict()
