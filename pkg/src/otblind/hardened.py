"""Integrity-tagged variant of the protocol.

Messages 2 and 3 carry an HMAC over their untagged wire bytes under a key
both parties hold out of band.  Each receiver verifies before doing any
work, so a tampered message is rejected instead of silently yielding a
wrong secret.  Message 1 stays untagged.

The message-2 tag covers only the blinded value, never the choice index;
a Sender able to check a choice-dependent tag could simply try every index.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Optional

from .errors import IntegrityFailure, MalformedMessage, PhaseError
from .padding_hash import TAG_LEN, mac_tag, mac_verify
from .protocol import (
    ChooserPhase,
    ChooserState,
    Message,
    Message1,
    Message2,
    Message3,
    SenderPhase,
    SenderState,
    SessionParams,
    Variant,
    chooser_on_msg1,
    chooser_on_msg3,
    sender_init,
    sender_on_msg2,
    untagged_bytes,
    validate_msg3,
)

MAC_KEY_LEN = 32


@dataclass
class MacMeter:
    """Counts keyed-hash invocations made by one participant."""

    tags: int = 0
    verifies: int = 0

    @property
    def total(self) -> int:
        return self.tags + self.verifies


def _check_key(mac_key: bytes) -> None:
    if len(mac_key) != MAC_KEY_LEN:
        raise ValueError(f"MAC key must be {MAC_KEY_LEN} bytes")


def _seal(m: Message, mac_key: bytes, meter: Optional[MacMeter]):
    if meter is not None:
        meter.tags += 1
    return replace(m, tag=mac_tag(mac_key, untagged_bytes(m, Variant.HARDENED)))


def _open(m: Message, mac_key: bytes, meter: Optional[MacMeter]) -> None:
    if m.tag is None or len(m.tag) != TAG_LEN:
        raise MalformedMessage(f"hardened message needs a {TAG_LEN}-byte tag")
    if meter is not None:
        meter.verifies += 1
    if not mac_verify(mac_key, untagged_bytes(m, Variant.HARDENED), m.tag):
        raise IntegrityFailure(f"{type(m).__name__} tag mismatch")


h_sender_init = sender_init


def h_chooser_on_msg1(m1: Message1, sigma: int, params: SessionParams,
                      rng: random.Random, mac_key: bytes,
                      C: Optional[int] = None,
                      meter: Optional[MacMeter] = None) -> tuple[ChooserState, Message2]:
    _check_key(mac_key)
    state, m2 = chooser_on_msg1(m1, sigma, params, rng, C=C)
    return state, _seal(m2, mac_key, meter)


def h_sender_on_msg2(state: SenderState, m2: Message2, rng: random.Random,
                     mac_key: bytes, R: Optional[int] = None,
                     meter: Optional[MacMeter] = None) -> tuple[SenderState, Message3]:
    _check_key(mac_key)
    if state.phase is not SenderPhase.AWAIT_REQUEST:
        raise PhaseError(f"sender is in phase {state.phase.name}")
    _open(m2, mac_key, meter)
    state, m3 = sender_on_msg2(state, replace(m2, tag=None), rng, R=R)
    return state, _seal(m3, mac_key, meter)


def h_chooser_on_msg3(state: ChooserState, m3: Message3, mac_key: bytes,
                      meter: Optional[MacMeter] = None) -> tuple[ChooserState, bytes]:
    _check_key(mac_key)
    if state.phase is not ChooserPhase.AWAIT_M3:
        raise PhaseError(f"chooser is in phase {state.phase.name}")
    _open(m3, mac_key, meter)
    validate_msg3(state, m3)
    return chooser_on_msg3(state, replace(m3, tag=None))
