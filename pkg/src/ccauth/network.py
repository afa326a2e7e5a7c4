"""Simulated public channel between a smart card and a server.

Every message passes through an optional adversary handler that may forward,
drop, replace or inject traffic. The adversary sees plaintext (the scheme has
no channel encryption). All traffic the adversary observes or emits is kept in
a :class:`Transcript`, which persists as JSON lines.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Union

from ccauth.primitives import Block, Identity
from ccauth.protocol import (
    AuthRequest,
    CardSession,
    KeyConfirmation,
    Message,
    Phase,
    ProtocolError,
    ServerChallenge,
    ServerState,
    SmartCard,
    card_begin_login,
    card_handle_challenge,
    server_handle_confirmation,
    server_handle_request,
)


class Direction(str, enum.Enum):
    C2S = "c2s"
    S2C = "s2c"


KIND_OF = {
    AuthRequest: "auth_request",
    ServerChallenge: "server_challenge",
    KeyConfirmation: "key_confirmation",
}


@dataclass(frozen=True)
class WireMessage:
    seq: int
    direction: Direction
    payload: Message

    @property
    def kind(self) -> str:
        return KIND_OF[type(self.payload)]


@dataclass
class Transcript:
    session_label: str = ""
    entries: list[WireMessage] = field(default_factory=list)

    def append(self, direction: Direction, payload: Message) -> WireMessage:
        seq = self.entries[-1].seq + 1 if self.entries else 0
        msg = WireMessage(seq=seq, direction=direction, payload=payload)
        self.entries.append(msg)
        return msg

    def first(self, kind: type) -> Message | None:
        for entry in self.entries:
            if isinstance(entry.payload, kind):
                return entry.payload
        return None

    def __len__(self) -> int:
        return len(self.entries)


# -- adversary actions -----------------------------------------------------------


@dataclass(frozen=True)
class Forward:
    pass


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Replace:
    """Deliver ``payload`` instead of the intercepted message, same direction."""

    payload: Message


@dataclass(frozen=True)
class InjectThenForward:
    """Deliver ``payloads`` to the recipient first, then the original message."""

    payloads: tuple[Message, ...]


AdversaryAction = Union[Forward, Drop, Replace, InjectThenForward]
Adversary = Callable[[WireMessage], AdversaryAction]


def forward_all(msg: WireMessage) -> AdversaryAction:
    return Forward()


@dataclass(frozen=True)
class CardInputs:
    """What the legitimate user brings to a login: card, ID, password, biometric."""

    card: SmartCard
    id: Identity
    pw: bytes | str
    bio: Block


@dataclass
class SessionOutcome:
    card_key: Block | None
    server_key: Block | None
    card_phase: Phase
    server_phase: Phase
    transcript: Transcript

    @property
    def keys_equal(self) -> bool:
        return self.card_key is not None and self.card_key == self.server_key


# -- driver ----------------------------------------------------------------------


class _Run:
    """State of one turn-based session run."""

    def __init__(self, user: CardInputs, server: ServerState, adversary: Adversary,
                 rng: random.Random, label: str) -> None:
        self.user = user
        self.server = server
        self.adversary = adversary
        self.rng = rng
        self.transcript = Transcript(session_label=label)
        self.card_session: CardSession | None = None
        self.handle: int | None = None
        self.card_key: Block | None = None
        self.server_key: Block | None = None
        self.server_failed = False

    def route(self, direction: Direction, payload: Message) -> list[Message]:
        """Record an emitted message and return what the recipient receives."""
        sent = self.transcript.append(direction, payload)
        action = self.adversary(sent)
        if isinstance(action, Forward):
            return [payload]
        if isinstance(action, Drop):
            return []
        if isinstance(action, Replace):
            self.transcript.append(direction, action.payload)
            return [action.payload]
        if isinstance(action, InjectThenForward):
            for extra in action.payloads:
                self.transcript.append(direction, extra)
            return [*action.payloads, payload]
        raise TypeError(f"unknown adversary action {action!r}")

    def server_receive(self, payload: Message) -> list[Message]:
        replies: list[Message] = []
        try:
            if isinstance(payload, AuthRequest):
                # a newer request supersedes any pending one
                self.handle, challenge = server_handle_request(self.server, payload, self.rng)
                replies.append(challenge)
            elif isinstance(payload, KeyConfirmation):
                if self.handle is None:
                    raise ProtocolError("confirmation without a pending session")
                self.server_key = server_handle_confirmation(self.server, self.handle, payload)
            else:
                raise ProtocolError(f"server cannot accept {type(payload).__name__}")
        except ProtocolError:
            self.server_failed = True
        return replies

    def card_receive(self, payload: Message) -> list[Message]:
        assert self.card_session is not None
        if not isinstance(payload, ServerChallenge):
            return []
        try:
            self.card_key, conf = card_handle_challenge(self.user.card, self.card_session, payload)
        except ProtocolError:
            return []
        return [conf]

    def server_phase(self) -> Phase:
        if self.handle is not None:
            return self.server.sessions[self.handle].phase
        return Phase.FAILED if self.server_failed else Phase.IDLE

    def execute(self) -> SessionOutcome:
        u = self.user
        self.card_session, request = card_begin_login(u.card, u.id, u.pw, u.bio, self.rng)
        # card -> server -> card -> server
        pending: list[tuple[Direction, Message]] = [(Direction.C2S, request)]
        for _ in range(3):
            next_pending: list[tuple[Direction, Message]] = []
            for direction, payload in pending:
                for delivered in self.route(direction, payload):
                    if direction is Direction.C2S:
                        next_pending += [(Direction.S2C, r) for r in self.server_receive(delivered)]
                    else:
                        next_pending += [(Direction.C2S, r) for r in self.card_receive(delivered)]
            pending = next_pending
            if not pending:
                break

        server_phase = self.server_phase()
        return SessionOutcome(
            card_key=self.card_key,
            server_key=self.server_key if server_phase is Phase.ESTABLISHED else None,
            card_phase=self.card_session.phase,
            server_phase=server_phase,
            transcript=self.transcript,
        )


def run_honest_session(
    user: CardInputs,
    server: ServerState,
    adversary: Adversary | None = None,
    rng: random.Random | None = None,
    label: str = "session",
) -> SessionOutcome:
    """Drive one card/server exchange through the channel.

    Protocol rejections end up as ``failed`` phases in the outcome, never as
    exceptions; only the card's own local verification (bad password or
    biometric) raises, since no message is ever emitted in that case.
    """
    if rng is None:
        raise ValueError("an explicit rng is required")
    return _Run(user, server, adversary or forward_all, rng, label).execute()


def record_sessions(
    count: int, user: CardInputs, server: ServerState, rng: random.Random
) -> list[SessionOutcome]:
    if count < 1:
        raise ValueError("count must be at least 1")
    return [
        run_honest_session(user, server, rng=rng, label=f"recorded-{i:04d}")
        for i in range(count)
    ]


# -- persistence -----------------------------------------------------------------


class TranscriptFormatError(ValueError):
    def __init__(self, lineno: int, reason: str) -> None:
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno


_FIELDS = {
    "auth_request": ("aid", "m1", "m2", "d"),
    "server_challenge": ("m3", "m4"),
    "key_confirmation": ("m5",),
}


def message_to_dict(msg: WireMessage) -> dict:
    out: dict = {"seq": msg.seq, "dir": msg.direction.value, "kind": msg.kind}
    p = msg.payload
    if isinstance(p, ServerChallenge):
        out["sid_label"] = p.sid.label
    for name in _FIELDS[msg.kind]:
        out[name] = getattr(p, name).hex()
    return out


def message_from_dict(obj: dict) -> WireMessage:
    kind = obj.get("kind")
    if kind not in _FIELDS:
        raise ValueError(f"unknown kind {kind!r}")
    seq = obj.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise ValueError("seq must be an integer")
    direction = Direction(obj.get("dir"))
    blocks = {}
    for name in _FIELDS[kind]:
        value = obj.get(name)
        if not isinstance(value, str) or value != value.lower():
            raise ValueError(f"field {name} must be lowercase hex")
        blocks[name] = Block.from_hex(value)
    payload: Message
    if kind == "auth_request":
        payload = AuthRequest(**blocks)
    elif kind == "server_challenge":
        payload = ServerChallenge(sid=Identity(obj["sid_label"]), **blocks)
    else:
        payload = KeyConfirmation(**blocks)
    return WireMessage(seq=seq, direction=direction, payload=payload)


def dump_transcript(t: Transcript) -> str:
    return "".join(json.dumps(message_to_dict(m), sort_keys=True) + "\n" for m in t.entries)


def parse_transcript(lines: Iterable[str], session_label: str = "") -> Transcript:
    t = Transcript(session_label=session_label)
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            msg = message_from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise TranscriptFormatError(lineno, str(exc)) from exc
        if t.entries and msg.seq <= t.entries[-1].seq:
            raise TranscriptFormatError(lineno, "seq must strictly increase")
        t.entries.append(msg)
    return t


def save_transcript(t: Transcript, path: str | Path) -> None:
    Path(path).write_text(dump_transcript(t), encoding="utf-8")


def load_transcript(path: str | Path) -> Transcript:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_transcript(fh, session_label=path.stem)
