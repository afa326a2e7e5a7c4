"""Registration center, application server and smart card for the scheme.

The functions here follow the four protocol phases step by step: server and
user registration, card-local login, the three-message authentication
exchange, and offline password change. Every verification failure raises a
:class:`ProtocolError` subclass; nothing is ever sent on rejection.
"""

from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field, replace

from ccauth.primitives import (
    Block,
    Identity,
    concat,
    digest,
    digest2,
    mask_password,
    random_block,
    xor,
)


class ProtocolError(Exception):
    """Base class for every protocol-level rejection."""


class RegistrationRejected(ProtocolError):
    pass


class LoginRejected(ProtocolError):
    pass


class AuthenticationRejected(ProtocolError):
    pass


class ChallengeRejected(ProtocolError):
    pass


class ConfirmationRejected(ProtocolError):
    pass


class PasswordChangeRejected(ProtocolError):
    pass


class StateError(ProtocolError):
    """A session was driven out of order or does not exist."""


class Phase(str, enum.Enum):
    AWAITING_CHALLENGE = "awaiting-challenge"
    AWAITING_CONFIRMATION = "awaiting-confirmation"
    ESTABLISHED = "established"
    FAILED = "failed"
    # server side of an outcome where no request was ever accepted or seen
    IDLE = "idle"


# -- parties -------------------------------------------------------------------


@dataclass
class RegistrationCenter:
    x: Block
    psk: Block
    issued_servers: set[Identity] = field(default_factory=set)
    issued_users: set[Identity] = field(default_factory=set)

    @classmethod
    def create(cls, rng: random.Random) -> RegistrationCenter:
        return cls(x=random_block(rng), psk=random_block(rng))

    def long_term_secret(self, user: Identity) -> Block:
        """The user's long-term secret ``digest(ID || x)`` as kept in RC records."""
        return digest(concat([user.block, self.x]))


@dataclass(frozen=True)
class SmartCard:
    id: Identity
    b: Block
    c: Block
    d: Block


@dataclass
class ServerSession:
    n1: Block
    n2: Block
    recovered_id: Identity | None
    key: Block
    phase: Phase = Phase.AWAITING_CONFIRMATION


@dataclass
class ServerState:
    sid: Identity
    psk: Block
    sessions: dict[int, ServerSession] = field(default_factory=dict)
    _handles: itertools.count = field(default_factory=itertools.count, repr=False)

    def new_handle(self) -> int:
        return next(self._handles)


# -- wire messages ---------------------------------------------------------------


@dataclass(frozen=True)
class AuthRequest:
    aid: Block
    m1: Block
    m2: Block
    d: Block


@dataclass(frozen=True)
class ServerChallenge:
    sid: Identity
    m3: Block
    m4: Block


@dataclass(frozen=True)
class KeyConfirmation:
    m5: Block


Message = AuthRequest | ServerChallenge | KeyConfirmation


@dataclass
class CardSession:
    n1: Block
    request: AuthRequest
    phase: Phase = Phase.AWAITING_CHALLENGE


# -- registration ----------------------------------------------------------------


def rc_register_server(rc: RegistrationCenter, sid: Identity) -> ServerState:
    """Authorize a server; the PSK travels out of band."""
    if sid in rc.issued_servers:
        raise RegistrationRejected(f"server {sid} is already registered")
    rc.issued_servers.add(sid)
    return ServerState(sid=sid, psk=rc.psk)


def user_compute_masked(pw: bytes | str, bio: Block) -> Block:
    """The only value the user hands the RC; password and biometric stay local."""
    return mask_password(pw, bio)


def rc_register_user(rc: RegistrationCenter, user: Identity, masked: Block) -> SmartCard:
    if user in rc.issued_users:
        raise RegistrationRejected(f"user {user} is already registered")
    a = rc.long_term_secret(user)
    b = digest(a)
    card = SmartCard(id=user, b=b, c=xor(masked, b), d=xor(rc.psk, a))
    rc.issued_users.add(user)
    return card


# -- login and authentication ----------------------------------------------------


def card_local_verify(card: SmartCard, user: Identity, pw: bytes | str, bio: Block) -> bool:
    try:
        masked = mask_password(pw, bio)
    except ValueError:
        return False
    return user == card.id and card.b == xor(masked, card.c)


def card_begin_login(
    card: SmartCard, user: Identity, pw: bytes | str, bio: Block, rng: random.Random
) -> tuple[CardSession, AuthRequest]:
    if not card_local_verify(card, user, pw, bio):
        raise LoginRejected("local verification of identity, password and biometric failed")
    n1 = random_block(rng)
    m1 = xor(digest(card.b), n1)
    aid = xor(digest(n1), card.id.block)
    m2 = digest(concat([n1, aid, card.d]))
    request = AuthRequest(aid=aid, m1=m1, m2=m2, d=card.d)
    return CardSession(n1=n1, request=request), request


def _recover_identity(block: Block) -> Identity | None:
    try:
        return Identity.from_block(block)
    except ValueError:
        return None


def server_handle_request(
    server: ServerState, req: AuthRequest, rng: random.Random
) -> tuple[int, ServerChallenge]:
    """Unmask the request, check M2, and answer with a fresh challenge.

    Returns the session handle that :func:`server_handle_confirmation` needs.
    """
    a = xor(req.d, server.psk)
    b = digest(a)
    n1 = xor(digest(b), req.m1)
    if digest(concat([n1, req.aid, req.d])) != req.m2:
        raise AuthenticationRejected("M2 check failed")
    # a valid M2 does not imply the unmasked ID is printable; keep the session anyway
    recovered = _recover_identity(xor(req.aid, digest(n1)))

    n2 = random_block(rng)
    key = digest(concat([n1, n2]))
    m3 = xor(n2, digest2(n1))
    m4 = digest(concat([server.sid.block, n2]))
    handle = server.new_handle()
    server.sessions[handle] = ServerSession(n1=n1, n2=n2, recovered_id=recovered, key=key)
    return handle, ServerChallenge(sid=server.sid, m3=m3, m4=m4)


def card_handle_challenge(
    card: SmartCard, session: CardSession, ch: ServerChallenge
) -> tuple[Block, KeyConfirmation]:
    if session.phase is not Phase.AWAITING_CHALLENGE:
        raise StateError(f"card session is {session.phase.value}, not awaiting a challenge")
    n2 = xor(ch.m3, digest2(session.n1))
    if digest(concat([ch.sid.block, n2])) != ch.m4:
        session.phase = Phase.FAILED
        raise ChallengeRejected("M4 check failed")
    key = digest(concat([session.n1, n2]))
    session.phase = Phase.ESTABLISHED
    return key, KeyConfirmation(m5=xor(key, digest(n2)))


def server_handle_confirmation(server: ServerState, handle: int, conf: KeyConfirmation) -> Block:
    session = server.sessions.get(handle)
    if session is None:
        raise StateError(f"unknown session handle {handle}")
    if session.phase is not Phase.AWAITING_CONFIRMATION:
        raise StateError(f"server session {handle} is {session.phase.value}")
    if xor(conf.m5, session.key) != digest(session.n2):
        session.phase = Phase.FAILED
        raise ConfirmationRejected("M5 check failed")
    session.phase = Phase.ESTABLISHED
    return session.key


# -- password change -------------------------------------------------------------


def card_change_password(
    card: SmartCard, user: Identity, pw: bytes | str, bio: Block, new_pw: bytes | str
) -> SmartCard:
    if not card_local_verify(card, user, pw, bio):
        raise PasswordChangeRejected("local verification failed")
    try:
        new_mask = mask_password(new_pw, bio)
    except ValueError as exc:
        raise PasswordChangeRejected(str(exc)) from exc
    return replace(card, c=xor(xor(card.c, mask_password(pw, bio)), new_mask))
