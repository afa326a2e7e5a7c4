"""Shared world builders and tamper helpers for the test suite."""

import hashlib
import random
from dataclasses import dataclass, replace

from ccauth.network import CardInputs
from ccauth.primitives import Block, Identity, make_rng
from ccauth.protocol import (
    AuthRequest,
    RegistrationCenter,
    ServerChallenge,
    ServerState,
    card_begin_login,
    card_handle_challenge,
    rc_register_server,
    rc_register_user,
    server_handle_confirmation,
    server_handle_request,
    user_compute_masked,
)

ALICE = Identity("alice")
PW = "hunter2"
BIO = Block(hashlib.sha256(b"alice fingerprint").digest())


@dataclass
class World:
    rc: RegistrationCenter
    server: ServerState
    server2: ServerState
    alice: CardInputs


def build_world(seed: int = 7) -> World:
    rng = make_rng(seed)
    rc = RegistrationCenter.create(rng)
    s1 = rc_register_server(rc, Identity("server-1"))
    s2 = rc_register_server(rc, Identity("server-2"))
    card = rc_register_user(rc, ALICE, user_compute_masked(PW, BIO))
    return World(rc, s1, s2, CardInputs(card=card, id=ALICE, pw=PW, bio=BIO))


def flip(block: Block, bit: int) -> Block:
    raw = bytearray(block.data)
    raw[bit // 8] ^= 1 << (bit % 8)
    return Block(bytes(raw))


def tamper_positions(msg) -> list[tuple[str, int]]:
    """Every representable single-bit modification of ``msg`` as (field, bit)."""
    if isinstance(msg, AuthRequest):
        names = ("aid", "m1", "m2", "d")
    elif isinstance(msg, ServerChallenge):
        names = ("m3", "m4")
    else:
        names = ("m5",)
    out = [(n, i) for n in names for i in range(256)]
    if isinstance(msg, ServerChallenge):
        for i in range(256):
            try:
                if Identity.from_block(flip(msg.sid.block, i)) != msg.sid:
                    out.append(("sid", i))
            except ValueError:
                pass
    return out


def tampered(msg, field: str, bit: int):
    if field == "sid":
        return replace(msg, sid=Identity.from_block(flip(msg.sid.block, bit)))
    return replace(msg, **{field: flip(getattr(msg, field), bit)})


def sample_positions(msg, count: int, seed: int) -> list[tuple[str, int]]:
    return random.Random(seed).sample(tamper_positions(msg), count)


def deliver_tampered(kind: str, field: str, bit: int, seed: int = 3) -> None:
    """Replay the seeded honest run with one message tampered.

    Raises whatever the receiving party raises at the tampered step.
    """
    world, rng = build_world(seed), make_rng(seed)
    u = world.alice
    session, req = card_begin_login(u.card, u.id, u.pw, u.bio, rng)
    if kind == "request":
        server_handle_request(world.server, tampered(req, field, bit), rng)
        return
    handle, ch = server_handle_request(world.server, req, rng)
    if kind == "challenge":
        card_handle_challenge(u.card, session, tampered(ch, field, bit))
        return
    _, conf = card_handle_challenge(u.card, session, ch)
    server_handle_confirmation(world.server, handle, tampered(conf, field, bit))


def honest_messages(seed: int = 3):
    world, rng = build_world(seed), make_rng(seed)
    u = world.alice
    session, req = card_begin_login(u.card, u.id, u.pw, u.bio, rng)
    handle, ch = server_handle_request(world.server, req, rng)
    _, conf = card_handle_challenge(u.card, session, ch)
    return req, ch, conf


__all__ = [
    "ALICE", "PW", "BIO", "World", "build_world", "flip", "tamper_positions",
    "tampered", "sample_positions", "deliver_tampered", "honest_messages",
]
