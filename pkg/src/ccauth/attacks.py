"""Executable reproductions of the scheme's published weaknesses.

Each attack returns an :class:`AttackReport`. Success is judged against keys
that the honest endpoints actually hold (taken from their session state or
:class:`~ccauth.network.SessionOutcome`), never against values re-derived
along the attack path.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from ccauth.network import (
    AdversaryAction,
    CardInputs,
    Direction,
    Drop,
    Forward,
    Replace,
    Transcript,
    WireMessage,
    run_honest_session,
)
from ccauth.primitives import Block, Identity, concat, digest, digest2, random_block, xor
from ccauth.protocol import (
    AuthRequest,
    KeyConfirmation,
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


@dataclass(frozen=True)
class StolenCardData:
    id: Identity
    b: Block
    c: Block
    d: Block


@dataclass
class AttackReport:
    attack_name: str
    succeeded: bool
    recovered_keys: list[Block] = field(default_factory=list)
    reference_keys: list[Block] = field(default_factory=list)
    acceptance_flags: dict[str, bool] = field(default_factory=dict)
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "attack_name": self.attack_name,
            "succeeded": self.succeeded,
            "recovered_keys": [k.hex() for k in self.recovered_keys],
            "reference_keys": [k.hex() for k in self.reference_keys],
            "acceptance_flags": dict(self.acceptance_flags),
            "notes": self.notes,
        }

    @property
    def matched(self) -> int:
        return sum(r == ref for r, ref in zip(self.recovered_keys, self.reference_keys))


def extract_card(card: SmartCard) -> StolenCardData:
    """Read out everything stored on the card (side-channel extraction assumed)."""
    return StolenCardData(id=card.id, b=card.b, c=card.c, d=card.d)


def _keys_from_transcript(b: Block, transcript: Transcript) -> Block | None:
    req = transcript.first(AuthRequest)
    ch = transcript.first(ServerChallenge)
    if req is None or ch is None:
        return None
    n1 = xor(digest(b), req.m1)
    n2 = xor(ch.m3, digest2(n1))
    return digest(concat([n1, n2]))


def recover_session_keys(
    stolen: StolenCardData,
    transcripts: Sequence[Transcript],
    reference_keys: Sequence[Block | None],
) -> AttackReport:
    """Recover past session keys from recorded traffic plus the card's B value."""
    report = AttackReport("stolen-card", succeeded=False)
    if not transcripts:
        report.notes = "no material"
        return report
    if len(transcripts) != len(reference_keys):
        raise ValueError("one reference key per transcript is required")

    skipped = []
    for i, (t, ref) in enumerate(zip(transcripts, reference_keys)):
        key = _keys_from_transcript(stolen.b, t)
        if key is None or ref is None:
            skipped.append(t.session_label or str(i))
            continue
        report.recovered_keys.append(key)
        report.reference_keys.append(ref)

    total = len(report.recovered_keys)
    report.acceptance_flags["all_keys_match"] = total > 0 and report.matched == total
    report.succeeded = report.acceptance_flags["all_keys_match"]
    report.notes = f"{report.matched}/{total} session keys recovered"
    if skipped:
        report.notes += f"; skipped incomplete transcripts: {', '.join(skipped)}"
    return report


def impersonate_user(
    stolen: StolenCardData, server: ServerState, rng: random.Random
) -> AttackReport:
    """Log in to ``server`` as the card owner using card contents only."""
    report = AttackReport("impersonate", succeeded=False)
    flags = report.acceptance_flags
    transcript = Transcript(session_label="impersonate")

    n_e = random_block(rng)
    m1 = xor(digest(stolen.b), n_e)
    aid = xor(digest(n_e), stolen.id.block)
    m2 = digest(concat([n_e, aid, stolen.d]))
    forged = AuthRequest(aid=aid, m1=m1, m2=m2, d=stolen.d)
    transcript.append(Direction.C2S, forged)

    try:
        handle, challenge = server_handle_request(server, forged, rng)
    except ProtocolError as exc:
        flags["request_accepted"] = False
        report.notes = f"server rejected forged request at M2 check: {exc}"
        return report
    flags["request_accepted"] = True
    transcript.append(Direction.S2C, challenge)

    n2 = xor(challenge.m3, digest2(n_e))
    sk = digest(concat([n_e, n2]))
    conf = KeyConfirmation(m5=xor(sk, digest(n2)))
    transcript.append(Direction.C2S, conf)
    try:
        server_key = server_handle_confirmation(server, handle, conf)
    except ProtocolError as exc:
        flags["server_established"] = False
        report.notes = f"server rejected confirmation at M5 check: {exc}"
        return report

    session = server.sessions[handle]
    flags["server_established"] = session.phase is Phase.ESTABLISHED
    flags["server_believes_victim"] = session.recovered_id == stolen.id
    report.recovered_keys.append(sk)
    report.reference_keys.append(server_key)
    flags["keys_match"] = sk == server_key
    report.succeeded = all(flags.values())
    report.notes = f"server {server.sid} accepted adversary as {stolen.id}"
    return report


def spoof_server(
    stolen: StolenCardData, sid: Identity, user: CardInputs, rng: random.Random
) -> AttackReport:
    """Answer the victim card's login as if the adversary were server ``sid``.

    The forged M4 binds the adversary's own nonce, which is what the card
    recovers from M3; binding any other value fails the card's check.
    """
    report = AttackReport("spoof-server", succeeded=False)
    flags = report.acceptance_flags
    transcript = Transcript(session_label="spoof-server")

    session, request = card_begin_login(user.card, user.id, user.pw, user.bio, rng)
    transcript.append(Direction.C2S, request)

    n1 = xor(request.m1, digest(stolen.b))
    n_e = random_block(rng)
    forged = ServerChallenge(
        sid=sid,
        m3=xor(n_e, digest2(n1)),
        m4=digest(concat([sid.block, n_e])),
    )
    transcript.append(Direction.S2C, forged)
    predicted = digest(concat([n1, n_e]))

    try:
        card_key, conf = card_handle_challenge(user.card, session, forged)
    except ProtocolError as exc:
        flags["card_established"] = False
        report.notes = f"card rejected forged challenge: {exc}"
        return report
    transcript.append(Direction.C2S, conf)

    flags["card_established"] = session.phase is Phase.ESTABLISHED
    report.recovered_keys.append(predicted)
    report.reference_keys.append(card_key)
    flags["keys_match"] = predicted == card_key
    report.succeeded = all(flags.values())
    report.notes = f"card accepted adversary as server {sid}; M4E binds the adversary nonce N_E"
    return report


class MitmAdversary:
    """Channel handler that splits one login into two independently keyed legs."""

    def __init__(self, stolen: StolenCardData, rng: random.Random) -> None:
        self.stolen = stolen
        self.rng = rng
        self.n1: Block | None = None
        self.n_e: Block | None = None
        self.card_key: Block | None = None
        self.server_key: Block | None = None
        self._server_m5: KeyConfirmation | None = None
        self.confirmation_sent = False

    def __call__(self, msg: WireMessage) -> AdversaryAction:
        p = msg.payload
        s = self.stolen
        if isinstance(p, AuthRequest) and self.n1 is None:
            self.n1 = xor(p.m1, digest(s.b))
            self.n_e = random_block(self.rng)
            aid = xor(digest(self.n_e), s.id.block)
            return Replace(AuthRequest(
                aid=aid,
                m1=xor(digest(s.b), self.n_e),
                m2=digest(concat([self.n_e, aid, s.d])),
                d=s.d,
            ))
        if isinstance(p, ServerChallenge) and self.n_e is not None and self.server_key is None:
            assert self.n1 is not None
            n2 = xor(p.m3, digest2(self.n_e))
            self.server_key = digest(concat([self.n_e, n2]))
            self.card_key = digest(concat([self.n1, self.n_e]))
            self._server_m5 = KeyConfirmation(m5=xor(self.server_key, digest(n2)))
            return Replace(ServerChallenge(
                sid=p.sid,
                m3=xor(self.n_e, digest2(self.n1)),
                m4=digest(concat([p.sid.block, self.n_e])),
            ))
        if isinstance(p, KeyConfirmation) and self._server_m5 is not None and not self.confirmation_sent:
            # the card's own M5 is absorbed; the server gets ours
            self.confirmation_sent = True
            return Replace(self._server_m5)
        if msg.direction is Direction.C2S and isinstance(p, KeyConfirmation):
            return Drop()
        return Forward()


def run_mitm(
    stolen: StolenCardData, user: CardInputs, server: ServerState, rng: random.Random
) -> AttackReport:
    report = AttackReport("mitm", succeeded=False)
    flags = report.acceptance_flags
    adversary = MitmAdversary(stolen, random.Random(rng.getrandbits(64)))
    outcome = run_honest_session(user, server, adversary=adversary, rng=rng, label="mitm")

    flags["card_established"] = outcome.card_phase is Phase.ESTABLISHED
    flags["server_established"] = outcome.server_phase is Phase.ESTABLISHED
    if not (flags["card_established"] and flags["server_established"]):
        failed = "card" if not flags["card_established"] else "server"
        report.notes = f"{failed} did not reach established"
        return report

    assert adversary.card_key is not None and adversary.server_key is not None
    report.recovered_keys = [adversary.card_key, adversary.server_key]
    report.reference_keys = [outcome.card_key, outcome.server_key]
    flags["adversary_holds_card_key"] = adversary.card_key == outcome.card_key
    flags["adversary_holds_server_key"] = adversary.server_key == outcome.server_key
    flags["keys_differ"] = outcome.card_key != outcome.server_key
    report.succeeded = all(flags.values())
    report.notes = "card and server each share a distinct key with the adversary"
    return report


def break_forward_secrecy(a: Block, transcript: Transcript, reference_key: Block) -> AttackReport:
    """Recover a past session key from the long-term secret A and public traffic only."""
    report = AttackReport("forward-secrecy", succeeded=False)
    key = _keys_from_transcript(digest(a), transcript)
    if key is None:
        report.notes = "transcript lacks an auth request or server challenge"
        return report
    report.recovered_keys = [key]
    report.reference_keys = [reference_key]
    report.acceptance_flags["key_matches"] = key == reference_key
    report.succeeded = key == reference_key
    report.notes = "session key derived from long-term secret and recorded messages"
    return report
