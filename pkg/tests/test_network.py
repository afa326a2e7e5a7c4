import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccauth.network import (
    Direction,
    Drop,
    Forward,
    InjectThenForward,
    Replace,
    Transcript,
    TranscriptFormatError,
    dump_transcript,
    load_transcript,
    record_sessions,
    run_honest_session,
    save_transcript,
)
from ccauth.primitives import Block, Identity, make_rng, random_block
from ccauth.protocol import (
    AuthRequest,
    KeyConfirmation,
    Phase,
    ServerChallenge,
    card_begin_login,
    card_handle_challenge,
    server_handle_confirmation,
    server_handle_request,
)
from support import build_world


def test_honest_run(world, rng):
    out = run_honest_session(world.alice, world.server, rng=rng)
    assert out.card_phase is out.server_phase is Phase.ESTABLISHED
    assert out.card_key == out.server_key and out.keys_equal
    assert [m.kind for m in out.transcript.entries] == ["auth_request", "server_challenge", "key_confirmation"]
    assert [m.direction for m in out.transcript.entries] == [Direction.C2S, Direction.S2C, Direction.C2S]
    assert [m.seq for m in out.transcript.entries] == [0, 1, 2]


def test_requires_rng(world):
    with pytest.raises(ValueError):
        run_honest_session(world.alice, world.server)


def test_drop_first_message(world, rng):
    out = run_honest_session(world.alice, world.server, adversary=lambda m: Drop(), rng=rng)
    assert out.card_phase is Phase.AWAITING_CHALLENGE
    assert out.server_phase is Phase.IDLE
    assert out.card_key is None and out.server_key is None
    assert len(out.transcript) == 1


def test_replace_m2_fails_server(world, rng):
    def adversary(msg):
        if isinstance(msg.payload, AuthRequest):
            return Replace(replace(msg.payload, m2=random_block(make_rng(0))))
        return Forward()

    out = run_honest_session(world.alice, world.server, adversary=adversary, rng=rng)
    assert out.server_phase is Phase.FAILED
    assert out.card_phase is Phase.AWAITING_CHALLENGE
    # original plus the replacement, each with its own seq
    assert [m.seq for m in out.transcript.entries] == [0, 1]


def test_forward_is_transparent():
    world_a, world_b = build_world(11), build_world(11)
    rng_a, rng_b = make_rng(5), make_rng(5)
    via_channel = run_honest_session(world_a.alice, world_a.server, adversary=lambda m: Forward(), rng=rng_a)

    u = world_b.alice
    session, req = card_begin_login(u.card, u.id, u.pw, u.bio, rng_b)
    handle, ch = server_handle_request(world_b.server, req, rng_b)
    card_key, conf = card_handle_challenge(u.card, session, ch)
    server_key = server_handle_confirmation(world_b.server, handle, conf)

    assert via_channel.card_key == card_key and via_channel.server_key == server_key
    assert [m.payload for m in via_channel.transcript.entries] == [req, ch, conf]


def test_deterministic_transcripts():
    def run():
        w = build_world(3)
        return dump_transcript(run_honest_session(w.alice, w.server, rng=make_rng(9)).transcript)

    assert run() == run()


def test_replayed_request_injection(world, rng):
    old = run_honest_session(world.alice, world.server, rng=rng)
    old_request = old.transcript.first(AuthRequest)

    def adversary(msg):
        if isinstance(msg.payload, AuthRequest):
            return InjectThenForward((old_request,))
        return Forward()

    out = run_honest_session(world.alice, world.server, adversary=adversary, rng=rng)
    # no freshness check: the server answers the replay, and its stale challenge
    # reaches the card first and kills the card's session
    kinds = [m.kind for m in out.transcript.entries]
    assert kinds.count("server_challenge") == 2
    assert out.card_phase is Phase.FAILED
    assert out.server_phase is Phase.AWAITING_CONFIRMATION
    assert not out.keys_equal
    seqs = [m.seq for m in out.transcript.entries]
    assert seqs == sorted(set(seqs))


def test_record_sessions(world, rng):
    outs = record_sessions(5, world.alice, world.server, rng)
    assert len(outs) == 5
    assert len({o.server_key for o in outs}) == 5
    assert len({o.transcript.first(AuthRequest).d for o in outs}) == 1
    assert len(record_sessions(1, world.alice, world.server, rng)) == 1
    with pytest.raises(ValueError):
        record_sessions(0, world.alice, world.server, rng)


messages = st.one_of(
    st.builds(AuthRequest, *[st.binary(min_size=32, max_size=32).map(Block)] * 4),
    st.builds(ServerChallenge, st.sampled_from([Identity("server-1"), Identity("evil")]),
              *[st.binary(min_size=32, max_size=32).map(Block)] * 2),
    st.builds(KeyConfirmation, st.binary(min_size=32, max_size=32).map(Block)),
)
actions = st.one_of(
    st.just(Forward()),
    st.just(Drop()),
    messages.map(Replace),
    st.lists(messages, max_size=2).map(lambda ms: InjectThenForward(tuple(ms))),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(actions, min_size=3, max_size=3), st.integers(0, 2**32))
def test_robust_under_random_adversary(script, seed):
    world = build_world(seed % 17)
    it = iter(script)
    out = run_honest_session(world.alice, world.server, adversary=lambda m: next(it, Forward()), rng=make_rng(seed))
    assert out.card_phase in set(Phase)
    assert (out.card_key is not None) == (out.card_phase is Phase.ESTABLISHED)
    assert (out.server_key is not None) == (out.server_phase is Phase.ESTABLISHED)


class TestPersistence:
    def test_roundtrip(self, world, rng, tmp_path):
        t = run_honest_session(world.alice, world.server, rng=rng).transcript
        path = tmp_path / "s.jsonl"
        save_transcript(t, path)
        loaded = load_transcript(path)
        assert loaded.entries == t.entries
        save_transcript(loaded, tmp_path / "again.jsonl")
        assert path.read_bytes() == (tmp_path / "again.jsonl").read_bytes()

    def test_line_format(self, world, rng):
        t = run_honest_session(world.alice, world.server, rng=rng).transcript
        lines = [json.loads(line) for line in dump_transcript(t).splitlines()]
        assert set(lines[0]) == {"seq", "dir", "kind", "aid", "m1", "m2", "d"}
        assert lines[1]["sid_label"] == "server-1"
        assert set(lines[1]) == {"seq", "dir", "kind", "sid_label", "m3", "m4"}
        assert set(lines[2]) == {"seq", "dir", "kind", "m5"}
        assert lines[2]["dir"] == "c2s" and lines[1]["dir"] == "s2c"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert len(load_transcript(path)) == 0

    def test_short_hex_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"seq": 0, "dir": "c2s", "kind": "key_confirmation", "m5": "0" * 63}) + "\n")
        with pytest.raises(TranscriptFormatError, match="line 1"):
            load_transcript(path)

    def test_malformed_line_names_line(self, world, rng, tmp_path):
        t = run_honest_session(world.alice, world.server, rng=rng).transcript
        path = tmp_path / "broken.jsonl"
        path.write_text(dump_transcript(t) + "{not json\n")
        with pytest.raises(TranscriptFormatError) as exc:
            load_transcript(path)
        assert exc.value.lineno == 4

    def test_uppercase_hex_rejected(self):
        from ccauth.network import parse_transcript
        line = json.dumps({"seq": 0, "dir": "c2s", "kind": "key_confirmation", "m5": "A" * 64})
        with pytest.raises(TranscriptFormatError):
            parse_transcript([line])

    def test_seq_must_increase(self):
        from ccauth.network import parse_transcript
        line = json.dumps({"seq": 0, "dir": "c2s", "kind": "key_confirmation", "m5": "a" * 64})
        with pytest.raises(TranscriptFormatError, match="line 2"):
            parse_transcript([line, line])

    def test_seq_monotone_in_memory(self):
        t = Transcript()
        a = t.append(Direction.C2S, KeyConfirmation(Block.zero()))
        b = t.append(Direction.C2S, KeyConfirmation(Block.zero()))
        assert b.seq > a.seq
