"""Scenario runner: ``ccauth honest`` and ``ccauth attack <name>``.

Exit status: 0 when the scenario ends as expected (honest run agrees on a key,
or the attack succeeds), 1 when it does not, 2 on usage/config errors, 3 on
internal errors.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ccauth import __version__
from ccauth.attacks import (
    AttackReport,
    break_forward_secrecy,
    extract_card,
    impersonate_user,
    recover_session_keys,
    run_mitm,
    spoof_server,
)
from ccauth.network import CardInputs, SessionOutcome, Transcript, record_sessions, run_honest_session, save_transcript
from ccauth.primitives import HASH_NAME, Block, Identity, make_rng
from ccauth.protocol import RegistrationCenter, ServerChallenge, ServerState, rc_register_server, rc_register_user, user_compute_masked

SCHEMA_VERSION = 1
ATTACKS = ("stolen-card", "impersonate", "spoof-server", "mitm", "forward-secrecy")

EXIT_OK, EXIT_UNEXPECTED, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class UserConfig:
    id: str
    pw: str
    bio_hex: str


@dataclass
class ScenarioConfig:
    seed: int
    users: list[UserConfig]
    servers: list[str]
    sessions_to_record: int = 5
    output_path: str | None = None

    @classmethod
    def from_dict(cls, raw: Any) -> ScenarioConfig:
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        seed = raw.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")

        users_raw = raw.get("users")
        if not isinstance(users_raw, list) or not users_raw:
            raise ConfigError("users: at least one user is required")
        users = []
        for i, u in enumerate(users_raw):
            if not isinstance(u, dict):
                raise ConfigError(f"users[{i}]: must be an object")
            for key in ("id", "pw", "bio_hex"):
                if not isinstance(u.get(key), str):
                    raise ConfigError(f"users[{i}].{key}: must be a string")
            users.append(UserConfig(u["id"], u["pw"], u["bio_hex"]))

        servers_raw = raw.get("servers")
        if not isinstance(servers_raw, list) or not servers_raw:
            raise ConfigError("servers: at least one server is required")
        servers = []
        for i, s in enumerate(servers_raw):
            if not isinstance(s, dict) or not isinstance(s.get("sid"), str):
                raise ConfigError(f"servers[{i}].sid: must be a string")
            servers.append(s["sid"])

        record = raw.get("sessions_to_record", 5)
        if not isinstance(record, int) or isinstance(record, bool) or record < 0:
            raise ConfigError("sessions_to_record: must be a non-negative integer")
        out = raw.get("output_path")
        if out is not None and not isinstance(out, str):
            raise ConfigError("output_path: must be a string")
        return cls(seed, users, servers, record, out)


def default_config() -> dict:
    return {
        "seed": 1,
        "users": [{
            "id": "alice",
            "pw": "correct horse",
            "bio_hex": hashlib.sha256(b"alice fingerprint template").hexdigest(),
        }],
        "servers": [{"sid": "server-1"}, {"sid": "server-2"}],
        "sessions_to_record": 5,
    }


@dataclass
class World:
    rc: RegistrationCenter
    servers: list[ServerState]
    users: list[CardInputs]


def provision(config: ScenarioConfig, rng) -> World:
    """Registration phases; traffic here never touches the public channel."""
    rc = RegistrationCenter.create(rng)
    try:
        servers = [rc_register_server(rc, Identity(sid)) for sid in config.servers]
        users = []
        for i, u in enumerate(config.users):
            try:
                bio = Block.from_hex(u.bio_hex.lower())
            except ValueError as exc:
                raise ConfigError(f"users[{i}].bio_hex: {exc}") from exc
            ident = Identity(u.id)
            card = rc_register_user(rc, ident, user_compute_masked(u.pw, bio))
            users.append(CardInputs(card=card, id=ident, pw=u.pw, bio=bio))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid identity or password: {exc}") from exc
    return World(rc, servers, users)


class Run:
    """Collects outcome summary, attack reports and transcripts for one command."""

    def __init__(self, config: ScenarioConfig, command: str, attack: str | None) -> None:
        self.config = config
        self.command = command
        self.attack = attack
        self.outcome: dict[str, Any] = {}
        self.reports: list[AttackReport] = []
        self.transcripts: list[Transcript] = []

    @property
    def succeeded(self) -> bool:
        if self.attack is None:
            return bool(self.outcome.get("keys_equal"))
        return bool(self.reports) and all(r.succeeded for r in self.reports)

    def transcript_refs(self) -> list[str]:
        return [f"transcripts/{i:04d}-{t.session_label}.jsonl" for i, t in enumerate(self.transcripts)]

    def report(self) -> dict[str, Any]:
        c = self.config
        return {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "hash_name": HASH_NAME,
            "seed": c.seed,
            "scenario": {
                "command": self.command,
                "attack": self.attack,
                "users": [u.id for u in c.users],
                "servers": list(c.servers),
                "sessions_to_record": c.sessions_to_record,
            },
            "outcome": {**self.outcome, "succeeded": self.succeeded},
            "attacks": [r.to_dict() for r in self.reports],
            "transcripts": self.transcript_refs() if c.output_path else [],
            "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }

    def write(self) -> None:
        if not self.config.output_path:
            return
        out = Path(self.config.output_path)
        (out / "transcripts").mkdir(parents=True, exist_ok=True)
        for ref, t in zip(self.transcript_refs(), self.transcripts):
            save_transcript(t, out / ref)
        (out / "report.json").write_text(json.dumps(self.report(), sort_keys=True, indent=2) + "\n")


def canonical(report: dict[str, Any]) -> str:
    """Deterministic form of a report: sorted keys, no timestamps."""
    stripped = {k: v for k, v in report.items() if k != "generated_at"}
    return json.dumps(stripped, sort_keys=True, indent=2) + "\n"


def _summarize(outcome: SessionOutcome) -> dict[str, Any]:
    return {
        "card_phase": outcome.card_phase.value,
        "server_phase": outcome.server_phase.value,
        "keys_equal": outcome.keys_equal,
        "messages": len(outcome.transcript),
    }


def cmd_honest(config: ScenarioConfig) -> Run:
    rng = make_rng(config.seed)
    world = provision(config, rng)
    run = Run(config, "honest", None)
    outcome = run_honest_session(world.users[0], world.servers[0], rng=rng, label="honest")
    run.outcome = _summarize(outcome)
    run.transcripts.append(outcome.transcript)
    return run


def cmd_attack(name: str, config: ScenarioConfig) -> Run:
    if name not in ATTACKS:
        raise ConfigError(f"unknown attack {name!r}; choose from {', '.join(ATTACKS)}")
    rng = make_rng(config.seed)
    world = provision(config, rng)
    user, server = world.users[0], world.servers[0]
    run = Run(config, "attack", name)

    def corpus(minimum: int = 0) -> list[SessionOutcome]:
        n = max(config.sessions_to_record, minimum)
        recorded = record_sessions(n, user, server, rng) if n else []
        run.transcripts += [o.transcript for o in recorded]
        return recorded

    # the card is stolen after any recorded traffic
    if name == "stolen-card":
        recorded = corpus()
        stolen = extract_card(user.card)
        run.reports.append(recover_session_keys(
            stolen, [o.transcript for o in recorded], [o.server_key for o in recorded]))
        run.outcome = {"sessions_recorded": len(recorded), "keys_recovered": run.reports[0].matched}
    elif name == "impersonate":
        stolen = extract_card(user.card)
        for target in world.servers:
            run.reports.append(impersonate_user(stolen, target, rng))
        run.outcome = {"servers_breached": sum(r.succeeded for r in run.reports)}
    elif name == "spoof-server":
        recorded = corpus(minimum=1)
        observed = recorded[-1].transcript.first(ServerChallenge)
        assert observed is not None
        stolen = extract_card(user.card)
        run.reports.append(spoof_server(stolen, observed.sid, user, rng))
        run.outcome = {"spoofed_sid": observed.sid.label}
    elif name == "mitm":
        stolen = extract_card(user.card)
        report = run_mitm(stolen, user, server, rng)
        run.reports.append(report)
        run.outcome = {"keys_differ": report.acceptance_flags.get("keys_differ", False)}
    else:
        recorded = corpus(minimum=1)
        # compromise event: the long-term secret leaks from RC records
        a = world.rc.long_term_secret(user.id)
        for o in recorded:
            run.reports.append(break_forward_secrecy(a, o.transcript, o.server_key))
        run.outcome = {"sessions_recorded": len(recorded),
                       "keys_recovered": sum(r.succeeded for r in run.reports)}
    return run


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario config (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="directory for report.json and transcripts")
    common.add_argument("--record", type=int, help="override sessions_to_record")
    common.add_argument("--json", action="store_true", help="print the canonical report to stdout")

    parser = argparse.ArgumentParser(prog="ccauth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("honest", parents=[common], help="run one honest session")
    attack = sub.add_parser("attack", parents=[common], help="run one attack scenario")
    attack.add_argument("name", help=f"one of: {', '.join(ATTACKS)}")
    return parser


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON: {exc}") from exc
    else:
        raw = default_config()
    if isinstance(raw, dict):
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.record is not None:
            raw["sessions_to_record"] = args.record
        if args.out is not None:
            raw["output_path"] = args.out
    return ScenarioConfig.from_dict(raw)


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
        if args.command == "honest":
            run = cmd_honest(config)
        else:
            run = cmd_attack(args.name, config)
    except ConfigError as exc:
        print(f"ccauth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"ccauth: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL

    try:
        run.write()
    except OSError as exc:
        print(f"ccauth: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    report = run.report()
    if args.json:
        sys.stdout.write(canonical(report))
    else:
        label = run.attack or "honest"
        status = "SUCCEEDED" if run.succeeded else "FAILED"
        print(f"{label}: {status} (seed {config.seed}, hash {HASH_NAME})")
        for key, value in sorted(run.outcome.items()):
            print(f"  {key}: {value}")
        for r in run.reports:
            print(f"  [{r.attack_name}] {'ok' if r.succeeded else 'FAIL'}: {r.notes}")
    return EXIT_OK if run.succeeded else EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
