"""Command line entry point.

Exit codes: 0 when every session ended with the verdict expected for the
configuration, 1 otherwise, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import ExitStack

from . import harness
from .adversary import AttackConfig
from .modmath import generate_keypair
from .padding_hash import Padding
from .protocol import SessionParams, Variant

log = logging.getLogger("otblind")


def _hex_int(s: str) -> int:
    try:
        return int(s, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex integer: {s!r}") from None


def _hex_bytes(s: str) -> bytes:
    try:
        return bytes.fromhex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not hex bytes: {s!r}") from None


def _sigma(s: str):
    if s == "all":
        return s
    try:
        return int(s)
    except ValueError:
        raise argparse.ArgumentTypeError("sigma must be an integer or 'all'") from None


def _session_args(p: argparse.ArgumentParser, attack: bool = True) -> None:
    p.add_argument("--variant", choices=["baseline", "hardened"], default="baseline")
    if attack:
        p.add_argument("--attack", choices=["none", "msg2", "msg3", "both", "replay"],
                       default="none")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--sigma", type=_sigma, default=None,
                   help="choice index, or 'all' to cycle over trials (default: random)")
    p.add_argument("--bits", type=int, default=512)
    p.add_argument("--secret-len", type=int, default=32)
    p.add_argument("--padding", choices=["identity", "fdh"], default="fdh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vi", type=_hex_int, default=None, help="fixed V_I in hex")
    p.add_argument("--phi", type=int, default=None,
                   help="down-blinding exponent (default 1 for msg3, else 0)")
    p.add_argument("--mac-key", type=_hex_bytes, default=None,
                   help="32-byte shared MAC key in hex (hardened)")
    p.add_argument("--secrets", default=None,
                   help="file with one hex-encoded secret per line")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--transcript", default=None, help="JSON-lines message transcript")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock duration in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otblind",
        description="Blind-signature OT with a man-in-the-middle attack and its fix")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    kg = sub.add_parser("keygen", help="generate an RSA keypair")
    kg.add_argument("--bits", type=int, default=512)
    kg.add_argument("--seed", type=int, default=0)
    kg.add_argument("--out", default=None)

    run = sub.add_parser("run", help="run a single session")
    _session_args(run)

    exp = sub.add_parser("experiment", help="run many seeded sessions")
    _session_args(exp)
    exp.add_argument("--trials", type=int, default=100)
    exp.add_argument("--jobs", type=int, default=1)

    rep = sub.add_parser("replay", help="splice a recorded ciphertext set into a later session")
    _session_args(rep, attack=False)
    rep.add_argument("--trials", type=int, default=1)
    return parser


def config_from_args(args, parser) -> harness.RunConfig:
    attack_mode = "replay" if args.command == "replay" else args.attack
    if args.n < 2:
        parser.error("--n must be at least 2")
    if isinstance(args.sigma, int) and not 0 <= args.sigma < args.n:
        parser.error(f"--sigma must lie in [0, {args.n})")
    if args.bits < 16:
        parser.error("--bits must be at least 16")
    if args.secret_len < 1:
        parser.error("--secret-len must be positive")
    if args.vi is not None and args.vi <= 1:
        parser.error("--vi must be greater than 1")
    phi = args.phi
    if phi is None:
        phi = 1 if attack_mode == "msg3" else 0
    if phi < 0:
        parser.error("--phi must be non-negative")
    if args.mac_key is not None and len(args.mac_key) != 32:
        parser.error("--mac-key must be 32 bytes")
    trials = getattr(args, "trials", 1)
    if trials < 1:
        parser.error("--trials must be at least 1")

    secrets = None
    if args.secrets:
        try:
            with open(args.secrets) as fh:
                secrets = tuple(bytes.fromhex(line.strip()) for line in fh if line.strip())
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read secrets: {exc}")
        if len(secrets) != args.n or any(len(s) != args.secret_len for s in secrets):
            parser.error(f"secrets file must hold {args.n} secrets of {args.secret_len} bytes")

    attack = {
        "none": None,
        "msg2": AttackConfig(tamper_m2=True, vi=args.vi, phi=phi),
        "msg3": AttackConfig(tamper_m3=True, vi=args.vi, phi=phi),
        "both": AttackConfig(tamper_m2=True, tamper_m3=True, vi=args.vi, phi=phi),
        "replay": AttackConfig(splice_source=harness.REPLAY_SOURCE, vi=args.vi, phi=phi),
    }[attack_mode]
    params = SessionParams(
        n=args.n, modulus_bits=args.bits, secret_len=args.secret_len,
        padding=Padding(args.padding),
        variant=Variant.HARDENED if args.variant == "hardened" else Variant.BASELINE,
    )
    return harness.RunConfig(params=params, attack=attack, master_seed=args.seed,
                             trials=trials, sigma=args.sigma, secrets=secrets,
                             mac_key=args.mac_key)


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")

    if args.command == "keygen":
        if args.bits < 16:
            print("otblind: --bits must be at least 16", file=sys.stderr)
            return 2
        import random
        kp = generate_keypair(args.bits, random.Random(args.seed))
        doc = {k: format(getattr(kp, k), "x") for k in ("N", "e", "d", "p", "q")}
        doc["bits"] = kp.N.bit_length()
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
        return 0

    try:
        config = config_from_args(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)

    with ExitStack() as stack:
        transcript = None
        if args.transcript:
            transcript = stack.enter_context(open(args.transcript, "w"))
        report = harness.run_experiment(
            config, jobs=getattr(args, "jobs", 1),
            keep_sessions=args.command != "experiment", transcript=transcript)

    log.info("%d trials in %.1f ms", report.trials, report.duration_ms)
    _emit(report.to_json(timing=args.timing), args.out)
    if not report.all_expected:
        print(f"otblind: unexpected verdicts {report.counts}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
