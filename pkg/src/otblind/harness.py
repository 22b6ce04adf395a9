"""Drive sessions over an in-memory channel and classify what happened.

Every message travels as wire bytes through an :class:`Intruder`; with no
attack configured it only records traffic.  A session ends in exactly one
:class:`Verdict`.  All randomness is derived from ``(master_seed, trial)``
so any run can be replayed bit for bit.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import hardened, protocol
from .adversary import AttackConfig, Intruder, ReplayStore, TamperTrace
from .errors import IntegrityFailure, OTError
from .hardened import MacMeter
from .modmath import KeyPair, generate_keypair
from .protocol import SessionParams, Variant, decode_message, encode_message

REPLAY_SOURCE = "A"


class Verdict(enum.Enum):
    DELIVERED_CORRECT = "DELIVERED_CORRECT"
    DELIVERED_WRONG_UNDETECTED = "DELIVERED_WRONG_UNDETECTED"
    REJECTED_TAMPER = "REJECTED_TAMPER"
    PROTOCOL_ERROR = "PROTOCOL_ERROR"


@dataclass(frozen=True)
class RunConfig:
    params: SessionParams = field(default_factory=SessionParams)
    attack: Optional[AttackConfig] = None
    master_seed: int = 0
    trials: int = 1
    # int: fixed choice; "all": trial t uses t mod n; None: drawn per trial
    sigma: Union[int, str, None] = None
    # explicit secrets (file source); None draws random ones per trial
    secrets: Optional[tuple[bytes, ...]] = None
    mac_key: Optional[bytes] = None
    keypair: Optional[KeyPair] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if isinstance(self.sigma, int) and not 0 <= self.sigma < self.params.n:
            raise ValueError(f"sigma must lie in [0, {self.params.n})")
        if isinstance(self.sigma, str) and self.sigma != "all":
            raise ValueError("sigma must be an int, 'all' or None")

    @property
    def replay(self) -> bool:
        return self.attack is not None and self.attack.splice_source is not None

    def attack_mode(self) -> str:
        a = self.attack
        if a is None or not a.active:
            return "none"
        if a.splice_source is not None:
            return "replay"
        if a.tamper_m2 and a.tamper_m3:
            return "both"
        return "msg2" if a.tamper_m2 else "msg3"

    def expected_verdict(self) -> Verdict:
        if self.attack_mode() == "none":
            return Verdict.DELIVERED_CORRECT
        if self.params.variant is Variant.HARDENED:
            return Verdict.REJECTED_TAMPER
        return Verdict.DELIVERED_WRONG_UNDETECTED

    def echo(self) -> dict:
        p = self.params
        return {
            "variant": p.variant.name.lower(),
            "attack": self.attack_mode(),
            "n": p.n,
            "sigma": self.sigma,
            "bits": p.modulus_bits if self.keypair is None else self.keypair.N.bit_length(),
            "secret_len": p.secret_len,
            "padding": p.padding.value,
            "trials": self.trials,
            "seed": self.master_seed,
            "vi": None if self.attack is None or self.attack.vi is None
            else format(self.attack.vi, "x"),
            "phi": 0 if self.attack is None else self.attack.phi,
        }


@dataclass
class SessionOutcome:
    verdict: Verdict
    sigma: int
    recovered: Optional[bytes]
    expected: bytes
    trace: TamperTrace
    error: Optional[str] = None
    mac_calls: dict = field(default_factory=dict)
    prior: Optional["SessionOutcome"] = None


@dataclass
class ExperimentReport:
    config: dict
    counts: dict
    expected_verdict: str
    duration_ms: float = 0.0
    sessions: list = field(default_factory=list)

    @property
    def trials(self) -> int:
        return sum(self.counts.values())

    @property
    def rates(self) -> dict:
        return {k: v / self.trials for k, v in self.counts.items()}

    @property
    def all_expected(self) -> bool:
        return self.counts[self.expected_verdict] == self.trials

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "config": self.config,
            "counts": self.counts,
            "rates": self.rates,
            "expected_verdict": self.expected_verdict,
            "all_expected": self.all_expected,
        }
        if self.sessions:
            d["sessions"] = self.sessions
        if timing:
            d["duration_ms"] = round(self.duration_ms, 3)
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------ seeding

def trial_seed(master_seed: int, trial_index: int) -> int:
    x = (master_seed ^ trial_index) & (2**64 - 1)
    return int.from_bytes(hashlib.sha256(x.to_bytes(8, "big")).digest()[:8], "big")


def substream(seed: int, label: str) -> random.Random:
    h = hashlib.sha256(seed.to_bytes(8, "big") + label.encode()).digest()
    return random.Random(int.from_bytes(h, "big"))


def _mac_key(config: RunConfig, seed: int) -> bytes:
    if config.mac_key is not None:
        return config.mac_key
    return hashlib.sha256(b"mac-key" + seed.to_bytes(8, "big")).digest()


def _sigma(config: RunConfig, trial_index: int, rng: random.Random) -> int:
    if config.sigma == "all":
        return trial_index % config.params.n
    if config.sigma is None:
        return rng.randrange(config.params.n)
    return config.sigma


# ------------------------------------------------------------ sessions

def run_session(config: RunConfig, trial_index: int = 0, *,
                label: str = "", keypair: Optional[KeyPair] = None,
                store: Optional[ReplayStore] = None,
                record_as: Optional[str] = None,
                sigma: Optional[int] = None,
                C: Optional[int] = None, R: Optional[int] = None,
                U_list=None) -> SessionOutcome:
    """Run messages 1-3 end to end and classify the result.

    Keyword arguments other than ``config`` and ``trial_index`` are hooks
    for fixed-key scenarios and toy-modulus enumeration.
    """
    params = config.params
    seed = trial_seed(config.master_seed, trial_index)
    tag = label + ":" if label else ""
    rs = {k: substream(seed, tag + k)
          for k in ("secrets", "sigma", "sender", "chooser", "intruder")}
    if config.secrets is not None:
        secrets = config.secrets
    else:
        secrets = tuple(rs["secrets"].randbytes(params.secret_len)
                        for _ in range(params.n))
    if sigma is None:
        sigma = _sigma(config, trial_index, rs["sigma"])
    keypair = keypair or config.keypair
    is_hard = params.variant is Variant.HARDENED
    mac_key = _mac_key(config, seed)
    meters = {"sender": MacMeter(), "chooser": MacMeter()}
    intruder = Intruder(config.attack, rs["intruder"], store=store, record_as=record_as)
    expected = secrets[sigma]

    def outcome(verdict, recovered=None, error=None):
        return SessionOutcome(
            verdict=verdict, sigma=sigma, recovered=recovered, expected=expected,
            trace=intruder.trace, error=error,
            mac_calls={k: (m.tags, m.verifies) for k, m in meters.items()},
        )

    try:
        s_state, m1 = protocol.sender_init(secrets, params, rs["sender"],
                                           keypair=keypair, U_list=U_list)
        m1_in = decode_message(intruder.pass_through(encode_message(m1, params.variant)))

        if is_hard:
            c_state, m2 = hardened.h_chooser_on_msg1(
                m1_in, sigma, params, rs["chooser"], mac_key, C=C, meter=meters["chooser"])
        else:
            c_state, m2 = protocol.chooser_on_msg1(m1_in, sigma, params, rs["chooser"], C=C)
        m2_in = decode_message(intruder.on_msg2(encode_message(m2, params.variant)))

        if is_hard:
            s_state, m3 = hardened.h_sender_on_msg2(
                s_state, m2_in, rs["sender"], mac_key, R=R, meter=meters["sender"])
        else:
            s_state, m3 = protocol.sender_on_msg2(s_state, m2_in, rs["sender"], R=R)
        m3_in = decode_message(intruder.on_msg3(encode_message(m3, params.variant)))

        if is_hard:
            c_state, recovered = hardened.h_chooser_on_msg3(
                c_state, m3_in, mac_key, meter=meters["chooser"])
        else:
            c_state, recovered = protocol.chooser_on_msg3(c_state, m3_in)
    except IntegrityFailure as exc:
        return outcome(Verdict.REJECTED_TAMPER, error=str(exc))
    except OTError as exc:
        return outcome(Verdict.PROTOCOL_ERROR, error=f"{type(exc).__name__}: {exc}")

    if recovered == expected:
        return outcome(Verdict.DELIVERED_CORRECT, recovered)
    return outcome(Verdict.DELIVERED_WRONG_UNDETECTED, recovered)


def run_replay_scenario(config: RunConfig, trial_index: int = 0,
                        recorded=None) -> SessionOutcome:
    """Two sessions under one key: A is recorded, B's message 3 is spliced.

    ``recorded`` replaces session A with an explicit ciphertext set.
    """
    seed = trial_seed(config.master_seed, trial_index)
    keypair = config.keypair or generate_keypair(
        config.params.modulus_bits, substream(seed, "replay:key"))
    store = ReplayStore()
    prior = None
    if recorded is None:
        prior = run_session(replace(config, attack=None), trial_index, label="A",
                            keypair=keypair, store=store, record_as=REPLAY_SOURCE)
        if prior.verdict is not Verdict.DELIVERED_CORRECT:
            return prior
    else:
        store.record(REPLAY_SOURCE, recorded)
    attack = config.attack or AttackConfig()
    if attack.splice_source is None:
        attack = replace(attack, splice_source=REPLAY_SOURCE)
    out = run_session(replace(config, attack=attack), trial_index, label="B",
                      keypair=keypair, store=store)
    out.prior = prior
    return out


def _trial(args) -> SessionOutcome:
    config, t = args
    if config.replay:
        return run_replay_scenario(config, t)
    return run_session(config, t)


def iter_outcomes(config: RunConfig, jobs: int = 1):
    work = [(config, t) for t in range(config.trials)]
    if jobs <= 1:
        yield from map(_trial, work)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves trial order, so the fold below stays deterministic
        yield from pool.map(_trial, work, chunksize=max(1, len(work) // (4 * jobs)))


def run_experiment(config: RunConfig, jobs: int = 1, keep_sessions: bool = False,
                   transcript=None) -> ExperimentReport:
    start = time.perf_counter()
    counts = {v.value: 0 for v in Verdict}
    sessions = []
    for t, out in enumerate(iter_outcomes(config, jobs)):
        counts[out.verdict.value] += 1
        if keep_sessions:
            sessions.append(session_summary(t, out))
        if transcript is not None:
            write_transcript(transcript, t, out)
    return ExperimentReport(
        config=config.echo(),
        counts=counts,
        expected_verdict=config.expected_verdict().value,
        duration_ms=(time.perf_counter() - start) * 1000,
        sessions=sessions,
    )


def session_summary(trial_index: int, out: SessionOutcome) -> dict:
    return {
        "trial": trial_index,
        "sigma": out.sigma,
        "verdict": out.verdict.value,
        "recovered": None if out.recovered is None else out.recovered.hex(),
        "expected": out.expected.hex(),
        "error": out.error,
        "mac_calls": {k: list(v) for k, v in out.mac_calls.items()},
        "trace": out.trace.to_dict(),
    }


def write_transcript(fh, trial_index: int, out: SessionOutcome) -> None:
    """One JSON line per message: direction, original and forwarded hex."""
    chain = []
    while out is not None:
        chain.append(out)
        out = out.prior
    labels = ["A", "B"] if len(chain) == 2 else [None]
    for lab, o in zip(labels, reversed(chain)):
        for rec in o.trace.records:
            line = {"trial": trial_index, **rec.to_dict()}
            if lab is not None:
                line["session"] = lab
            fh.write(json.dumps(line, sort_keys=True) + "\n")
