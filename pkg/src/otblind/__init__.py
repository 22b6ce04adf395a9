"""1-out-of-n oblivious transfer from RSA blind signatures, a MITM attack on it, and a keyed-hash fix."""

from .adversary import AttackConfig, Intruder, ReplayStore
from .errors import IntegrityFailure, OTError
from .harness import RunConfig, SessionOutcome, Verdict, run_experiment, run_replay_scenario, run_session
from .modmath import KeyPair, generate_keypair
from .padding_hash import Padding
from .protocol import SessionParams, Variant

__all__ = [
    "AttackConfig", "Intruder", "ReplayStore", "IntegrityFailure", "OTError",
    "RunConfig", "SessionOutcome", "Verdict", "run_experiment", "run_replay_scenario",
    "run_session", "KeyPair", "generate_keypair", "Padding", "SessionParams", "Variant",
]
