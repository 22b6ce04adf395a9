import random
from math import gcd

import pytest
from hypothesis import given, settings, strategies as st

from otblind.errors import (
    ChoiceOutOfRange,
    DecodeError,
    LengthMismatch,
    MalformedMessage,
    PhaseError,
)
from otblind.modmath import KeyPair, blind, units
from otblind.padding_hash import Padding, derive_key, keystream_expand, sp_pad, xor_bytes
from otblind.protocol import (
    Message1,
    Message2,
    Message3,
    SenderPhase,
    ChooserPhase,
    SessionParams,
    Variant,
    chooser_on_msg1,
    chooser_on_msg3,
    decode_message,
    encode_message,
    sender_init,
    sender_on_msg2,
)

K15 = KeyPair.from_primes(3, 5, 3)
K33 = KeyPair.from_primes(3, 11, 3)
TOY = SessionParams(n=2, modulus_bits=16, secret_len=32, padding=Padding.IDENTITY)


def secrets_for(params, seed=0):
    rng = random.Random(seed)
    return [rng.randbytes(params.secret_len) for _ in range(params.n)]


def honest(params, sigma, seed, keypair=None):
    rng = random.Random(seed)
    secrets = secrets_for(params, seed)
    s, m1 = sender_init(secrets, params, rng, keypair=keypair)
    c, m2 = chooser_on_msg1(m1, sigma, params, rng)
    s, m3 = sender_on_msg2(s, m2, rng)
    c, out = chooser_on_msg3(c, m3)
    return secrets, s, c, m1, m2, m3, out


def test_sender_init_toy():
    s, m1 = sender_init(secrets_for(TOY), TOY, random.Random(1), keypair=K15)
    assert (m1.N, m1.e) == (15, 3)
    assert len(m1.U_list) == 2 and all(gcd(U, 15) == 1 for U in m1.U_list)
    assert s.phase is SenderPhase.AWAIT_REQUEST


def test_sender_init_deterministic():
    p = SessionParams(n=2, modulus_bits=128)
    a = sender_init(secrets_for(p), p, random.Random(4))[1]
    b = sender_init(secrets_for(p), p, random.Random(4))[1]
    assert a == b


def test_sender_init_rejects_unequal_secrets():
    with pytest.raises(LengthMismatch):
        sender_init([bytes(32), bytes(31)], TOY, random.Random(0), keypair=K15)
    with pytest.raises(LengthMismatch):
        sender_init([bytes(32)] * 3, TOY, random.Random(0), keypair=K15)


def test_chooser_on_msg1_toy():
    m1 = Message1(N=15, e=3, U_list=(4, 7))
    c, m2 = chooser_on_msg1(m1, 0, TOY, random.Random(0), C=2)
    assert m2.Z == 2
    assert c.padded_choice == 4 and c.phase is ChooserPhase.AWAIT_M3
    _, m2 = chooser_on_msg1(m1, 0, TOY, random.Random(0), C=1)
    assert m2.Z == 4
    with pytest.raises(ChoiceOutOfRange):
        chooser_on_msg1(m1, 5, TOY, random.Random(0))


@pytest.mark.parametrize("m1", [
    Message1(N=15, e=3, U_list=(4, 6)),    # 6 shares a factor with 15
    Message1(N=15, e=3, U_list=(4, 15)),
    Message1(N=2, e=3, U_list=(1, 1)),
    Message1(N=15, e=3, U_list=(4, 7, 8)),  # wrong n
])
def test_chooser_rejects_bad_msg1(m1):
    with pytest.raises(MalformedMessage):
        chooser_on_msg1(m1, 0, TOY, random.Random(0))


def test_sender_on_msg2_toy():
    s, _ = sender_init([bytes(32)] * 2, TOY, random.Random(0), keypair=K15, U_list=(4, 7))
    s7, m3 = sender_on_msg2(s, Message2(Z=2), random.Random(0), R=7)
    assert m3.Y == 11 and s7.R == 7 and s7.phase is SenderPhase.DONE
    # zero secrets: ciphertext is the raw keystream
    for j, U in enumerate((4, 7)):
        k = derive_key(pow(U, 3, 15) * 7 % 15, j)
        assert m3.ciphertexts[j] == keystream_expand(k, 32)
    _, m3 = sender_on_msg2(s, Message2(Z=2), random.Random(0), R=1)
    assert m3.Y == 8
    with pytest.raises(MalformedMessage):
        sender_on_msg2(s, Message2(Z=15), random.Random(0))
    with pytest.raises(PhaseError):
        sender_on_msg2(s7, Message2(Z=2), random.Random(0))


def test_honest_toy_session_by_hand():
    secrets = secrets_for(TOY, 3)
    s, m1 = sender_init(secrets, TOY, random.Random(0), keypair=K15, U_list=(4, 7))
    c, m2 = chooser_on_msg1(m1, 0, TOY, random.Random(0), C=2)
    s, m3 = sender_on_msg2(s, m2, random.Random(0), R=7)
    c, out = chooser_on_msg3(c, m3)
    assert m3.Y == 11
    assert c.unblinded == 11 * 8 % 15 == 13 == 4**3 * 7 % 15
    assert out == secrets[0]
    with pytest.raises(PhaseError):
        chooser_on_msg3(c, m3)


def test_chooser_rejects_malformed_msg3():
    s, m1 = sender_init(secrets_for(TOY), TOY, random.Random(0), keypair=K15)
    c, m2 = chooser_on_msg1(m1, 1, TOY, random.Random(0))
    _, m3 = sender_on_msg2(s, m2, random.Random(0))
    with pytest.raises(MalformedMessage):
        chooser_on_msg3(c, Message3(Y=m3.Y, ciphertexts=m3.ciphertexts[:1]))
    with pytest.raises(MalformedMessage):
        chooser_on_msg3(c, Message3(Y=m3.Y, ciphertexts=(m3.ciphertexts[0], b"x")))
    with pytest.raises(MalformedMessage):
        chooser_on_msg3(c, Message3(Y=0, ciphertexts=m3.ciphertexts))


@pytest.mark.parametrize("n", [2, 4, 8])
def test_completeness(n):
    params = SessionParams(n=n, modulus_bits=256, secret_len=20)
    for sigma in range(n):
        secrets, s, c, _, _, _, out = honest(params, sigma, seed=sigma * 31 + n)
        assert out == secrets[sigma]
        # transcript identity: v = SP(U_sigma)^d * R
        kp = s.keypair
        assert c.unblinded == pow(sp_pad(s.U_list[sigma], kp.N), kp.d, kp.N) * s.R % kp.N
        assert c.unblinded == s.key_inputs[sigma]


def test_wrong_index_opacity():
    params = SessionParams(n=4, modulus_bits=128, secret_len=32)
    for seed in range(1000):
        sigma = seed % 4
        secrets, _, c, _, _, m3, _ = honest(params, sigma, seed)
        ks = keystream_expand(derive_key(c.unblinded, sigma), 32)
        for j in range(4):
            if j != sigma:
                assert xor_bytes(ks, m3.ciphertexts[j]) != secrets[j]


@pytest.mark.parametrize("kp", [K15, K33], ids=["N15", "N33"])
@pytest.mark.parametrize("padding", list(Padding))
def test_chooser_privacy_kernel(kp, padding):
    params = SessionParams(n=2, modulus_bits=16, padding=padding)
    m1 = Message1(N=kp.N, e=kp.e, U_list=(units(kp.N)[1], units(kp.N)[-1]))
    U = units(kp.N)
    for sigma in range(2):
        zs = sorted(chooser_on_msg1(m1, sigma, params, random.Random(0), C=C)[1].Z
                    for C in U)
        assert zs == U
        assert zs == sorted(blind(sp_pad(m1.U_list[sigma], kp.N, padding), C, kp.e, kp.N)
                            for C in U)


# ----------------------------------------------------------------- codec

def test_wire_layout_message2():
    assert encode_message(Message2(Z=2)) == bytes([1, 2, 0, 0, 0, 0, 1, 2])
    tagged = encode_message(Message2(Z=2, tag=bytes(32)), Variant.HARDENED)
    assert tagged == bytes([1, 2, 1, 0, 0, 0, 1, 2]) + bytes(32)


def test_wire_layout_message1_and_3():
    m1 = Message1(N=15, e=3, U_list=(4, 7))
    assert encode_message(m1) == bytes.fromhex("010100" "000000010f" "0000000103"
                                               "00000002" "0000000104" "0000000107")
    m3 = Message3(Y=11, ciphertexts=(b"\xaa", b"\xbb\xcc"))
    assert encode_message(m3) == bytes.fromhex("010300" "000000010b" "00000002"
                                               "00000001aa" "00000002bbcc")


def test_codec_round_trip_each_kind():
    msgs = [
        (Message1(N=33, e=3, U_list=(1, 2, 5)), Variant.BASELINE),
        (Message1(N=33, e=3, U_list=(1, 2, 5)), Variant.HARDENED),
        (Message2(Z=19), Variant.BASELINE),
        (Message2(Z=19, tag=b"t" * 32), Variant.HARDENED),
        (Message3(Y=13, ciphertexts=(b"ab", b"cd")), Variant.BASELINE),
        (Message3(Y=13, ciphertexts=(b"ab", b"cd"), tag=b"t" * 32), Variant.HARDENED),
    ]
    for m, v in msgs:
        buf = encode_message(m, v)
        assert decode_message(buf) == m
        assert encode_message(decode_message(buf), v) == buf


def test_codec_rejects_bad_buffers():
    good = encode_message(Message3(Y=13, ciphertexts=(b"ab", b"cd")))
    for cut in range(len(good)):
        with pytest.raises(DecodeError):
            decode_message(good[:cut])
    with pytest.raises(DecodeError) as ei:
        decode_message(b"\xff" + good[1:])
    assert ei.value.offset == 0
    with pytest.raises(DecodeError):
        decode_message(good[:1] + b"\x09" + good[2:])
    with pytest.raises(DecodeError):
        decode_message(good[:2] + b"\x07" + good[3:])
    with pytest.raises(DecodeError):
        decode_message(good + b"\x00")
    hardened = encode_message(Message2(Z=5, tag=bytes(32)), Variant.HARDENED)
    with pytest.raises(DecodeError):
        decode_message(hardened[:-1])


def test_codec_tag_variant_consistency():
    with pytest.raises(MalformedMessage):
        encode_message(Message2(Z=5), Variant.HARDENED)
    with pytest.raises(MalformedMessage):
        encode_message(Message2(Z=5, tag=bytes(32)), Variant.BASELINE)
    with pytest.raises(MalformedMessage):
        encode_message(Message2(Z=5, tag=bytes(31)), Variant.HARDENED)


ints = st.integers(0, 2**600)
tags = st.binary(min_size=32, max_size=32)
cts = st.lists(st.binary(max_size=40), max_size=6).map(tuple)
messages = st.one_of(
    st.tuples(st.builds(Message1, N=ints, e=ints, U_list=st.lists(ints, max_size=6).map(tuple)),
              st.sampled_from(list(Variant))),
    st.tuples(st.builds(Message2, Z=ints), st.just(Variant.BASELINE)),
    st.tuples(st.builds(Message2, Z=ints, tag=tags), st.just(Variant.HARDENED)),
    st.tuples(st.builds(Message3, Y=ints, ciphertexts=cts), st.just(Variant.BASELINE)),
    st.tuples(st.builds(Message3, Y=ints, ciphertexts=cts, tag=tags), st.just(Variant.HARDENED)),
)


@settings(max_examples=300)
@given(messages)
def test_codec_round_trip_property(mv):
    m, v = mv
    assert decode_message(encode_message(m, v)) == m


@settings(max_examples=300)
@given(messages, messages)
def test_encode_is_injective(a, b):
    if a != b:
        assert encode_message(*a) != encode_message(*b)


@given(st.binary(max_size=80))
def test_decode_never_crashes_unexpectedly(buf):
    try:
        decode_message(buf)
    except DecodeError:
        pass
