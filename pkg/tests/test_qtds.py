"""
Tests for quantum-token signatures.

Tests:
    - Honest sign / verify of both bits
    - A token signs once; majority preconditions
    - Message signing is all-or-nothing
    - Forger suite and the one-bit commitment game
    - Signature encoding
"""
from dataclasses import replace

import pytest

import hashsig
from adversaries import FORGERS
from banknote import Mint, NoteParams, Verdict, game_table, verify
from otm import OtmParams
from qsim import QubitStore
from qtds import (
    MEMBERSHIP,
    bits_of,
    commitment_bits,
    commitment_game,
    decode_signature,
    encode_signature,
    majority_holds,
    qtds_verify_note,
    sign_bit,
    sign_message,
    verify_sig,
)
from sim_core import MajorityViolated, MeasuredDeadHandle, TokenReused, WireFormatError, make_rng, substreams


# =============================================================================
# Sign / verify
# =============================================================================

@pytest.mark.parametrize("beta", [0, 1])
def test_honest_signature_verifies(store, issuer, params, beta):
    alice = store.view("alice")
    sig = sign_bit(alice, issuer.issue(alice), beta)
    assert sig.beta == beta
    assert verify_sig(sig, issuer.public_key, params.zeta)
    assert verify_sig(sig, issuer.public_key, params.zeta, mode=MEMBERSHIP)


def test_signature_does_not_verify_for_other_bit(store, issuer, params):
    alice = store.view("alice")
    sig = sign_bit(alice, issuer.issue(alice), 0)
    assert not verify_sig(replace(sig, beta=1), issuer.public_key, params.zeta)


def test_signing_consumes_the_token(store, issuer):
    alice = store.view("alice")
    note = issuer.issue(alice)
    sign_bit(alice, note, 1)
    with pytest.raises(MeasuredDeadHandle):
        sign_bit(alice, note, 0)


def test_bad_beta_rejected(store, issuer):
    alice = store.view("alice")
    with pytest.raises(ValueError):
        sign_bit(alice, issuer.issue(alice), 2)


def test_wrong_zeta_or_foreign_key_rejected(store, issuer, params):
    alice = store.view("alice")
    sig = sign_bit(alice, issuer.issue(alice), 0)
    assert not verify_sig(sig, issuer.public_key, params.zeta + 1)
    assert not verify_sig(sig, bytes(32), params.zeta)


def test_garbage_signature_is_false(issuer, params):
    assert not verify_sig(None, issuer.public_key, params.zeta)


# =============================================================================
# Majority rule
# =============================================================================

@pytest.mark.parametrize("sealed, zeta, ok", [(6, 8, True), (5, 8, False), (35, 64, True), (33, 64, False)])
def test_majority_threshold(sealed, zeta, ok):
    assert majority_holds(sealed, zeta) is ok


def test_token_too_worn_to_sign(store, issuer, params, rng):
    alice = store.view("alice")
    note = issuer.issue(alice)
    verify(alice, note, params.xi, issuer.public_key, rng)
    verify(alice, note, params.xi, issuer.public_key, rng)
    assert len(note.unopened) == 4
    with pytest.raises(MajorityViolated):
        sign_bit(alice, note, 0)


def test_token_verification_keeps_a_majority(store, issuer, params, rng):
    alice = store.view("alice")
    note = issuer.issue(alice)
    first = qtds_verify_note(alice, note, params.xi, issuer.public_key, rng)
    second = qtds_verify_note(alice, note, params.xi, issuer.public_key, rng)
    assert first.passed
    assert second.verdict is Verdict.FAIL_USED_UP
    assert verify_sig(sign_bit(alice, note, 1), issuer.public_key, params.zeta)


# =============================================================================
# Messages
# =============================================================================

def test_sign_message_bit_by_bit(store, issuer, params):
    alice = store.view("alice")
    notes = [issuer.issue(alice) for _ in range(3)]
    sigs = sign_message(alice, notes, [1, 0, 1])
    assert [s.beta for s in sigs] == [1, 0, 1]
    assert all(verify_sig(s, issuer.public_key, params.zeta) for s in sigs)


def test_sign_message_rejects_reused_token(store, issuer):
    alice = store.view("alice")
    note = issuer.issue(alice)
    with pytest.raises(TokenReused) as exc:
        sign_message(alice, [note, note], [0, 1])
    assert exc.value.index == 1
    assert all(h.alive for h in note.payload_handles())


def test_sign_message_opens_nothing_on_failure(store, issuer, params, rng):
    alice = store.view("alice")
    good = issuer.issue(alice)
    worn = issuer.issue(alice)
    for _ in range(2):
        verify(alice, worn, params.xi, issuer.public_key, rng)
    with pytest.raises(MajorityViolated) as exc:
        sign_message(alice, [good, worn], [0, 0])
    assert exc.value.index == 1
    assert all(h.alive for h in good.payload_handles())


def test_sign_message_length_mismatch(store, issuer):
    alice = store.view("alice")
    with pytest.raises(ValueError):
        sign_message(alice, [issuer.issue(alice)], [0, 1])


def test_commitment_bits_are_deterministic():
    a = commitment_bits(b"contract", 1_700_000_000, 16)
    assert a == commitment_bits(b"contract", 1_700_000_000, 16)
    assert a != commitment_bits(b"contract", 1_700_000_001, 16)
    assert bits_of(b"\xa0", 4) == [1, 0, 1, 0]


@pytest.mark.slow
def test_hundred_honest_signatures_at_full_size():
    params = NoteParams(zeta=64, xi=8, otm=OtmParams(n_otm=256))
    for k, seed in enumerate(substreams(40, 100)):
        rng = make_rng(seed)
        store = QubitStore(rng=rng, noise_p=0.05)
        keypair = hashsig.keygen(rng.bytes(32), depth=7)
        alice = store.view("alice")
        note = Mint(store, params, keypair, rng).issue(alice)
        assert qtds_verify_note(alice, note, params.xi, keypair.public_key, rng).passed
        sig = sign_bit(alice, note, k % 2)
        assert verify_sig(sig, keypair.public_key, params.zeta)
        assert not verify_sig(replace(sig, beta=1 - sig.beta), keypair.public_key, params.zeta)


# =============================================================================
# Forgery
# =============================================================================

@pytest.mark.parametrize("forger", sorted(FORGERS))
def test_forgers_lose_commitment_game(forger):
    params = NoteParams(zeta=16, xi=2, otm=OtmParams(n_otm=256))
    wins = sum(commitment_game(FORGERS[forger](), params, s, noise_p=0.0) for s in substreams(31, 10))
    assert wins == 0


@pytest.mark.parametrize("forger", sorted(FORGERS))
def test_forgers_lose_with_a_shared_table(forger):
    params = NoteParams(zeta=16, xi=2, otm=OtmParams(n_otm=64))
    table = game_table(params, make_rng(30))
    wins = sum(commitment_game(FORGERS[forger](), params, s, noise_p=0.0, table=table) for s in substreams(32, 10))
    assert wins == 0


@pytest.mark.slow
@pytest.mark.parametrize("forger", sorted(FORGERS))
def test_forgers_lose_a_thousand_games_at_full_size(forger):
    params = NoteParams(zeta=64, xi=8, otm=OtmParams(n_otm=256))
    table = game_table(params, make_rng(41))
    wins = sum(
        commitment_game(FORGERS[forger](), params, s, noise_p=0.05, table=table)
        for s in substreams(42, 1000)
    )
    assert wins <= 1


def test_pad_with_revealed_still_signs_beta(store, issuer, params, rng):
    alice = store.view("alice")
    note = issuer.issue(alice)
    forger = FORGERS["pad-with-revealed"]()
    forger.prepare(alice, note, 0, rng)
    signed = sign_bit(alice, note, 0)
    assert verify_sig(signed, issuer.public_key, params.zeta)
    assert not verify_sig(forger.forge(alice, note, signed, rng), issuer.public_key, params.zeta)


# =============================================================================
# Wire format
# =============================================================================

def test_signature_encoding_verifies_after_decoding(store, issuer, params):
    alice = store.view("alice")
    sig = sign_bit(alice, issuer.issue(alice), 1)
    blob = encode_signature(sig)
    decoded = decode_signature(blob)
    assert encode_signature(decoded) == blob
    assert decoded.unopened == sig.unopened and decoded.opened == sig.opened
    assert verify_sig(decoded, issuer.public_key, params.zeta)


def test_truncated_signature_rejected(store, issuer):
    alice = store.view("alice")
    blob = encode_signature(sign_bit(alice, issuer.issue(alice), 0))
    with pytest.raises(WireFormatError):
        decode_signature(blob[:-3])
