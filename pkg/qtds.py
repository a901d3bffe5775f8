#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Quantum tokens for digital signatures.

A banknote doubles as a one-bit signing token: opening every sealed OTM at
beta yields a majority of pre-images that match the mint-signed hashes for
beta, which anyone holding the mint public key can check. Signing consumes
the token. Verification of the note itself is the banknote procedure with
a stricter lifetime rule that keeps a majority of OTMs sealed.
"""

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from banknote import (
    ADVERSARY,
    Banknote,
    NoteParams,
    SignedTable,
    VerifyOutcome,
    attach_otms,
    check_signature_table,
    compute_note_id,
    game_table,
    verify_with_rule,
)
from hashsig import DEFAULT_HASH, MintSignature, hash_bytes
from otm import otm_retrieve
from qsim import PartyView, QubitStore
from sim_core import (
    HandleNotHeld,
    MajorityViolated,
    MeasuredDeadHandle,
    TokenReject,
    TokenReused,
    WireFormatError,
    make_rng,
)
from wire import FORMAT_VERSION, Reader, Writer

log = logging.getLogger(__name__)

INDEXED = "indexed"
MEMBERSHIP = "membership"


def majority_holds(sealed: int, zeta: int) -> bool:
    """sealed > zeta/2 + 1, in integers."""
    return 2 * sealed > zeta + 2


@dataclass
class TokenSignature:
    beta: int
    unopened: frozenset[int]                       # J at signing time
    opened: dict[int, bytes]                       # i -> OTM_i(beta)
    hashes: dict[tuple[int, int], bytes] = field(repr=False)
    sigs: dict[tuple[int, int], MintSignature] = field(repr=False)
    zeta: int = 0

    @property
    def note_id(self) -> bytes:
        return compute_note_id(self.hashes) if self.hashes else b""


# ----------------------------------------------------------------------
# Note verification with the majority rule
# ----------------------------------------------------------------------
def _majority_used_up(note: Banknote, xi: int) -> bool:
    return not majority_holds(len(note.unopened) - xi, note.zeta)


def qtds_verify_note(view: PartyView, note: Banknote, xi: int, mint_pk: bytes, rng: np.random.Generator,
                     algorithm: str = DEFAULT_HASH) -> VerifyOutcome:
    return verify_with_rule(view, note, xi, mint_pk, rng, _majority_used_up, algorithm)


# ----------------------------------------------------------------------
# Signing
# ----------------------------------------------------------------------
def _check_signable(view: PartyView, note: Banknote, index: int = 0):
    if not majority_holds(len(note.unopened), note.zeta):
        raise MajorityViolated(index, f"{len(note.unopened)} sealed OTMs of {note.zeta} is not a majority")
    for j in note.unopened:
        if j not in note.otms:
            raise HandleNotHeld(f"OTM {j} of note {index} has no qubits")
        for h in note.otms[j][1].handles:
            if not h.alive:
                raise MeasuredDeadHandle(f"OTM {j} of note {index} was already opened")
            if not view.holds(h):
                raise HandleNotHeld(f"{view.name} does not hold OTM {j} of note {index}")


def _open_all(view: PartyView, note: Banknote, beta: int) -> TokenSignature:
    opened = {}
    for j in sorted(note.unopened):
        token, payload = note.otms[j]
        try:
            opened[j] = otm_retrieve(token, payload, beta, view)
        except TokenReject:
            opened[j] = b""     # channel noise beyond delta; the majority absorbs it
    log.info("signed bit %d with note %s (%d OTMs opened)", beta, note.note_id.hex()[:12], len(opened))
    return TokenSignature(beta, frozenset(note.unopened), opened, dict(note.hashes), dict(note.sigs), note.zeta)


def sign_bit(view: PartyView, note: Banknote, beta: int) -> TokenSignature:
    if beta not in (0, 1):
        raise ValueError(f"beta must be 0 or 1, got {beta}")
    _check_signable(view, note)
    return _open_all(view, note, beta)


def sign_message(view: PartyView, notes: list[Banknote], msg_bits) -> list[TokenSignature]:
    """Sign bit k with notes[k]. All preconditions are checked before any OTM is opened."""
    msg_bits = [int(b) for b in msg_bits]
    if len(notes) != len(msg_bits):
        raise ValueError(f"{len(notes)} notes for a {len(msg_bits)}-bit message")
    if any(b not in (0, 1) for b in msg_bits):
        raise ValueError("message bits must be 0 or 1")
    seen = set()
    for k, note in enumerate(notes):
        if id(note) in seen or note.note_id in seen:
            raise TokenReused(k)
        seen.update((id(note), note.note_id))
        _check_signable(view, note, k)
    return [_open_all(view, note, beta) for note, beta in zip(notes, msg_bits)]


# ----------------------------------------------------------------------
# Signature verification
# ----------------------------------------------------------------------
def verify_sig(sig: TokenSignature, mint_pk: bytes, zeta: int, mode: str = INDEXED,
               algorithm: str = DEFAULT_HASH) -> bool:
    try:
        if sig.beta not in (0, 1):
            return False
        signed = set(sig.unopened)
        if not signed <= set(range(zeta)) or set(sig.opened) != signed:
            return False
        if not majority_holds(len(signed), zeta):
            return False
        note_id = compute_note_id(sig.hashes, algorithm)
        if not check_signature_table(note_id, zeta, sig.hashes, sig.sigs, mint_pk, algorithm):
            return False
        if mode == MEMBERSHIP:
            published = set(sig.hashes.values())
            matches = sum(1 for i in signed if hash_bytes(sig.opened[i], algorithm) in published)
        else:
            matches = sum(1 for i in signed if hash_bytes(sig.opened[i], algorithm) == sig.hashes[(i, sig.beta)])
        return 2 * matches > len(signed)
    except (AttributeError, KeyError, TypeError, ValueError):
        return False


# ----------------------------------------------------------------------
# Message helpers
# ----------------------------------------------------------------------
def bits_of(data: bytes, n: int | None = None) -> list[int]:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8)).tolist()
    return bits if n is None else bits[:n]


def commitment_bits(document: bytes, timestamp: int, n: int, algorithm: str = DEFAULT_HASH) -> list[int]:
    """First n bits of H(timestamp || document), the notary's commitment."""
    return bits_of(hash_bytes(timestamp.to_bytes(8, "big") + document, algorithm), n)


# ----------------------------------------------------------------------
# Wire format
# ----------------------------------------------------------------------
def encode_signature(sig: TokenSignature) -> bytes:
    w = Writer().u8(FORMAT_VERSION).u8(sig.beta).u32(sig.zeta)
    keys = [(i, b) for i in range(sig.zeta) for b in (0, 1)]
    for key in keys:
        w.raw(sig.hashes[key])
    for key in keys:
        w.blob(sig.sigs[key].to_bytes())
    w.bitmap(sig.unopened, sig.zeta)
    w.u32(len(sig.opened))
    for i in sorted(sig.opened):
        w.u32(i).blob(sig.opened[i])
    return w.getvalue()


def decode_signature(data: bytes, hash_len: int = 32) -> TokenSignature:
    r = Reader(data)
    r.version()
    beta = r.u8()
    zeta = r.u32()
    if beta > 1 or zeta == 0 or zeta > 1 << 20:
        raise WireFormatError(f"bad signature header (beta={beta}, zeta={zeta})")
    keys = [(i, b) for i in range(zeta) for b in (0, 1)]
    hashes = {key: r.raw(hash_len) for key in keys}
    sigs = {key: MintSignature.from_bytes(r.blob(), hash_len) for key in keys}
    unopened = frozenset(r.bitmap(zeta))
    opened = {}
    last = -1
    for _ in range(r.u32()):
        i = r.u32()
        if i <= last or i >= zeta:
            raise WireFormatError(f"bad opened index {i}")
        opened[i] = r.blob(limit=1 << 16)
        last = i
    r.finish()
    return TokenSignature(beta, unopened, opened, hashes, sigs, zeta)


# ----------------------------------------------------------------------
# One-bit commitment game
# ----------------------------------------------------------------------
class Forger(Protocol):
    """Tampers before the honest signature, then tries to sign the other bit."""

    def prepare(self, view: PartyView, note: Banknote, beta: int, rng: np.random.Generator) -> None: ...

    def forge(self, view: PartyView, note: Banknote, signed: TokenSignature,
              rng: np.random.Generator) -> TokenSignature | None: ...


def commitment_game(forger: Forger, params: NoteParams, seed: int | np.random.SeedSequence,
                    noise_p: float = 0.05, mode: str = INDEXED, table: SignedTable | None = None) -> bool:
    """One trial: the signer holds a fresh token and a random beta. Success
    means both the beta signature and a forged 1 - beta signature verify.
    A shared table only saves the signing; the OTMs are prepared per trial."""
    rng = make_rng(seed)
    store = QubitStore(rng=rng, noise_p=noise_p)
    if table is None:
        table = game_table(params, rng)
    note = attach_otms(store, params, table, rng, holder=ADVERSARY)
    view = store.view(ADVERSARY)
    beta = int(rng.integers(0, 2))
    forger.prepare(view, note, beta, rng)
    try:
        signed = sign_bit(view, note, beta)
    except (MajorityViolated, HandleNotHeld, MeasuredDeadHandle) as exc:
        log.debug("forger broke its own token: %s", exc)
        return False
    forged = forger.forge(view, note, signed, rng)
    if forged is None or forged.beta != 1 - beta:
        return False
    pk = table.mint_pk
    return (verify_sig(signed, pk, params.zeta, mode, params.hash_name)
            and verify_sig(forged, pk, params.zeta, mode, params.hash_name))
