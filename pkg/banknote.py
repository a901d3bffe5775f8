#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Quantum banknotes: minting, cut-and-choose verification, transfer,
redemption, and the double-spending (forgery) game.

A note carries 2*zeta mint-signed hashes H(kappa_{i,b}) and one OTM per
index i that releases kappa_{i,0} or kappa_{i,1}. Indices split into J
(sealed OTMs) and K (opened, with the revealed pre-image). Each
verification opens xi random sealed OTMs at random bits and moves them
from J to K, so a note survives floor(zeta / xi) verifications before it
has to go back to the mint.
"""

import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

import hashsig
from hashsig import DEFAULT_HASH, MintKeypair, MintSignature, hash_bytes
from otm import OtmParams, OtmPayload, OtmToken, otm_create, otm_retrieve
from qsim import MINT, PartyView, QubitStore, StateHandle, move_handles
from sim_core import (
    DoubleRedemption,
    HandleNotHeld,
    InvalidParams,
    KeysExhausted,
    LengthMismatch,
    MeasuredDeadHandle,
    QMoneyError,
    RedemptionRejected,
    TokenReject,
    WireFormatError,
    load_json,
    make_rng,
    save_json,
)
from wire import FORMAT_VERSION, Reader, Writer

log = logging.getLogger(__name__)

SLOT_DOMAIN = b"\x4e"   # prefixes every message the mint signs for a note slot
ADVERSARY = "adversary"


# ----------------------------------------------------------------------
# Parameters
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class NoteParams:
    zeta: int = 128
    xi: int = 16
    otm: OtmParams = field(default_factory=OtmParams)
    hash_name: str = DEFAULT_HASH

    def __post_init__(self):
        if not 0 < self.xi < self.zeta:
            raise InvalidParams(f"need 0 < xi < zeta (xi={self.xi}, zeta={self.zeta})")
        if self.kappa_len < 4 * self.hash_len:
            raise InvalidParams(f"pre-images of {self.kappa_len} bytes are too short for {self.hash_len}-byte digests")

    @property
    def kappa_len(self) -> int:
        return self.otm.secret_len

    @property
    def hash_len(self) -> int:
        return hashsig.digest_size(self.hash_name)

    @property
    def signatures_per_note(self) -> int:
        return 2 * self.zeta


# ----------------------------------------------------------------------
# Banknote
# ----------------------------------------------------------------------
class Banknote:
    """Classical record plus the live OTMs of the sealed indices."""

    def __init__(self, note_id: bytes, zeta: int, hashes: dict[tuple[int, int], bytes],
                 sigs: dict[tuple[int, int], MintSignature], unopened: set[int],
                 otms: dict[int, tuple[OtmToken, OtmPayload]], revealed: dict[int, tuple[int, bytes]]):
        self.note_id = note_id
        self.zeta = zeta
        self.hashes = hashes
        self.sigs = sigs
        self.unopened = unopened      # J
        self.otms = otms
        self.revealed = revealed      # K -> (b_k, kappa_k)

    @property
    def opened(self) -> set[int]:
        return set(self.revealed)

    def partition_ok(self) -> bool:
        return not (self.unopened & self.opened) and (self.unopened | self.opened) == set(range(self.zeta))

    def payload_handles(self) -> list:
        return [h for j in sorted(self.unopened) if j in self.otms for h in self.otms[j][1].handles]

    def __repr__(self):
        return f"Banknote({self.note_id.hex()[:12]}, |J|={len(self.unopened)}, |K|={len(self.revealed)})"


def compute_note_id(hashes: dict[tuple[int, int], bytes], algorithm: str = DEFAULT_HASH) -> bytes:
    return hash_bytes(b"".join(hashes[key] for key in sorted(hashes)), algorithm)


def slot_message(note_id: bytes, i: int, b: int, digest: bytes) -> bytes:
    return SLOT_DOMAIN + note_id + struct.pack(">IB", i, b) + digest


# ----------------------------------------------------------------------
# Wire format
# ----------------------------------------------------------------------
def encode_note(note: Banknote) -> bytes:
    """Canonical classical encoding; hardware blobs carry token + handle ids."""
    w = Writer().u8(FORMAT_VERSION).raw(note.note_id).u32(note.zeta)
    keys = [(i, b) for i in range(note.zeta) for b in (0, 1)]
    for key in keys:
        w.raw(note.hashes[key])
    for key in keys:
        w.blob(note.sigs[key].to_bytes())
    w.bitmap(note.unopened, note.zeta)
    w.u32(len(note.revealed))
    for k in sorted(note.revealed):
        b, kappa = note.revealed[k]
        w.u32(k).u8(b).raw(kappa)
    for j in sorted(note.unopened):
        w.blob(_hardware_blob(*note.otms[j]) if j in note.otms else b"")
    return w.getvalue()


def _hardware_blob(token: OtmToken, payload: OtmPayload) -> bytes:
    w = Writer().blob(token.to_blob()).u32(len(payload))
    for h in payload.handles:
        w.u64(h.id)
    return w.getvalue()


def decode_note(data: bytes, store: QubitStore | None = None, hash_len: int = 32,
                kappa_len: int = 128) -> Banknote:
    """Inverse of encode_note. Handle ids are re-bound through store; without
    a store every payload comes back dead."""
    r = Reader(data)
    r.version()
    note_id = r.raw(hash_len)
    zeta = r.u32()
    if zeta == 0 or zeta > 1 << 20:
        raise WireFormatError(f"implausible zeta {zeta}")
    keys = [(i, b) for i in range(zeta) for b in (0, 1)]
    hashes = {key: r.raw(hash_len) for key in keys}
    sigs = {}
    for key in keys:
        sigs[key] = MintSignature.from_bytes(r.blob(), hash_len)
    unopened = r.bitmap(zeta)
    revealed = {}
    last = -1
    for _ in range(r.u32()):
        k, b = r.u32(), r.u8()
        if k <= last or k >= zeta or b > 1:
            raise WireFormatError(f"bad revealed entry ({k}, {b})")
        revealed[k] = (b, r.raw(kappa_len))
        last = k
    otms = {}
    for j in sorted(unopened):
        hw = r.blob()
        if hw:
            otms[j] = _decode_hardware(hw, store)
    r.finish()
    return Banknote(note_id, zeta, hashes, sigs, unopened, otms, revealed)


def _decode_hardware(data: bytes, store: QubitStore | None) -> tuple[OtmToken, OtmPayload]:
    r = Reader(data)
    token = OtmToken.from_blob(r.blob())
    ids = [r.u64() for _ in range(r.u32())]
    r.finish()
    if store is None:
        handles = tuple(StateHandle(i, alive=False) for i in ids)
    else:
        handles = store.resolve_many(ids)
    return token, OtmPayload(handles)


def classical_copy(note: Banknote, store: QubitStore | None = None) -> Banknote:
    """Everything a bystander can copy: the classical record, handle ids included.

    Ids are re-bound through store, so the copy points at the same qubits
    without owning them; without a store every payload is dead.
    """
    otms = {}
    for j in sorted(note.unopened):
        if j not in note.otms:
            continue
        token, payload = note.otms[j]
        if store is None:
            handles = tuple(StateHandle(h.id, alive=False) for h in payload.handles)
        else:
            handles = store.resolve_many(h.id for h in payload.handles)
        otms[j] = (token, OtmPayload(handles))
    return Banknote(note.note_id, note.zeta, dict(note.hashes), dict(note.sigs), set(note.unopened),
                    otms, dict(note.revealed))


# ----------------------------------------------------------------------
# Minting
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SignedTable:
    """The classical half of a note: pre-images, their hashes and the mint's
    signatures. Attaching fresh OTMs to it yields a spendable note."""

    note_id: bytes
    zeta: int
    kappas: dict[tuple[int, int], bytes]
    hashes: dict[tuple[int, int], bytes]
    sigs: dict[tuple[int, int], MintSignature]
    mint_pk: bytes


def sign_table(params: NoteParams, mint_sk: MintKeypair, rng: np.random.Generator) -> SignedTable:
    if mint_sk.remaining < params.signatures_per_note:
        raise KeysExhausted(f"mint key has {mint_sk.remaining} signatures left, a note needs {params.signatures_per_note}")
    algo = params.hash_name
    kappas = {(i, b): rng.bytes(params.kappa_len) for i in range(params.zeta) for b in (0, 1)}
    hashes = {key: hash_bytes(kappa, algo) for key, kappa in kappas.items()}
    note_id = compute_note_id(hashes, algo)
    sigs = {(i, b): mint_sk.sign(slot_message(note_id, i, b, hashes[(i, b)])) for (i, b) in hashes}
    return SignedTable(note_id, params.zeta, kappas, hashes, sigs, mint_sk.public_key)


def attach_otms(store: QubitStore, params: NoteParams, table: SignedTable,
                rng: np.random.Generator | None = None, holder: str = MINT) -> Banknote:
    """Wrap every slot pair of table in a freshly prepared OTM held by holder."""
    rng = rng if rng is not None else store.rng
    kappas = table.kappas
    otms = {
        i: otm_create(store, kappas[(i, 0)], kappas[(i, 1)], params.otm, rng, holder=holder)
        for i in range(table.zeta)
    }
    return Banknote(table.note_id, table.zeta, dict(table.hashes), dict(table.sigs),
                    set(range(table.zeta)), otms, {})


def mint(store: QubitStore, params: NoteParams, mint_sk: MintKeypair,
         rng: np.random.Generator | None = None, holder: str = MINT) -> Banknote:
    rng = rng if rng is not None else store.rng
    note = attach_otms(store, params, sign_table(params, mint_sk, rng), rng, holder)
    log.info("minted note %s (zeta=%d) for %s", note.note_id.hex()[:12], params.zeta, holder)
    return note


def game_table(params: NoteParams, rng: np.random.Generator) -> SignedTable:
    """A throwaway mint key sized for one note, and that note's signed table."""
    keypair = hashsig.keygen(rng.bytes(32), hashsig.depth_for(params.signatures_per_note), params.hash_name)
    return sign_table(params, keypair, rng)


# ----------------------------------------------------------------------
# Verification
# ----------------------------------------------------------------------
class Verdict(Enum):
    PASS = "pass"
    FAIL_USED_UP = "fail-used-up"
    FAIL_BAD_SIGNATURE = "fail-bad-signature"
    FAIL_BAD_PREIMAGE = "fail-bad-preimage"
    FAIL_CHALLENGE = "fail-challenge"


@dataclass
class VerifyOutcome:
    verdict: Verdict
    opened: frozenset[int]
    updated_note: Banknote
    index: int | None = None      # failing index for FAIL_CHALLENGE / FAIL_BAD_PREIMAGE

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def __str__(self):
        if self.index is None:
            return self.verdict.value
        return f"{self.verdict.value}({self.index})"


def check_signature_table(note_id: bytes, zeta: int, hashes: dict, sigs: dict, mint_pk: bytes,
                          algorithm: str = DEFAULT_HASH) -> bool:
    """All 2*zeta slots present, note_id consistent, every mint signature valid."""
    expected = {(i, b) for i in range(zeta) for b in (0, 1)}
    if set(hashes) != expected or set(sigs) != expected:
        return False
    if compute_note_id(hashes, algorithm) != note_id:
        return False
    return all(
        hashsig.verify(mint_pk, slot_message(note_id, i, b, hashes[(i, b)]), sigs[(i, b)], algorithm)
        for (i, b) in sorted(expected)
    )


def check_signatures(note: Banknote, mint_pk: bytes, algorithm: str = DEFAULT_HASH) -> bool:
    return check_signature_table(note.note_id, note.zeta, note.hashes, note.sigs, mint_pk, algorithm)


def first_bad_preimage(note: Banknote, algorithm: str = DEFAULT_HASH) -> int | None:
    """Index of the first revealed pre-image that does not hash to its own slot."""
    for k in sorted(note.revealed):
        b, kappa = note.revealed[k]
        if (k, b) not in note.hashes or hash_bytes(kappa, algorithm) != note.hashes[(k, b)]:
            return k
    return None


def sample_challenges(unopened: set[int], xi: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform xi-subset L of J and one uniform challenge bit per member."""
    chosen = rng.choice(sorted(unopened), size=xi, replace=False)
    bits = rng.integers(0, 2, size=xi)
    return [(int(l), int(b)) for l, b in zip(chosen, bits)]


def open_otm(view: PartyView, note: Banknote, index: int, bit: int, algorithm: str = DEFAULT_HASH) -> bytes | None:
    """Measure OTM_index at bit and return the pre-image if it matches its hash."""
    if index not in note.otms:
        return None
    token, payload = note.otms[index]
    try:
        kappa = otm_retrieve(token, payload, bit, view)
    except (TokenReject, HandleNotHeld, MeasuredDeadHandle, LengthMismatch):
        return None
    if hash_bytes(kappa, algorithm) != note.hashes.get((index, bit)):
        return None
    return kappa


def standard_used_up(note: Banknote, xi: int) -> bool:
    return note.zeta - len(note.revealed) < xi


def verify_with_rule(view: PartyView, note: Banknote, xi: int, mint_pk: bytes, rng: np.random.Generator,
            used_up: Callable[[Banknote, int], bool], algorithm: str) -> VerifyOutcome:
    def outcome(verdict, index=None, opened=frozenset()):
        log.debug("verify %s by %s: %s", note.note_id.hex()[:12], view.name, verdict.value)
        return VerifyOutcome(verdict, opened, note, index)

    if not check_signatures(note, mint_pk, algorithm):
        return outcome(Verdict.FAIL_BAD_SIGNATURE)
    bad = first_bad_preimage(note, algorithm)
    if bad is not None:
        return outcome(Verdict.FAIL_BAD_PREIMAGE, bad)
    if not note.partition_ok():
        return outcome(Verdict.FAIL_BAD_PREIMAGE)
    if used_up(note, xi):
        return outcome(Verdict.FAIL_USED_UP)
    challenges = sample_challenges(note.unopened, xi, rng)
    revealed = {}
    for index, bit in challenges:
        kappa = open_otm(view, note, index, bit, algorithm)
        if kappa is None:
            return outcome(Verdict.FAIL_CHALLENGE, index)
        revealed[index] = (bit, kappa)
    for index, entry in revealed.items():
        note.unopened.discard(index)
        note.otms.pop(index, None)
        note.revealed[index] = entry
    return outcome(Verdict.PASS, opened=frozenset(revealed))


def verify(view: PartyView, note: Banknote, xi: int, mint_pk: bytes, rng: np.random.Generator,
           algorithm: str = DEFAULT_HASH) -> VerifyOutcome:
    """Cut-and-choose verification by the holder of the note's qubits."""
    return verify_with_rule(view, note, xi, mint_pk, rng, standard_used_up, algorithm)


# ----------------------------------------------------------------------
# Transfer
# ----------------------------------------------------------------------
def transfer(note: Banknote, from_party: PartyView, to_party: PartyView) -> Banknote:
    """Copy the classical record and hand over the sealed OTMs' qubits."""
    received = classical_copy(note, to_party.store)
    move_handles(from_party, to_party, note.payload_handles())
    log.info("note %s: %s -> %s", note.note_id.hex()[:12], from_party.name, to_party.name)
    return received


def deliver(note: Banknote, from_party: PartyView, to_party: PartyView) -> Banknote:
    """Like transfer, but moves only the qubits the sender still holds."""
    received = classical_copy(note, to_party.store)
    move_handles(from_party, to_party, [h for h in note.payload_handles() if from_party.holds(h)])
    return received


# ----------------------------------------------------------------------
# Mint and redemption
# ----------------------------------------------------------------------
class Mint:
    """Issuer: owns the signing key and the ledger of retired note ids."""

    def __init__(self, store: QubitStore, params: NoteParams, keypair: MintKeypair,
                 rng: np.random.Generator | None = None, ledger_path: Path | None = None):
        self.store = store
        self.view = store.view(MINT)
        self.params = params
        self.keypair = keypair
        self.rng = rng if rng is not None else store.rng
        self.ledger_path = ledger_path
        self.retired: set[bytes] = set()
        if ledger_path is not None:
            self.retired = {bytes.fromhex(x) for x in load_json(ledger_path, default=[])}

    @property
    def public_key(self) -> bytes:
        return self.keypair.public_key

    def issue(self, to: PartyView | None = None) -> Banknote:
        note = mint(self.store, self.params, self.keypair, self.rng, holder=MINT)
        if to is not None and to.name != MINT:
            note = transfer(note, self.view, to)
        return note

    def redeem(self, holder: PartyView, note: Banknote) -> Banknote:
        """Challenge every sealed OTM; on success retire the note and issue a fresh one."""
        algo = self.params.hash_name
        if note.note_id in self.retired:
            raise DoubleRedemption(f"note {note.note_id.hex()[:12]} was already redeemed")
        if not check_signatures(note, self.public_key, algo):
            raise RedemptionRejected("signature")
        bad = first_bad_preimage(note, algo)
        if bad is not None or not note.partition_ok():
            raise RedemptionRejected("preimage", f"index {bad}")
        try:
            received = transfer(note, holder, self.view)
        except (HandleNotHeld, MeasuredDeadHandle) as exc:
            raise RedemptionRejected("handles", str(exc)) from exc
        for j in sorted(received.unopened):
            bit = int(self.rng.integers(0, 2))
            if open_otm(self.view, received, j, bit, algo) is None:
                raise RedemptionRejected("challenge", f"index {j}")
        self.retired.add(note.note_id)
        self.save_ledger()
        log.info("redeemed note %s (%d sealed OTMs checked)", note.note_id.hex()[:12], len(received.unopened))
        return self.issue(holder)

    def save_ledger(self):
        if self.ledger_path is not None:
            save_json(sorted(x.hex() for x in self.retired), self.ledger_path)


def redeem(holder: PartyView, note: Banknote, mint_authority: Mint) -> Banknote:
    return mint_authority.redeem(holder, note)


# ----------------------------------------------------------------------
# Forgery game
# ----------------------------------------------------------------------
Duplicator = Callable[[PartyView, Banknote, np.random.Generator], tuple[Banknote, Banknote]]


def dual_pass_game(adversary: Duplicator, params: NoteParams, seed: int | np.random.SeedSequence,
                   noise_p: float = 0.05, table: SignedTable | None = None) -> tuple[VerifyOutcome, VerifyOutcome]:
    """One trial: the adversary gets one fresh note and returns two; each is
    delivered to its own verifier and checked independently.

    With table given, the trial reuses that signed table and only prepares
    fresh OTMs, qubits and challenges; otherwise it signs its own.
    """
    rng = make_rng(seed)
    store = QubitStore(rng=rng, noise_p=noise_p)
    if table is None:
        table = game_table(params, rng)
    note = attach_otms(store, params, table, rng, holder=ADVERSARY)
    adversary_view = store.view(ADVERSARY)
    first, second = adversary(adversary_view, note, rng)
    outcomes = []
    for name, forged in (("verifier-1", first), ("verifier-2", second)):
        verifier = store.view(name)
        try:
            received = deliver(forged, adversary_view, verifier)
        except (QMoneyError, KeyError) as exc:
            log.debug("delivery of forged note failed: %s", exc)
            received = forged
        outcomes.append(verify(verifier, received, params.xi, table.mint_pk, rng, params.hash_name))
    return outcomes[0], outcomes[1]


def forgery_game(adversary_strategy: Duplicator, params: NoteParams, seed: int | np.random.SeedSequence,
                 noise_p: float = 0.05, table: SignedTable | None = None) -> bool:
    first, second = dual_pass_game(adversary_strategy, params, seed, noise_p, table)
    return first.passed and second.passed
