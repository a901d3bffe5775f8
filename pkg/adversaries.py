#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Adversary suites for the security games.

Three families, each registered by name so Monte Carlo workers can look
them up after a process hop:
- OTM_STRATEGIES pick a measurement basis per payload qubit before the
  attacker asks the token for both secrets;
- DUPLICATORS turn one banknote into two;
- FORGERS try to sign the opposite bit with an already used QTDS token.
"""

from dataclasses import replace

import numpy as np

from banknote import Banknote, classical_copy
from otm import CHOICE_BASIS, OtmParams, OtmPayload, otm_create, token_check
from qsim import PartyView, QubitStore
from qtds import TokenSignature
from sim_core import HandleNotHeld, MeasuredDeadHandle, TokenReject, make_rng, random_bits


# ----------------------------------------------------------------------
# Per-qubit basis strategies
# ----------------------------------------------------------------------
def all_z(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.zeros(n, dtype=np.uint8)


def all_x(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.ones(n, dtype=np.uint8)


def random_basis(n: int, rng: np.random.Generator) -> np.ndarray:
    return random_bits(rng, n)


OTM_STRATEGIES = {
    "all-z": all_z,
    "all-x": all_x,
    "random-basis": random_basis,
}


def both_secrets_trial(strategy: str, params: OtmParams, seed, noise_p: float = 0.05) -> bool:
    """Measure a fresh payload with the strategy, then query the token for both secrets."""
    rng = make_rng(seed)
    store = QubitStore(rng=rng, noise_p=noise_p)
    s0, s1 = rng.bytes(params.secret_len), rng.bytes(params.secret_len)
    token, payload = otm_create(store, s0, s1, params, rng)
    outcomes = store.measure_many(payload.handles, OTM_STRATEGIES[strategy](params.n_otm, rng))
    try:
        return (token_check(token, 0, outcomes), token_check(token, 1, outcomes)) == (s0, s1)
    except TokenReject:
        return False


# ----------------------------------------------------------------------
# Banknote duplicators
# ----------------------------------------------------------------------
def identity(view: PartyView, note: Banknote, rng: np.random.Generator) -> tuple[Banknote, Banknote]:
    return note, note


def split_copies(view: PartyView, note: Banknote, rng: np.random.Generator) -> tuple[Banknote, Banknote]:
    """Two classical copies, the sealed OTMs dealt out half to each."""
    first, second = classical_copy(note, view.store), classical_copy(note, view.store)
    order = [int(j) for j in rng.permutation(sorted(note.unopened))]
    half = len(order) // 2
    for j in order[:half]:
        second.otms.pop(j, None)
    for j in order[half:]:
        first.otms.pop(j, None)
    return first, second


def _premeasured(strategy):
    def duplicate(view: PartyView, note: Banknote, rng: np.random.Generator) -> tuple[Banknote, Banknote]:
        """Measure every sealed OTM, then re-prepare the outcomes twice."""
        copies = classical_copy(note, view.store), classical_copy(note, view.store)
        for j in sorted(note.unopened):
            token, payload = note.otms[j]
            bases = strategy(len(payload), rng)
            outcomes = view.measure_many(payload.handles, bases)
            for copy in copies:
                copy.otms[j] = (token, OtmPayload(tuple(view.prepare_many(outcomes, bases))))
        return copies

    return duplicate


DUPLICATORS = {
    "identity": identity,
    "split-copies": split_copies,
    "premeasure-z": _premeasured(all_z),
    "premeasure-x": _premeasured(all_x),
    "premeasure-random": _premeasured(random_basis),
}


# ----------------------------------------------------------------------
# QTDS forgers
# ----------------------------------------------------------------------
class ReuseOpened:
    """Relabel the honest signature's opened values as the other bit."""

    def prepare(self, view, note, beta, rng):
        pass

    def forge(self, view, note, signed: TokenSignature, rng) -> TokenSignature:
        return replace(signed, beta=1 - signed.beta)


class RandomGuess(ReuseOpened):
    def forge(self, view, note, signed: TokenSignature, rng) -> TokenSignature:
        size = max((len(v) for v in signed.opened.values()), default=0)
        guesses = {i: rng.bytes(size) for i in signed.opened}
        return replace(signed, beta=1 - signed.beta, opened=guesses)


class WrongBasisPremeasure(ReuseOpened):
    """Measure each payload in random per-qubit bases, try to pull the other
    secret out of the token, and put re-prepared states back for signing."""

    def __init__(self):
        self.extracted: dict[int, bytes] = {}

    def prepare(self, view, note, beta, rng):
        self.extracted = {}
        for j in sorted(note.unopened):
            token, payload = note.otms[j]
            bases = random_basis(len(payload), rng)
            outcomes = view.measure_many(payload.handles, bases)
            try:
                self.extracted[j] = token_check(token, 1 - beta, outcomes)
            except TokenReject:
                pass
            note.otms[j] = (token, OtmPayload(tuple(view.prepare_many(outcomes, bases))))

    def forge(self, view, note, signed: TokenSignature, rng) -> TokenSignature:
        size = max((len(v) for v in signed.opened.values()), default=0)
        opened = {i: self.extracted.get(i, rng.bytes(size)) for i in signed.opened}
        return replace(signed, beta=1 - signed.beta, opened=opened)


class PadWithRevealed(ReuseOpened):
    """Open a minority of OTMs at the other bit first, keep just enough sealed
    to sign beta, then claim every index for 1 - beta."""

    def __init__(self):
        self.other: dict[int, bytes] = {}

    def prepare(self, view, note, beta, rng):
        self.other = {}
        keep = note.zeta // 2 + 2
        for j in sorted(note.unopened)[:max(0, len(note.unopened) - keep)]:
            token, payload = note.otms.pop(j)
            try:
                measured = view.measure_many(payload.handles, int(CHOICE_BASIS[1 - beta]))
                self.other[j] = token_check(token, 1 - beta, measured)
            except (TokenReject, HandleNotHeld, MeasuredDeadHandle):
                continue
            note.unopened.discard(j)
            note.revealed[j] = (1 - beta, self.other[j])

    def forge(self, view, note, signed: TokenSignature, rng) -> TokenSignature:
        opened = dict(signed.opened)
        opened.update(self.other)
        return replace(signed, beta=1 - signed.beta, unopened=frozenset(opened), opened=opened)


FORGERS = {
    "reuse-opened": ReuseOpened,
    "random-guess": RandomGuess,
    "wrong-basis-premeasure": WrongBasisPremeasure,
    "pad-with-revealed": PadWithRevealed,
}
