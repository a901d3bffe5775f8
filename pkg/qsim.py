#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Single-qubit simulator restricted to the Z and X bases.

A qubit prepared as |b>_theta is stored as the classical pair (b, theta)
inside the QubitStore; protocol code only ever sees an opaque StateHandle.
Measuring in theta returns b, measuring in the other basis returns a fair
coin, and every outcome is then flipped with probability noise_p. A handle
dies on measurement, and each live handle belongs to exactly one party,
which is how the store enforces no-cloning.
"""

import logging
import threading
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from sim_core import HandleNotHeld, InvalidParams, MeasuredDeadHandle, make_rng

log = logging.getLogger(__name__)

MINT = "mint"
DEFAULT_NOISE_P = 0.05
NO_HOLDER = -1


class Basis(IntEnum):
    Z = 0
    X = 1


class StateHandle:
    """Opaque reference to one simulated qubit."""

    __slots__ = ("id", "_alive")

    def __init__(self, handle_id: int, alive: bool = True):
        self.id = handle_id
        self._alive = alive

    @property
    def alive(self) -> bool:
        return self._alive

    def __repr__(self):
        return f"StateHandle({self.id}, {'alive' if self._alive else 'dead'})"


# ----------------------------------------------------------------------
# Store
# ----------------------------------------------------------------------
class QubitStore:
    """Registry of live qubits, their holders, and the store's random source.

    Qubits live in flat numpy columns indexed by handle id; id 0 is never
    issued. All public operations take the store lock, so one store can be
    shared between threads; distinct stores are fully independent.
    """

    def __init__(self, seed: int | np.random.SeedSequence | None = None, noise_p: float = DEFAULT_NOISE_P,
                 rng: np.random.Generator | None = None, capacity: int = 1024):
        if not 0 <= noise_p < 0.5:
            raise InvalidParams(f"noise_p must lie in [0, 0.5), got {noise_p}")
        self.noise_p = noise_p
        self.rng = rng if rng is not None else make_rng(seed)
        capacity = max(2, capacity)
        self._bits = np.zeros(capacity, dtype=np.uint8)
        self._bases = np.zeros(capacity, dtype=np.uint8)
        self._live = np.zeros(capacity, dtype=bool)
        self._holder = np.full(capacity, NO_HOLDER, dtype=np.int32)
        self._next_id = 1
        self._n_live = 0
        self._parties: dict[str, int] = {}
        self._party_names: list[str] = []
        self._handles: dict[int, StateHandle] = {}
        self._lock = threading.RLock()

    def view(self, party: str) -> "PartyView":
        return PartyView(self, party)

    def live_count(self) -> int:
        with self._lock:
            return self._n_live

    def held_by(self, party: str) -> int:
        with self._lock:
            code = self._parties.get(party)
            if code is None:
                return 0
            return int(np.count_nonzero(self._holder[:self._next_id] == code))

    def holder_of(self, h: StateHandle) -> str | None:
        with self._lock:
            if not self._is_live(h):
                return None
            return self._party_names[self._holder[h.id]]

    def resolve(self, handle_id: int) -> StateHandle:
        """Look a handle up by id; unknown or measured ids come back dead."""
        with self._lock:
            h = self._handles.get(handle_id)
            return h if h is not None else StateHandle(handle_id, alive=False)

    def resolve_many(self, handle_ids: Iterable[int]) -> tuple[StateHandle, ...]:
        with self._lock:
            get = self._handles.get
            return tuple(get(i) or StateHandle(i, alive=False) for i in handle_ids)

    # -- preparation ---------------------------------------------------
    def prepare(self, b: int, theta: Basis | int, holder: str = MINT) -> StateHandle:
        return self.prepare_many([b], [theta], holder)[0]

    def prepare_many(self, bits: Sequence[int], bases: Sequence[int], holder: str = MINT) -> list[StateHandle]:
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        bases = np.asarray(bases, dtype=np.uint8).ravel()
        if bits.shape != bases.shape:
            raise InvalidParams("bits and bases must have the same length")
        if np.any(bits > 1) or np.any(bases > 1):
            raise InvalidParams("bits and bases must be 0 or 1")
        n = bits.size
        with self._lock:
            first = self._next_id
            self._reserve(first + n)
            ids = slice(first, first + n)
            self._bits[ids] = bits
            self._bases[ids] = bases
            self._live[ids] = True
            self._holder[ids] = self._code(holder)
            self._next_id += n
            self._n_live += n
            out = [StateHandle(i) for i in range(first, first + n)]
            self._handles.update((h.id, h) for h in out)
        return out

    # -- measurement ---------------------------------------------------
    def measure(self, h: StateHandle, basis: Basis | int, party: str | None = None) -> int:
        return int(self.measure_many([h], [basis], party)[0])

    def measure_many(self, handles: Sequence[StateHandle], bases: Sequence[int] | int,
                     party: str | None = None) -> np.ndarray:
        """Destructively measure handles; returns a uint8 outcome array.

        When party is given, every handle must be held by it. Nothing is
        consumed if any handle fails the checks.
        """
        handles = list(handles)
        n = len(handles)
        bases = np.broadcast_to(np.asarray(bases, dtype=np.uint8), (n,))
        with self._lock:
            ids = self._checked_ids(handles, party)
            if np.unique(ids).size != n:
                raise MeasuredDeadHandle("the same handle appears twice in one measurement")
            stored_bits = self._bits[ids]
            stored_bases = self._bases[ids]
            coins = self.rng.integers(0, 2, size=n, dtype=np.uint8)
            flips = (self.rng.random(n) < self.noise_p).astype(np.uint8)
            self._live[ids] = False
            self._holder[ids] = NO_HOLDER
            self._n_live -= n
            for h in handles:
                self._handles.pop(h.id, None)
                h._alive = False
        raw = np.where(stored_bases == bases, stored_bits, coins)
        return (raw ^ flips).astype(np.uint8)

    # -- holder bookkeeping --------------------------------------------
    def move(self, src: str, dst: str, handles: Iterable[StateHandle]):
        handles = list(handles)
        with self._lock:
            ids = self._checked_ids(handles, src)
            self._holder[ids] = self._code(dst)
        if handles:
            log.debug("moved %d qubits %s -> %s", len(handles), src, dst)

    def holds(self, party: str, h: StateHandle) -> bool:
        with self._lock:
            code = self._parties.get(party)
            return code is not None and self._is_live(h) and bool(self._holder[h.id] == code)

    # -- internals -----------------------------------------------------
    def _code(self, party: str) -> int:
        code = self._parties.get(party)
        if code is None:
            code = self._parties[party] = len(self._party_names)
            self._party_names.append(party)
        return code

    def _reserve(self, size: int):
        capacity = self._live.size
        if size <= capacity:
            return
        while capacity < size:
            capacity *= 2
        grow = capacity - self._live.size
        self._bits = np.concatenate([self._bits, np.zeros(grow, dtype=np.uint8)])
        self._bases = np.concatenate([self._bases, np.zeros(grow, dtype=np.uint8)])
        self._live = np.concatenate([self._live, np.zeros(grow, dtype=bool)])
        self._holder = np.concatenate([self._holder, np.full(grow, NO_HOLDER, dtype=np.int32)])

    def _is_live(self, h: StateHandle) -> bool:
        return h.alive and 0 < h.id < self._next_id and bool(self._live[h.id])

    def _checked_ids(self, handles: Sequence[StateHandle], party: str | None) -> np.ndarray:
        n = len(handles)
        ids = np.fromiter((h.id for h in handles), dtype=np.int64, count=n)
        if n == 0:
            return ids
        alive = np.fromiter((h.alive for h in handles), dtype=bool, count=n)
        in_range = (ids > 0) & (ids < self._next_id)
        safe = np.where(in_range, ids, 0)
        usable = alive & in_range & self._live[safe]
        if not usable.all():
            raise MeasuredDeadHandle(f"handle {int(ids[np.argmin(usable)])} was already measured")
        if party is not None:
            held = self._holder[ids] == self._parties.get(party, NO_HOLDER)
            if party not in self._parties or not held.all():
                bad = ids[0] if party not in self._parties else ids[np.argmin(held)]
                raise HandleNotHeld(f"{party} does not hold handle {int(bad)}")
        return ids


class PartyView:
    """One party's window onto a store: it can only touch what it holds."""

    def __init__(self, store: QubitStore, name: str):
        self.store = store
        self.name = name

    def prepare(self, b: int, theta: Basis | int) -> StateHandle:
        return self.store.prepare(b, theta, holder=self.name)

    def prepare_many(self, bits, bases) -> list[StateHandle]:
        return self.store.prepare_many(bits, bases, holder=self.name)

    def measure(self, h: StateHandle, basis: Basis | int) -> int:
        return self.store.measure(h, basis, party=self.name)

    def measure_many(self, handles, bases) -> np.ndarray:
        return self.store.measure_many(handles, bases, party=self.name)

    def holds(self, h: StateHandle) -> bool:
        return self.store.holds(self.name, h)

    def held_count(self) -> int:
        return self.store.held_by(self.name)

    def __repr__(self):
        return f"PartyView({self.name!r})"


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------
def prepare(store: QubitStore, b: int, theta: Basis | int) -> StateHandle:
    return store.prepare(b, theta)


def measure(store: QubitStore, h: StateHandle, basis: Basis | int) -> int:
    return store.measure(h, basis)


def encode_pair(store: QubitStore, b: int, b_prime: int, theta: Basis | int,
                holder: str = MINT) -> tuple[StateHandle, StateHandle]:
    """Pair encoding: (|b>_Z, |b'>_X), order swapped when theta = 1."""
    z_half, x_half = store.prepare_many([b, b_prime], [Basis.Z, Basis.X], holder)
    if theta == Basis.Z:
        return z_half, x_half
    return x_half, z_half


def read_pair(store: QubitStore, pair: tuple[StateHandle, StateHandle], target: int,
              party: str | None = None) -> int:
    """Receiver that does not know theta and assumes it is 0.

    target 0 measures both qubits in Z and reads position 0; target 1
    measures both in X and reads position 1. Each is right 3/4 of the time.
    """
    outcomes = store.measure_many(list(pair), int(target), party)
    return int(outcomes[0] if target == 0 else outcomes[1])


def move_handles(src: PartyView, dst: PartyView, handles: Iterable[StateHandle]):
    """Hand qubits to another party; all-or-nothing."""
    if src.store is not dst.store:
        raise HandleNotHeld("parties live in different stores")
    src.store.move(src.name, dst.name, handles)
