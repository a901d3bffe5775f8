#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Conjugate-coding one-time memories.

An OTM is a qubit payload |b_i>_{theta_i} together with a stateless
hardware token that knows (b, theta, s0, s1, delta). Measuring the whole
payload in basis c and handing the outcomes to the token yields s_c,
provided the positions encoded in basis c match b up to a delta fraction.
The token never keeps state; the one-shot property comes entirely from
measurement collapse.
"""

import logging
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from qsim import MINT, Basis, PartyView, QubitStore, StateHandle
from sim_core import (
    AlreadyExecuted,
    InvalidParams,
    LengthMismatch,
    SecretLengthMismatch,
    TokenReject,
    WireFormatError,
    random_bits,
)

log = logging.getLogger(__name__)

DEFAULT_N_OTM = 256
DEFAULT_DELTA = 0.2

# choice bit c reads the positions encoded in basis c
CHOICE_BASIS = {0: Basis.Z, 1: Basis.X}


@dataclass(frozen=True)
class OtmParams:
    n_otm: int = DEFAULT_N_OTM
    delta: float = DEFAULT_DELTA
    secret_len: int = 128          # bytes

    def __post_init__(self):
        if self.n_otm < 8:
            raise InvalidParams(f"n_otm must be at least 8, got {self.n_otm}")
        if not 0 <= self.delta < 0.5:
            raise InvalidParams(f"delta must lie in [0, 0.5), got {self.delta}")
        if self.secret_len < 1:
            raise InvalidParams("secret_len must be positive")


# ----------------------------------------------------------------------
# Token and payload
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class OtmToken:
    """The simulated secure hardware. Immutable; token_check is pure."""

    b: np.ndarray
    theta: np.ndarray
    s0: bytes
    s1: bytes
    delta: float

    def __post_init__(self):
        self.b.setflags(write=False)
        self.theta.setflags(write=False)

    @property
    def n_otm(self) -> int:
        return len(self.b)

    def __eq__(self, other):
        if not isinstance(other, OtmToken):
            return NotImplemented
        return self.to_blob() == other.to_blob()

    __hash__ = None

    _HEADER = struct.Struct(">IdI")

    def to_blob(self) -> bytes:
        """Opaque hardware encoding: n, delta, secret length, packed b and theta, s0, s1."""
        return (
            self._HEADER.pack(self.n_otm, self.delta, len(self.s0))
            + np.packbits(self.b).tobytes()
            + np.packbits(self.theta).tobytes()
            + self.s0
            + self.s1
        )

    @classmethod
    def from_blob(cls, blob: bytes) -> "OtmToken":
        try:
            n, delta, slen = cls._HEADER.unpack_from(blob)
        except struct.error as exc:
            raise WireFormatError(f"truncated token header: {exc}") from exc
        packed = (n + 7) // 8
        expected = cls._HEADER.size + 2 * packed + 2 * slen
        if len(blob) != expected:
            raise WireFormatError(f"token blob is {len(blob)} bytes, expected {expected}")
        pos = cls._HEADER.size
        raw = np.frombuffer(blob, dtype=np.uint8)
        b = np.unpackbits(raw[pos:pos + packed])[:n].copy()
        theta = np.unpackbits(raw[pos + packed:pos + 2 * packed])[:n].copy()
        pos += 2 * packed
        s0 = bytes(blob[pos:pos + slen])
        s1 = bytes(blob[pos + slen:pos + 2 * slen])
        return cls(b=b, theta=theta, s0=s0, s1=s1, delta=delta)


@dataclass(frozen=True)
class OtmPayload:
    handles: tuple[StateHandle, ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.handles)

    @property
    def alive(self) -> bool:
        return all(h.alive for h in self.handles)


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------
def otm_create(store: QubitStore, s0: bytes, s1: bytes, params: OtmParams,
               rng: np.random.Generator | None = None, holder: str = MINT) -> tuple[OtmToken, OtmPayload]:
    if len(s0) != params.secret_len or len(s1) != params.secret_len:
        raise SecretLengthMismatch(
            f"secrets must be {params.secret_len} bytes, got {len(s0)} and {len(s1)}"
        )
    rng = rng if rng is not None else store.rng
    b = random_bits(rng, params.n_otm)
    theta = random_bits(rng, params.n_otm)
    handles = store.prepare_many(b, theta, holder=holder)
    token = OtmToken(b=b, theta=theta, s0=bytes(s0), s1=bytes(s1), delta=params.delta)
    return token, OtmPayload(tuple(handles))


def mismatch_fraction(token: OtmToken, c: int, outcomes) -> float:
    """Fraction of positions encoded in basis c whose outcome differs from b."""
    outcomes = np.asarray(outcomes, dtype=np.uint8)
    if outcomes.shape != (token.n_otm,):
        raise LengthMismatch(f"expected {token.n_otm} outcomes, got {outcomes.shape[0] if outcomes.ndim else 0}")
    checked = token.theta == CHOICE_BASIS[c]
    count = int(checked.sum())
    if count == 0:
        return 1.0
    return float(np.count_nonzero(outcomes[checked] != token.b[checked])) / count


def token_check(token: OtmToken, c: int, outcomes) -> bytes:
    if c not in (0, 1):
        raise TokenReject(f"choice bit must be 0 or 1, got {c}")
    if mismatch_fraction(token, c, outcomes) > token.delta:
        raise TokenReject(f"too many mismatches for choice {c}")
    return token.s1 if c else token.s0


def otm_retrieve(token: OtmToken, payload: OtmPayload, c: int, store: QubitStore | PartyView) -> bytes:
    """Honest receiver: measure every qubit in basis c, ask the token for s_c."""
    if len(payload) != token.n_otm:
        raise LengthMismatch(f"payload has {len(payload)} qubits, token expects {token.n_otm}")
    outcomes = store.measure_many(payload.handles, int(CHOICE_BASIS[c]))
    return token_check(token, c, outcomes)


def honest_success_probability(n_otm: int, delta: float, noise_p: float) -> float:
    """Probability that an honest retrieval passes token_check.

    |C| ~ Binomial(n, 1/2) and the mismatches within C ~ Binomial(|C|, noise_p);
    an empty C is a rejection.
    """
    sizes = np.arange(1, n_otm + 1)
    allowed = np.floor(delta * sizes + 1e-9)
    weights = binom.pmf(sizes, n_otm, 0.5)
    return float(np.sum(weights * binom.cdf(allowed, sizes, noise_p)))


# ----------------------------------------------------------------------
# Ideal functionality
# ----------------------------------------------------------------------
class IdealOtm:
    """Reference behaviour: hand out one chosen secret, then forget both."""

    def __init__(self, s0: bytes, s1: bytes):
        self._secrets: tuple[bytes, bytes] | None = (s0, s1)

    @property
    def executed(self) -> bool:
        return self._secrets is None

    def execute(self, choice: int) -> bytes:
        if self._secrets is None:
            raise AlreadyExecuted("this OTM instance was already used")
        secret = self._secrets[choice]
        self._secrets = None
        return secret


def ideal_execute(f: IdealOtm, choice: int) -> bytes:
    return f.execute(choice)
