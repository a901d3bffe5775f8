#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Hash-based signatures for the mint.

Lamport one-time signatures over the same collision-resistant hash the
banknotes use, with 2^d one-time keys certified by a Merkle tree whose root
is the mint's public key. Leaf secrets are expanded from the keypair seed,
so only the tree of leaf digests is kept in memory.
"""

import hashlib
import logging
import struct
import threading
from dataclasses import dataclass
from functools import cached_property, lru_cache

from sim_core import DepthOutOfRange, KeysExhausted, MAX_DEPTH, WireFormatError

log = logging.getLogger(__name__)

DEFAULT_HASH = "sha256"
LEAF_TAG = b"\x00"
NODE_TAG = b"\x01"

# Above this depth eager keygen hashes millions of leaves.
PRACTICAL_DEPTH = 16


# ----------------------------------------------------------------------
# Hashing
# ----------------------------------------------------------------------
def hash_bytes(data: bytes, algorithm: str = DEFAULT_HASH) -> bytes:
    return hashlib.new(algorithm, data).digest()


def digest_size(algorithm: str = DEFAULT_HASH) -> int:
    return hashlib.new(algorithm).digest_size


def _message_bits(digest: bytes) -> list[int]:
    return [(byte >> (7 - k)) & 1 for byte in digest for k in range(8)]


def _expand_leaf_secrets(seed: bytes, index: int, count: int, size: int) -> list[bytes]:
    """count secret strings of size bytes for one leaf, from a single XOF call."""
    stream = hashlib.shake_256(b"lamport-leaf" + seed + struct.pack(">I", index)).digest(count * size)
    return [stream[k * size:(k + 1) * size] for k in range(count)]


def _leaf_digest(vk: list[bytes], algorithm: str) -> bytes:
    return hash_bytes(LEAF_TAG + b"".join(vk), algorithm)


def _node_digest(left: bytes, right: bytes, algorithm: str) -> bytes:
    return hash_bytes(NODE_TAG + left + right, algorithm)


# ----------------------------------------------------------------------
# Signatures
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class MintSignature:
    index: int
    ots_reveals: tuple[bytes, ...]    # sk half selected by each digest bit
    complement: tuple[bytes, ...]     # vk of the half that was not revealed
    auth_path: tuple[bytes, ...]      # sibling digests, leaf level first

    @property
    def depth(self) -> int:
        return len(self.auth_path)

    def to_bytes(self) -> bytes:
        return self._blob

    @cached_property
    def _blob(self) -> bytes:
        return (
            struct.pack(">IB", self.index, self.depth)
            + b"".join(self.ots_reveals)
            + b"".join(self.complement)
            + b"".join(self.auth_path)
        )

    @classmethod
    def from_bytes(cls, blob: bytes, hash_len: int) -> "MintSignature":
        if len(blob) < 5:
            raise WireFormatError("signature shorter than its header")
        index, depth = struct.unpack_from(">IB", blob)
        n_bits = 8 * hash_len
        expected = 5 + (2 * n_bits + depth) * hash_len
        if len(blob) != expected:
            raise WireFormatError(f"signature is {len(blob)} bytes, expected {expected}")
        chunks = [blob[5 + k * hash_len:5 + (k + 1) * hash_len] for k in range(2 * n_bits + depth)]
        return cls(
            index=index,
            ots_reveals=tuple(chunks[:n_bits]),
            complement=tuple(chunks[n_bits:2 * n_bits]),
            auth_path=tuple(chunks[2 * n_bits:]),
        )


class MintKeypair:
    """2^depth Lamport keys under one Merkle root.

    The whole tree is built up front, so keygen cost grows as 2^depth
    leaves of 512 hashes each; depths past PRACTICAL_DEPTH take minutes
    and log a warning. sign() consumes leaves in order and is serialised
    by a lock.
    """

    def __init__(self, seed: bytes, depth: int, algorithm: str = DEFAULT_HASH):
        if not 1 <= depth <= MAX_DEPTH:
            raise DepthOutOfRange(f"depth must lie in [1, {MAX_DEPTH}], got {depth}")
        if depth > PRACTICAL_DEPTH:
            log.warning("keygen at depth %d builds %d leaves; expect a long wait", depth, 2 ** depth)
        self.seed = seed
        self.depth = depth
        self.algorithm = algorithm
        self.hash_len = digest_size(algorithm)
        self.next_index = 0
        self._lock = threading.Lock()
        leaves = [_leaf_digest(self._leaf_keys(i)[1], algorithm) for i in range(2 ** depth)]
        self._levels = [leaves]
        while len(self._levels[-1]) > 1:
            below = self._levels[-1]
            self._levels.append([
                _node_digest(below[k], below[k + 1], algorithm) for k in range(0, len(below), 2)
            ])
        self.public_key: bytes = self._levels[-1][0]
        log.debug("keygen depth=%d pk=%s", depth, self.public_key.hex()[:16])

    @property
    def capacity(self) -> int:
        return 2 ** self.depth

    @property
    def remaining(self) -> int:
        return self.capacity - self.next_index

    def _leaf_keys(self, index: int) -> tuple[list[bytes], list[bytes]]:
        """(sk, vk) for one leaf: position 2k is bit k = 0, 2k + 1 is bit k = 1."""
        n_bits = 8 * self.hash_len
        sk = _expand_leaf_secrets(self.seed, index, 2 * n_bits, self.hash_len)
        vk = [hash_bytes(s, self.algorithm) for s in sk]
        return sk, vk

    def _auth_path(self, index: int) -> tuple[bytes, ...]:
        path = []
        for level in self._levels[:-1]:
            path.append(level[index ^ 1])
            index >>= 1
        return tuple(path)

    def sign(self, msg: bytes) -> MintSignature:
        with self._lock:
            if self.next_index >= self.capacity:
                raise KeysExhausted(f"all {self.capacity} one-time keys are used")
            index = self.next_index
            self.next_index += 1
        sk, vk = self._leaf_keys(index)
        reveals, complement = [], []
        for k, bit in enumerate(_message_bits(hash_bytes(msg, self.algorithm))):
            reveals.append(sk[2 * k + bit])
            complement.append(vk[2 * k + 1 - bit])
        return MintSignature(index, tuple(reveals), tuple(complement), self._auth_path(index))


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------
def keygen(seed: bytes | int, depth: int, algorithm: str = DEFAULT_HASH) -> MintKeypair:
    if isinstance(seed, int):
        seed = seed.to_bytes(32, "big", signed=False)
    return MintKeypair(seed, depth, algorithm)


def sign(sk: MintKeypair, msg: bytes) -> MintSignature:
    return sk.sign(msg)


def depth_for(n_signatures: int) -> int:
    """Smallest tree depth whose capacity covers n_signatures."""
    return max(1, (max(n_signatures, 1) - 1).bit_length())


def verify(pk: bytes, msg: bytes, sig: MintSignature, algorithm: str = DEFAULT_HASH) -> bool:
    try:
        return _verify_cached(pk, msg, sig.to_bytes(), digest_size(algorithm), algorithm)
    except (AttributeError, TypeError, ValueError, struct.error):
        return False


@lru_cache(maxsize=1024)
def _verify_cached(pk: bytes, msg: bytes, sig_blob: bytes, hash_len: int, algorithm: str) -> bool:
    try:
        sig = MintSignature.from_bytes(sig_blob, hash_len)
    except WireFormatError:
        return False
    if not 1 <= sig.depth <= MAX_DEPTH or sig.index >= 2 ** sig.depth:
        return False
    vk = []
    for k, bit in enumerate(_message_bits(hash_bytes(msg, algorithm))):
        revealed = hash_bytes(sig.ots_reveals[k], algorithm)
        pair = (revealed, sig.complement[k]) if bit == 0 else (sig.complement[k], revealed)
        vk.extend(pair)
    node = _leaf_digest(vk, algorithm)
    index = sig.index
    for sibling in sig.auth_path:
        node = _node_digest(node, sibling, algorithm) if index % 2 == 0 else _node_digest(sibling, node, algorithm)
        index >>= 1
    return node == pk
