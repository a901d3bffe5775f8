#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Shared core module for the quantum money simulator.

Provides the error hierarchy, the ScenarioConfig record with its load-time
checks, seeded random streams, binomial summaries and the JSON file helpers
used by the harness, the TUI and the mint's retirement ledger.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from scipy.stats import binomtest

log = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Errors
# ----------------------------------------------------------------------
class QMoneyError(Exception):
    """Base class for every protocol and harness error."""


class MeasuredDeadHandle(QMoneyError):
    """A measured (or never issued) qubit handle was used again."""


class HandleNotHeld(QMoneyError):
    """A party tried to act on a qubit it does not hold."""


class SecretLengthMismatch(QMoneyError, ValueError):
    pass


class LengthMismatch(QMoneyError, ValueError):
    pass


class TokenReject(QMoneyError):
    """The stateless hardware refused a set of measurement outcomes."""


class AlreadyExecuted(QMoneyError):
    pass


class DepthOutOfRange(QMoneyError, ValueError):
    pass


class KeysExhausted(QMoneyError):
    pass


class InvalidParams(QMoneyError, ValueError):
    pass


class RedemptionRejected(QMoneyError):
    def __init__(self, check: str, detail: str = ""):
        self.check = check
        super().__init__(f"redemption rejected at {check}" + (f": {detail}" if detail else ""))


class DoubleRedemption(QMoneyError):
    pass


class MajorityViolated(QMoneyError):
    def __init__(self, index: int, detail: str = ""):
        self.index = index
        super().__init__(f"note {index}: {detail or 'fewer than a majority of OTMs unopened'}")


class TokenReused(QMoneyError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"note at position {index} already appears earlier in the list")


class WireFormatError(QMoneyError, ValueError):
    pass


class UnknownScenario(QMoneyError):
    pass


class InvalidConfig(QMoneyError, ValueError):
    pass


class ScenarioAssertionFailed(QMoneyError):
    def __init__(self, scenario: str, failed: list[str]):
        self.scenario = scenario
        self.failed = failed
        super().__init__(f"{scenario}: failed checks {', '.join(failed)}")


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------
NOISE_MARGIN = 0.05    # required gap between channel noise and delta
MAX_DEPTH = 20


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs of one harness run. Checked on construction."""

    scenario: str = "honest-chain"
    seed: int = 0
    zeta: int = 128
    xi: int = 16
    n_otm: int = 256
    delta: float = 0.2
    noise_p: float = 0.05
    kappa_len: int = 128
    hash_len: int = 32
    hash_name: str = "sha256"
    merkle_depth: int = 12
    expected_notes: int = 16
    trials: int = 1
    workers: int = 1

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise InvalidConfig("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not 0 < self.xi < self.zeta:
            out.append(f"need 0 < xi < zeta (xi={self.xi}, zeta={self.zeta})")
        if not 0 <= self.delta < 0.5:
            out.append(f"delta must lie in [0, 0.5), got {self.delta}")
        if not 0 <= self.noise_p < 0.5:
            out.append(f"noise_p must lie in [0, 0.5), got {self.noise_p}")
        elif self.noise_p + NOISE_MARGIN > self.delta:
            out.append(f"noise_p + {NOISE_MARGIN} must not exceed delta ({self.noise_p} vs {self.delta})")
        if self.n_otm < 8:
            out.append(f"n_otm must be at least 8, got {self.n_otm}")
        if self.kappa_len < 4 * self.hash_len:
            out.append(f"kappa_len must be at least 4*hash_len ({self.kappa_len} < {4 * self.hash_len})")
        if not 1 <= self.merkle_depth <= MAX_DEPTH:
            out.append(f"merkle_depth must lie in [1, {MAX_DEPTH}], got {self.merkle_depth}")
        elif 2 ** self.merkle_depth < 2 * self.zeta * self.expected_notes:
            out.append(
                f"2^{self.merkle_depth} signatures cannot cover {self.expected_notes} notes "
                f"of {2 * self.zeta} slots"
            )
        if self.trials < 1:
            out.append("trials must be positive")
        if self.workers < 1:
            out.append("workers must be positive")
        try:
            size = hashlib.new(self.hash_name).digest_size
        except (ValueError, TypeError):
            out.append(f"unknown hash algorithm {self.hash_name!r}")
        else:
            if size != self.hash_len:
                out.append(f"{self.hash_name} yields {size}-byte digests, hash_len is {self.hash_len}")
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def with_overrides(self, **overrides) -> "ScenarioConfig":
        """Return a copy with the non-None overrides applied (re-validated)."""
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)


def load_config(file_path: Path) -> dict:
    """Read a partial config (a JSON object of ScenarioConfig fields)."""
    if not file_path.exists():
        raise InvalidConfig(f"config file not found: {file_path}")
    with file_path.open() as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{file_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfig(f"{file_path}: expected a JSON object")
    return data


# ----------------------------------------------------------------------
# Randomness
# ----------------------------------------------------------------------
def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.default_rng(seed)


def substreams(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child seeds, one per trial, stable in trial order."""
    return np.random.SeedSequence(seed).spawn(count)


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


# ----------------------------------------------------------------------
# Binomial summaries
# ----------------------------------------------------------------------
CONFIDENCE = 0.9999


def frequency(successes: int, trials: int, confidence: float = CONFIDENCE) -> dict:
    """Empirical frequency with a Wilson confidence interval."""
    if trials <= 0:
        return {"successes": 0, "trials": 0, "frequency": 0.0, "low": 0.0, "high": 1.0, "radius": 0.5}
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    p = successes / trials
    return {
        "successes": int(successes),
        "trials": int(trials),
        "frequency": round(p, 6),
        "low": round(float(ci.low), 6),
        "high": round(float(ci.high), 6),
        "radius": round(max(p - float(ci.low), float(ci.high) - p), 6),
    }


def agrees_with(successes: int, trials: int, p: float, confidence: float = CONFIDENCE) -> bool:
    """True unless an exact two-sided binomial test rejects rate p at the
    given confidence. Works where a Wilson interval is too coarse, such as
    p a few parts per million away from 1."""
    if trials <= 0:
        return True
    return bool(binomtest(int(successes), int(trials), min(max(p, 0.0), 1.0)).pvalue >= 1.0 - confidence)


# ----------------------------------------------------------------------
# File I/O helpers
# ----------------------------------------------------------------------
def _jsonable(value):
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def dumps_report(report: dict) -> str:
    """Diff-stable rendering: sorted keys, lowercase hex for bytes."""
    return json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"


def save_json(data, file_path: Path):
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w") as f:
        f.write(dumps_report(data))
    log.debug("wrote %s", file_path)


def load_json(file_path: Path, default=None):
    if not file_path.exists():
        return default
    with file_path.open() as f:
        return json.load(f)


# ----------------------------------------------------------------------
# Logging
# ----------------------------------------------------------------------
def configure_logging(verbose: int = 0):
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
