"""Shared fixtures: small, noise-free parameters so protocol tests are exact."""
import pytest

import hashsig
from banknote import Mint, NoteParams
from otm import OtmParams
from qsim import QubitStore
from sim_core import make_rng

SMALL_OTM = OtmParams(n_otm=64, delta=0.2, secret_len=128)
SMALL_NOTE = NoteParams(zeta=8, xi=2, otm=SMALL_OTM)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def store(rng):
    return QubitStore(rng=rng, noise_p=0.0)


@pytest.fixture
def params():
    return SMALL_NOTE


@pytest.fixture
def keypair():
    # 64 one-time keys: four notes of zeta = 8
    return hashsig.keygen(b"\x01" * 32, depth=6)


@pytest.fixture
def issuer(store, params, keypair, rng):
    return Mint(store, params, keypair, rng)
