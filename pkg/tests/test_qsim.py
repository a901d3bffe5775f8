"""
Tests for the qubit store.

Tests:
    - Matching-basis measurement is deterministic without noise
    - Handles die on measurement; holders gate every access
    - Mismatched-basis and noise statistics
    - Pair encoding recovers the targeted bit 3/4 of the time
    - Storage growth and shared use from several threads
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from qsim import MINT, Basis, QubitStore, StateHandle, encode_pair, measure, move_handles, prepare, read_pair
from sim_core import HandleNotHeld, InvalidParams, MeasuredDeadHandle, make_rng

N = 100_000


def within_4_sigma(observed: float, p: float, n: int) -> bool:
    return abs(observed - p) <= 4 * np.sqrt(p * (1 - p) / n)


# =============================================================================
# Prepare / measure
# =============================================================================

@pytest.mark.parametrize("b", [0, 1])
@pytest.mark.parametrize("theta", [Basis.Z, Basis.X])
def test_matching_basis_returns_prepared_bit(store, b, theta):
    h = prepare(store, b, theta)
    assert measure(store, h, theta) == b


def test_measurement_consumes_handle(store):
    h = prepare(store, 0, Basis.Z)
    measure(store, h, Basis.Z)
    assert not h.alive
    with pytest.raises(MeasuredDeadHandle):
        measure(store, h, Basis.Z)
    assert store.live_count() == 0


def test_noise_out_of_range_rejected():
    with pytest.raises(InvalidParams):
        QubitStore(seed=0, noise_p=0.5)


def test_prepare_rejects_non_bits(store):
    with pytest.raises(InvalidParams):
        store.prepare_many([2], [0])


def test_resolve_unknown_id_is_dead(store):
    assert not store.resolve(999_999).alive


def test_same_seed_same_outcomes():
    def run(seed):
        s = QubitStore(seed=seed, noise_p=0.05)
        hs = s.prepare_many(np.zeros(64, dtype=np.uint8), np.ones(64, dtype=np.uint8))
        return s.measure_many(hs, Basis.Z)

    assert np.array_equal(run(5), run(5))
    assert not np.array_equal(run(5), run(6))


# =============================================================================
# Statistics
# =============================================================================

def test_plus_state_in_z_is_a_fair_coin():
    s = QubitStore(rng=make_rng(11), noise_p=0.0)
    handles = s.prepare_many(np.zeros(N, dtype=np.uint8), np.full(N, Basis.X, dtype=np.uint8))
    outcomes = s.measure_many(handles, Basis.Z)
    assert within_4_sigma(float(np.mean(outcomes == 0)), 0.5, N)


def test_noise_flips_matching_basis_outcomes():
    s = QubitStore(rng=make_rng(12), noise_p=0.1)
    handles = s.prepare_many(np.ones(N, dtype=np.uint8), np.zeros(N, dtype=np.uint8))
    outcomes = s.measure_many(handles, Basis.Z)
    assert abs(float(np.mean(outcomes == 1)) - 0.9) <= 0.01


def test_pair_encoding_recovers_three_quarters():
    s = QubitStore(rng=make_rng(13), noise_p=0.0)
    rng = make_rng(14)
    b, b_prime, theta, target = (rng.integers(0, 2, size=N) for _ in range(4))
    correct = 0
    for k in range(N):
        pair = encode_pair(s, int(b[k]), int(b_prime[k]), int(theta[k]))
        wanted = b[k] if target[k] == 0 else b_prime[k]
        correct += read_pair(s, pair, int(target[k])) == wanted
    assert abs(correct / N - 0.75) <= 0.01


def test_pair_encoding_order_follows_theta(store):
    z_first = encode_pair(store, 1, 0, Basis.Z)
    assert store.measure(z_first[0], Basis.Z) == 1
    assert store.measure(z_first[1], Basis.X) == 0
    x_first = encode_pair(store, 1, 0, Basis.X)
    assert store.measure(x_first[0], Basis.X) == 0
    assert store.measure(x_first[1], Basis.Z) == 1


# =============================================================================
# Holders
# =============================================================================

def test_only_holder_can_measure(store):
    alice, bob = store.view("alice"), store.view("bob")
    h = alice.prepare(1, Basis.X)
    with pytest.raises(HandleNotHeld):
        bob.measure(h, Basis.X)
    assert h.alive
    assert alice.measure(h, Basis.X) == 1


def test_move_transfers_holding(store):
    alice, bob = store.view("alice"), store.view("bob")
    handles = alice.prepare_many([0, 1, 1], [0, 0, 1])
    move_handles(alice, bob, handles)
    assert alice.held_count() == 0 and bob.held_count() == 3
    assert list(bob.measure_many(handles, [0, 0, 1])) == [0, 1, 1]


def test_failed_batch_consumes_nothing(store):
    alice = store.view("alice")
    mine = alice.prepare_many([0, 0], [0, 0])
    foreign = store.prepare(1, Basis.Z, holder=MINT)
    with pytest.raises(HandleNotHeld):
        alice.measure_many(mine + [foreign], Basis.Z)
    assert all(h.alive for h in mine) and foreign.alive
    with pytest.raises(MeasuredDeadHandle):
        alice.measure_many([mine[0], mine[0]], Basis.Z)
    assert mine[0].alive


def test_move_is_all_or_nothing(store):
    alice, bob = store.view("alice"), store.view("bob")
    mine = alice.prepare(0, Basis.Z)
    theirs = bob.prepare(0, Basis.Z)
    with pytest.raises(HandleNotHeld):
        move_handles(alice, bob, [mine, theirs])
    assert alice.holds(mine)


def test_views_of_different_stores_cannot_trade():
    a = QubitStore(seed=1).view("alice")
    b = QubitStore(seed=2).view("bob")
    h = a.prepare(0, Basis.Z)
    with pytest.raises(HandleNotHeld):
        move_handles(a, b, [h])


def test_reads_after_measurement(store):
    alice = store.view("alice")
    h = alice.prepare(1, Basis.Z)
    assert store.holder_of(h) == "alice" and alice.holds(h)
    alice.measure(h, Basis.Z)
    assert store.holder_of(h) is None
    assert not alice.holds(h)
    assert store.live_count() == 0 and alice.held_count() == 0


def test_foreign_ids_are_dead(store):
    store.prepare(0, Basis.Z)
    for bogus in (StateHandle(0), StateHandle(10_000), StateHandle(-3)):
        assert store.holder_of(bogus) is None
        with pytest.raises(MeasuredDeadHandle):
            store.measure(bogus, Basis.Z)
    assert store.live_count() == 1


# =============================================================================
# Storage
# =============================================================================

def test_store_grows_past_its_initial_capacity():
    store = QubitStore(seed=3, noise_p=0.0, capacity=2)
    bits = make_rng(4).integers(0, 2, size=5000)
    handles = store.prepare_many(bits, np.zeros(5000, dtype=np.uint8))
    assert [h.id for h in handles[:3]] == [1, 2, 3]
    assert store.live_count() == 5000
    assert np.array_equal(store.measure_many(handles, Basis.Z), bits)


def test_empty_batch_is_a_no_op(store):
    assert store.measure_many([], Basis.Z).size == 0
    assert store.view("alice").measure_many([], Basis.X).size == 0


def test_threads_share_one_store():
    store = QubitStore(seed=5, noise_p=0.0)

    def work(k: int) -> int:
        view = store.view(f"party-{k}")
        for _ in range(50):
            handles = view.prepare_many([1] * 20, [Basis.X] * 20)
            assert all(view.holds(h) for h in handles)
            assert view.measure_many(handles[:10], Basis.X).tolist() == [1] * 10
        return view.held_count()

    with ThreadPoolExecutor(max_workers=4) as pool:
        held = list(pool.map(work, range(8)))
    assert held == [500] * 8
    assert store.live_count() == sum(held)
