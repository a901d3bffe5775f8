#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Scenario registry for the harness.

Each scenario is a scripted multi-party run or a Monte Carlo game. A
scenario returns metrics plus named boolean checks; run_scenario wraps that
into a report. Everything random derives from config.seed, trial t always
gets substream t, and results are reduced in trial order, so a rerun with
the same config yields the same report apart from elapsed_seconds.
"""

import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

import hashsig
from adversaries import DUPLICATORS, FORGERS, OTM_STRATEGIES, both_secrets_trial
from banknote import (
    Mint,
    NoteParams,
    SignedTable,
    Verdict,
    classical_copy,
    deliver,
    dual_pass_game,
    game_table,
    mint,
    transfer,
    verify,
)
from otm import OtmParams, honest_success_probability, otm_create, otm_retrieve
from qsim import Basis, QubitStore, encode_pair, read_pair
from qtds import (
    commitment_bits,
    commitment_game,
    decode_signature,
    encode_signature,
    qtds_verify_note,
    sign_bit,
    sign_message,
    verify_sig,
)
from sim_core import (
    QMoneyError,
    ScenarioAssertionFailed,
    ScenarioConfig,
    UnknownScenario,
    agrees_with,
    frequency,
    make_rng,
    random_bits,
    substreams,
)

log = logging.getLogger(__name__)

PARTIES = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi"]
TABLE_STREAM = 1   # seed-sequence suffix for the shared signed table


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    run: Callable[[ScenarioConfig], dict]
    defaults: dict = field(default_factory=dict)


def note_params(cfg: ScenarioConfig) -> NoteParams:
    return NoteParams(cfg.zeta, cfg.xi, OtmParams(cfg.n_otm, cfg.delta, cfg.kappa_len), cfg.hash_name)


def run_trials(fn: Callable, args: list[tuple], workers: int = 1) -> list:
    """Apply fn to each argument tuple, in order; optionally on a process pool."""
    if workers <= 1 or len(args) < 2:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args), chunksize=max(1, len(args) // (4 * workers))))


def _scenario_mint(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[QubitStore, Mint]:
    store = QubitStore(rng=rng, noise_p=cfg.noise_p)
    keypair = hashsig.keygen(rng.bytes(32), cfg.merkle_depth, cfg.hash_name)
    return store, Mint(store, note_params(cfg), keypair, rng)


@lru_cache(maxsize=8)
def _signed_table(cfg: ScenarioConfig) -> SignedTable:
    """One signed table per run, built once per process. Adversaries keep no
    state between trials and every trial prepares its own OTMs, so trials
    stay independent."""
    return game_table(note_params(cfg), make_rng(np.random.SeedSequence([cfg.seed, TABLE_STREAM])))


# ----------------------------------------------------------------------
# honest-chain
# ----------------------------------------------------------------------
def _honest_chain_trial(cfg: ScenarioConfig, seed) -> dict:
    rng = make_rng(seed)
    store, issuer = _scenario_mint(cfg, rng)
    params = issuer.params
    views = [store.view(p) for p in PARTIES]
    holder = 0
    note = issuer.issue(views[holder])
    verdicts = []
    while True:
        out = verify(views[holder], note, cfg.xi, issuer.public_key, rng, params.hash_name)
        verdicts.append(out.verdict.value)
        if not out.passed:
            break
        note = transfer(note, views[holder], views[(holder + 1) % len(views)])
        holder = (holder + 1) % len(views)
    opened = cfg.zeta - len(note.unopened)
    checked_at_redemption = len(note.unopened)
    try:
        fresh = issuer.redeem(views[holder], note)
        redeemed = True
        fresh_verdict = verify(views[holder], fresh, cfg.xi, issuer.public_key, rng, params.hash_name).verdict.value
        fresh_sealed = cfg.zeta
    except QMoneyError as exc:
        log.warning("redemption failed: %s", exc)
        redeemed, fresh_verdict, fresh_sealed = False, None, 0
    return {
        "verdicts": verdicts,
        "opened_by_verification": opened,
        "checked_at_redemption": checked_at_redemption,
        "redeemed": redeemed,
        "fresh_sealed": fresh_sealed,
        "fresh_verdict": fresh_verdict,
        "signatures_used": issuer.keypair.next_index,
    }


def run_honest_chain(cfg: ScenarioConfig) -> dict:
    seeds = substreams(cfg.seed, cfg.trials)
    results = run_trials(_honest_chain_trial, [(cfg, s) for s in seeds], cfg.workers)
    expected = cfg.zeta // cfg.xi
    counts = Counter(v for r in results for v in r["verdicts"])
    passes = [r["verdicts"].count(Verdict.PASS.value) for r in results]
    return {
        "metrics": {
            "verdict_counts": dict(counts),
            "passes_per_note": passes,
            "expected_passes": expected,
            "otms": {
                "opened_by_verification": sum(r["opened_by_verification"] for r in results),
                "checked_at_redemption": sum(r["checked_at_redemption"] for r in results),
            },
            "signatures_used": sum(r["signatures_used"] for r in results),
            "redeemed": sum(r["redeemed"] for r in results),
            "fresh_note_verdicts": dict(Counter(str(r["fresh_verdict"]) for r in results)),
        },
        "checks": {
            "lifetime_is_floor_zeta_over_xi": all(p == expected for p in passes),
            "ends_used_up": all(r["verdicts"][-1] == Verdict.FAIL_USED_UP.value for r in results),
            "redemption_issues_fresh_note": all(r["redeemed"] and r["fresh_sealed"] == cfg.zeta for r in results),
            "fresh_note_passes": all(r["fresh_verdict"] == Verdict.PASS.value for r in results),
        },
    }


# ----------------------------------------------------------------------
# double-spend-classical-copy
# ----------------------------------------------------------------------
def _classical_copy_trial(cfg: ScenarioConfig, seed) -> tuple[str, str, str]:
    rng = make_rng(seed)
    params = note_params(cfg)
    store = QubitStore(rng=rng, noise_p=cfg.noise_p)
    keypair = hashsig.keygen(rng.bytes(32), hashsig.depth_for(params.signatures_per_note), cfg.hash_name)
    alice, bob, carol = (store.view(p) for p in ("alice", "bob", "carol"))
    note = mint(store, params, keypair, rng, holder=alice.name)
    copy = classical_copy(note, store)
    to_bob = transfer(note, alice, bob)
    to_carol = deliver(copy, alice, carol)
    pk = keypair.public_key
    bob_out = verify(bob, to_bob, cfg.xi, pk, rng, cfg.hash_name)
    carol_out = verify(carol, to_carol, cfg.xi, pk, rng, cfg.hash_name)
    retained = verify(alice, note, cfg.xi, pk, rng, cfg.hash_name)
    return bob_out.verdict.value, carol_out.verdict.value, retained.verdict.value


def run_double_spend_classical_copy(cfg: ScenarioConfig) -> dict:
    seeds = substreams(cfg.seed, cfg.trials)
    results = run_trials(_classical_copy_trial, [(cfg, s) for s in seeds], cfg.workers)
    double = sum(1 for bob, carol, _ in results if bob == carol == Verdict.PASS.value)
    return {
        "metrics": {
            "double_spend": frequency(double, len(results)),
            "receiver_verdicts": dict(Counter(r[0] for r in results)),
            "copy_holder_verdicts": dict(Counter(r[1] for r in results)),
            "sender_retained_verdicts": dict(Counter(r[2] for r in results)),
        },
        "checks": {
            "no_double_spend": double == 0,
            "copy_never_passes": all(r[1] == Verdict.FAIL_CHALLENGE.value for r in results),
            "sender_lost_spending_power": all(r[2] == Verdict.FAIL_CHALLENGE.value for r in results),
        },
    }


# ----------------------------------------------------------------------
# Duplicator games
# ----------------------------------------------------------------------
def _dual_pass_trial(cfg: ScenarioConfig, duplicator: str, seed) -> tuple[bool, bool]:
    first, second = dual_pass_game(DUPLICATORS[duplicator], note_params(cfg), seed, cfg.noise_p,
                                   table=_signed_table(cfg))
    return first.passed, second.passed


def _duplicator_summary(cfg: ScenarioConfig, duplicator: str, seed: int) -> dict:
    seeds = substreams(seed, cfg.trials)
    results = run_trials(_dual_pass_trial, [(cfg, duplicator, s) for s in seeds], cfg.workers)
    return {
        "first_copy": frequency(sum(a for a, _ in results), len(results)),
        "second_copy": frequency(sum(b for _, b in results), len(results)),
        "both": frequency(sum(a and b for a, b in results), len(results)),
    }


def run_premeasure_adversary(cfg: ScenarioConfig) -> dict:
    summary = _duplicator_summary(cfg, "premeasure-z", cfg.seed)
    single = 0.5 ** cfg.xi
    first = summary["first_copy"]
    return {
        "metrics": {
            "duplicator": "premeasure-z",
            "expected_single_copy": single,
            "expected_both": single ** 2,
            **summary,
        },
        "checks": {
            "single_copy_matches_half_per_challenge": agrees_with(first["successes"], first["trials"], single),
            "both_copies_within_bound": summary["both"]["low"] <= single ** 2,
        },
    }


def run_forgery_game(cfg: ScenarioConfig) -> dict:
    per_adversary = {
        name: _duplicator_summary(cfg, name, cfg.seed + k) for k, name in enumerate(DUPLICATORS)
    }
    return {
        "metrics": {"adversaries": per_adversary},
        "checks": {
            f"{name}_dual_pass_at_most_1e-2": summary["both"]["frequency"] <= 1e-2
            for name, summary in per_adversary.items()
        },
    }


# ----------------------------------------------------------------------
# otm-both-secrets
# ----------------------------------------------------------------------
def run_otm_both_secrets(cfg: ScenarioConfig) -> dict:
    params = OtmParams(cfg.n_otm, cfg.delta, cfg.kappa_len)
    per_strategy = {}
    for k, name in enumerate(OTM_STRATEGIES):
        seeds = substreams(cfg.seed + k, cfg.trials)
        wins = run_trials(both_secrets_trial, [(name, params, s, cfg.noise_p) for s in seeds], cfg.workers)
        per_strategy[name] = frequency(sum(wins), len(wins))
    return {
        "metrics": {"strategies": per_strategy, "n_otm": cfg.n_otm, "delta": cfg.delta},
        "checks": {f"{name}_within_1e-3": f["frequency"] <= 1e-3 for name, f in per_strategy.items()},
    }


# ----------------------------------------------------------------------
# QTDS scenarios
# ----------------------------------------------------------------------
def _commitment_trial(cfg: ScenarioConfig, forger: str, seed) -> bool:
    return commitment_game(FORGERS[forger](), note_params(cfg), seed, cfg.noise_p, table=_signed_table(cfg))


def _forgery_suite(cfg: ScenarioConfig, seed: int) -> dict:
    out = {}
    for k, name in enumerate(FORGERS):
        seeds = substreams(seed + k, cfg.trials)
        wins = run_trials(_commitment_trial, [(cfg, name, s) for s in seeds], cfg.workers)
        out[name] = frequency(sum(wins), len(wins))
    return out


def run_qtds_notary(cfg: ScenarioConfig) -> dict:
    rng = make_rng(cfg.seed)
    store, issuer = _scenario_mint(cfg, rng)
    alice, auditor = store.view("alice"), store.view("auditor")
    n_bits = 8
    notes = [issuer.issue(alice) for _ in range(n_bits)]
    received = [qtds_verify_note(alice, n, cfg.xi, issuer.public_key, rng, cfg.hash_name).verdict.value for n in notes]
    document = b"quarterly revenue receipt #" + rng.bytes(8).hex().encode()
    timestamp = 1_700_000_000 + cfg.seed
    bits = commitment_bits(document, timestamp, n_bits, cfg.hash_name)
    signatures = sign_message(alice, notes, bits)
    wire = [encode_signature(s) for s in signatures]
    decoded = [decode_signature(blob, cfg.hash_len) for blob in wire]
    auditor_ok = [verify_sig(s, issuer.public_key, cfg.zeta, algorithm=cfg.hash_name) for s in decoded]
    committed = [s.beta for s in decoded] == bits
    try:
        sign_message(alice, notes, commitment_bits(b"another document", timestamp, n_bits, cfg.hash_name))
        resign_blocked = False
    except QMoneyError:
        resign_blocked = True
    forgeries = _forgery_suite(cfg, cfg.seed + 1000)
    return {
        "metrics": {
            "document": document,
            "timestamp": timestamp,
            "commitment_bits": bits,
            "token_verdicts": dict(Counter(received)),
            "signature_bytes": sum(len(b) for b in wire),
            "auditor_accepts": sum(auditor_ok),
            "otms_opened_signing": sum(len(s.opened) for s in signatures),
            "forgeries": forgeries,
        },
        "checks": {
            "tokens_pass_majority_verification": all(v == Verdict.PASS.value for v in received),
            "auditor_accepts_every_bit": all(auditor_ok) and committed,
            "tokens_cannot_sign_twice": resign_blocked,
            **{f"forger_{name}_at_most_1e-3": f["frequency"] <= 1e-3 for name, f in forgeries.items()},
        },
    }


def run_qtds_bet(cfg: ScenarioConfig) -> dict:
    rng = make_rng(cfg.seed)
    store, issuer = _scenario_mint(cfg, rng)
    bettors = [store.view(p) for p in PARTIES[:4]]
    stakes = {b.name: issuer.issue(b) for b in bettors}
    bets = {}
    for b in bettors:
        prediction = int(rng.integers(0, 2))
        bets[b.name] = sign_bit(b, stakes[b.name], prediction)
    accepted = {name: verify_sig(sig, issuer.public_key, cfg.zeta, algorithm=cfg.hash_name) for name, sig in bets.items()}
    hedges_blocked = 0
    for b in bettors:
        try:
            sign_bit(b, stakes[b.name], 1 - bets[b.name].beta)
        except QMoneyError:
            hedges_blocked += 1
    relabelled = sum(
        verify_sig(FORGERS["reuse-opened"]().forge(None, None, sig, rng), issuer.public_key, cfg.zeta,
                   algorithm=cfg.hash_name)
        for sig in bets.values()
    )
    result = int(rng.integers(0, 2))
    winners = sorted(name for name, sig in bets.items() if accepted[name] and sig.beta == result)
    payouts = {name: issuer.issue(store.view(name)) for name in winners}
    payout_ok = all(
        verify(store.view(name), note, cfg.xi, issuer.public_key, rng, cfg.hash_name).passed
        for name, note in payouts.items()
    )
    forgeries = _forgery_suite(cfg, cfg.seed + 2000)
    return {
        "metrics": {
            "predictions": {name: sig.beta for name, sig in bets.items()},
            "result": result,
            "winners": winners,
            "bets_accepted": sum(accepted.values()),
            "hedges_blocked": hedges_blocked,
            "relabelled_bets_accepted": relabelled,
            "forgeries": forgeries,
        },
        "checks": {
            "every_bet_verifies": all(accepted.values()),
            "no_double_betting": hedges_blocked == len(bettors),
            "relabelled_bets_rejected": relabelled == 0,
            "winners_paid_in_fresh_tokens": payout_ok,
            **{f"forger_{name}_at_most_1e-3": f["frequency"] <= 1e-3 for name, f in forgeries.items()},
        },
    }


# ----------------------------------------------------------------------
# Substrate statistics
# ----------------------------------------------------------------------
def run_conjugate_coding_stat(cfg: ScenarioConfig) -> dict:
    rng = make_rng(cfg.seed)
    store = QubitStore(rng=rng, noise_p=cfg.noise_p)
    n = cfg.trials
    b, b_prime, theta, target = (random_bits(rng, n) for _ in range(4))
    correct = 0
    for k in range(n):
        pair = encode_pair(store, int(b[k]), int(b_prime[k]), int(theta[k]))
        wanted = b[k] if target[k] == 0 else b_prime[k]
        correct += read_pair(store, pair, int(target[k])) == wanted
    expected = 0.5 * (1 - cfg.noise_p) + 0.25
    plus = store.prepare_many(np.zeros(n, dtype=np.uint8), np.full(n, Basis.X, dtype=np.uint8))
    zeros = int(np.count_nonzero(store.measure_many(plus, Basis.Z) == 0))
    recovery, uniform = frequency(int(correct), n), frequency(zeros, n)
    return {
        "metrics": {"recovery": recovery, "expected_recovery": expected, "plus_measured_in_z_gives_0": uniform},
        "checks": {
            "recovery_matches_three_quarters": agrees_with(int(correct), n, expected),
            "wrong_basis_is_a_fair_coin": agrees_with(zeros, n, 0.5),
            "store_empty_afterwards": store.live_count() == 0,
        },
    }


def _honest_retrieval_trial(params: OtmParams, noise_p: float, seed) -> bool:
    rng = make_rng(seed)
    store = QubitStore(rng=rng, noise_p=noise_p)
    s0, s1 = rng.bytes(params.secret_len), rng.bytes(params.secret_len)
    token, payload = otm_create(store, s0, s1, params, rng)
    c = int(rng.integers(0, 2))
    try:
        return otm_retrieve(token, payload, c, store) == (s1 if c else s0)
    except QMoneyError:
        return False


NOISE_LEVELS = (0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.25)


def run_noise_sweep(cfg: ScenarioConfig) -> dict:
    params = OtmParams(cfg.n_otm, cfg.delta, cfg.kappa_len)
    rows, agreement = {}, []
    for k, noise in enumerate(NOISE_LEVELS):
        seeds = substreams(cfg.seed + k, cfg.trials)
        results = run_trials(_honest_retrieval_trial, [(params, noise, s) for s in seeds], cfg.workers)
        predicted = honest_success_probability(cfg.n_otm, cfg.delta, noise)
        rows[f"{noise:.3f}"] = {
            "honest_success": frequency(sum(results), len(results)),
            "predicted": round(predicted, 6),
        }
        agreement.append(agrees_with(sum(results), len(results), predicted))
    at_config = honest_success_probability(cfg.n_otm, cfg.delta, cfg.noise_p)
    return {
        "metrics": {"delta": cfg.delta, "n_otm": cfg.n_otm, "levels": rows,
                    "predicted_at_config_noise": round(at_config, 6)},
        "checks": {
            "measurements_match_binomial_prediction": all(agreement),
            "config_noise_is_tolerated": at_config >= 0.999,
        },
    }


# ----------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------
SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("honest-chain", "mint -> verify -> transfer ... until used up, then redeem",
                 run_honest_chain),
        Scenario("double-spend-classical-copy", "spend a note and its classical copy",
                 run_double_spend_classical_copy, {"zeta": 16, "xi": 4, "trials": 200}),
        Scenario("premeasure-adversary", "measure every OTM in Z, re-prepare, verify the copy",
                 run_premeasure_adversary, {"zeta": 8, "xi": 2, "trials": 1000}),
        Scenario("otm-both-secrets", "extract both secrets of one OTM",
                 run_otm_both_secrets, {"trials": 10000}),
        Scenario("forgery-game", "duplicator suite: two notes out of one",
                 run_forgery_game, {"zeta": 32, "xi": 8, "n_otm": 64, "trials": 1000}),
        Scenario("qtds-notary", "money commitment: sign H(timestamp || document)",
                 run_qtds_notary, {"zeta": 64, "xi": 8, "trials": 25}),
        Scenario("qtds-bet", "casino bets signed with quantum tokens",
                 run_qtds_bet, {"zeta": 64, "xi": 8, "trials": 25}),
        Scenario("conjugate-coding-stat", "3/4 recovery of the pair encoding",
                 run_conjugate_coding_stat, {"noise_p": 0.0, "trials": 100000}),
        Scenario("noise-sweep", "honest OTM retrieval against channel noise",
                 run_noise_sweep, {"trials": 2000}),
    )
}


def list_scenarios() -> list[str]:
    return list(SCENARIOS)


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; try one of: {', '.join(SCENARIOS)}") from None


def config_for(name: str, base: dict | None = None, **overrides) -> ScenarioConfig:
    """Scenario defaults, then base (e.g. a config file), then explicit overrides."""
    scenario = get_scenario(name)
    merged = {**scenario.defaults, **(base or {}), "scenario": name}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ScenarioConfig.from_dict(merged)


def run_scenario(config: ScenarioConfig) -> dict:
    scenario = get_scenario(config.scenario)
    log.info("running %s (seed=%d, trials=%d)", scenario.name, config.seed, config.trials)
    start = time.perf_counter()
    result = scenario.run(config)
    checks = result["checks"]
    return {
        "scenario": scenario.name,
        "seed": config.seed,
        "config": config.to_dict(),
        "metrics": result["metrics"],
        "checks": checks,
        "passed": all(checks.values()),
        "elapsed_seconds": round(time.perf_counter() - start, 3),
    }


def ensure_passed(report: dict):
    failed = sorted(name for name, ok in report["checks"].items() if not ok)
    if failed:
        raise ScenarioAssertionFailed(report["scenario"], failed)
