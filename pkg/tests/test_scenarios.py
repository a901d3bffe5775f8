"""
Tests for the scenario registry and reports.

Every scenario runs here at reduced size; the full-size runs are marked slow.
"""
import pytest

from scenarios import (
    SCENARIOS,
    config_for,
    ensure_passed,
    list_scenarios,
    run_scenario,
)
from sim_core import (
    InvalidConfig,
    ScenarioAssertionFailed,
    ScenarioConfig,
    UnknownScenario,
    agrees_with,
    dumps_report,
    frequency,
)

TINY = {"zeta": 8, "xi": 2, "n_otm": 64, "noise_p": 0.0}
TOKENS = {"zeta": 16, "xi": 2, "n_otm": 256, "noise_p": 0.0, "merkle_depth": 9, "trials": 5}

SMALL_RUNS = {
    "honest-chain": {**TINY, "merkle_depth": 6, "expected_notes": 4, "trials": 2},
    "double-spend-classical-copy": {**TINY, "trials": 20},
    "premeasure-adversary": {**TINY, "trials": 200},
    "otm-both-secrets": {"n_otm": 1024, "trials": 300},
    "forgery-game": {**TINY, "zeta": 16, "xi": 8, "trials": 10},
    "qtds-notary": TOKENS,
    "qtds-bet": TOKENS,
    "conjugate-coding-stat": {"trials": 20_000},
    "noise-sweep": {"trials": 200},
}


# =============================================================================
# Registry
# =============================================================================

def test_registry_order():
    assert list_scenarios() == [
        "honest-chain",
        "double-spend-classical-copy",
        "premeasure-adversary",
        "otm-both-secrets",
        "forgery-game",
        "qtds-notary",
        "qtds-bet",
        "conjugate-coding-stat",
        "noise-sweep",
    ]
    assert set(SMALL_RUNS) == set(SCENARIOS)


def test_unknown_scenario():
    with pytest.raises(UnknownScenario):
        config_for("teleport")


def test_overrides_beat_defaults():
    cfg = config_for("premeasure-adversary", {"trials": 50}, seed=3, trials=None)
    assert (cfg.zeta, cfg.xi, cfg.trials, cfg.seed) == (8, 2, 50, 3)


@pytest.mark.parametrize("bad", [
    {"xi": 8, "zeta": 8},
    {"noise_p": 0.2},
    {"kappa_len": 64},
    {"merkle_depth": 21},
    {"merkle_depth": 4},
    {"hash_name": "sha512"},
    {"trials": 0},
    {"colour": "blue"},
])
def test_invalid_config(bad):
    with pytest.raises(InvalidConfig):
        ScenarioConfig.from_dict(bad)


# =============================================================================
# Runs
# =============================================================================

@pytest.mark.parametrize("name", list(SMALL_RUNS))
def test_scenario_checks_pass(name):
    report = run_scenario(config_for(name, SMALL_RUNS[name], seed=1))
    failed = [k for k, ok in report["checks"].items() if not ok]
    assert failed == []
    assert report["passed"]
    assert report["config"]["scenario"] == name
    ensure_passed(report)


def test_honest_chain_accounting():
    report = run_scenario(config_for("honest-chain", SMALL_RUNS["honest-chain"], seed=2))
    m = report["metrics"]
    assert m["passes_per_note"] == [4, 4]
    assert m["verdict_counts"] == {"pass": 8, "fail-used-up": 2}
    assert m["otms"] == {"opened_by_verification": 16, "checked_at_redemption": 0}
    assert m["signatures_used"] == 2 * 2 * 16


def test_classical_copy_never_double_spends():
    report = run_scenario(config_for("double-spend-classical-copy", SMALL_RUNS["double-spend-classical-copy"]))
    assert report["metrics"]["double_spend"]["successes"] == 0


def test_reports_are_reproducible():
    cfg = config_for("premeasure-adversary", TINY, trials=50, seed=9)
    first, second = run_scenario(cfg), run_scenario(cfg)
    first.pop("elapsed_seconds")
    second.pop("elapsed_seconds")
    assert dumps_report(first) == dumps_report(second)


def test_workers_do_not_change_results():
    cfg = config_for("double-spend-classical-copy", TINY, trials=6, seed=4)
    serial = run_scenario(cfg)
    parallel = run_scenario(config_for("double-spend-classical-copy", TINY, trials=6, seed=4, workers=2))
    assert serial["metrics"] == parallel["metrics"]


def test_failed_check_raises():
    report = {"scenario": "x", "checks": {"a": True, "b": False}}
    with pytest.raises(ScenarioAssertionFailed) as exc:
        ensure_passed(report)
    assert exc.value.failed == ["b"]


def test_forgery_game_workers_share_one_table():
    small = SMALL_RUNS["forgery-game"]
    serial = run_scenario(config_for("forgery-game", small, trials=6, seed=4))
    parallel = run_scenario(config_for("forgery-game", small, trials=6, seed=4, workers=2))
    assert serial["metrics"] == parallel["metrics"]


def test_forgery_game_defaults():
    cfg = config_for("forgery-game")
    assert (cfg.zeta, cfg.xi, cfg.n_otm, cfg.trials) == (32, 8, 64, 1000)


# =============================================================================
# Statistical checks
# =============================================================================

def test_rare_honest_failure_agrees_with_prediction():
    # One failure in 2000 against a predicted 0.999997: the Wilson interval
    # misses the prediction, the exact test does not.
    assert frequency(1999, 2000)["high"] < 0.999997
    assert agrees_with(1999, 2000, 0.999997)
    assert not agrees_with(1990, 2000, 0.999997)
    assert agrees_with(0, 0, 0.5)


def test_agrees_with_rejects_a_wrong_rate():
    assert agrees_with(7500, 10_000, 0.75)
    assert not agrees_with(7000, 10_000, 0.75)
    assert not agrees_with(5000, 10_000, 0.75)


def test_noise_sweep_passes_at_defaults():
    report = run_scenario(config_for("noise-sweep"))
    assert report["checks"]["measurements_match_binomial_prediction"]
    ensure_passed(report)


def test_both_secrets_check_uses_the_observed_frequency():
    report = run_scenario(config_for("otm-both-secrets", SMALL_RUNS["otm-both-secrets"], seed=1))
    for name, f in report["metrics"]["strategies"].items():
        assert report["checks"][f"{name}_within_1e-3"] == (f["frequency"] <= 1e-3)


# =============================================================================
# Full size
# =============================================================================

@pytest.mark.slow
@pytest.mark.parametrize("name", list(SMALL_RUNS))
def test_scenario_at_default_size(name):
    report = run_scenario(config_for(name, seed=0))
    ensure_passed(report)
    assert report["elapsed_seconds"] < 60


@pytest.mark.slow
def test_forgery_game_at_a_thousand_trials():
    report = run_scenario(config_for("forgery-game", seed=5))
    for name, summary in report["metrics"]["adversaries"].items():
        assert summary["both"]["trials"] == 1000
        assert summary["both"]["frequency"] <= 1e-2, name


@pytest.mark.slow
def test_honest_chain_at_full_note_size():
    cfg = config_for("honest-chain", {"zeta": 128, "xi": 16, "noise_p": 0.0, "expected_notes": 2, "trials": 1}, seed=6)
    report = run_scenario(cfg)
    ensure_passed(report)
    assert report["metrics"]["passes_per_note"] == [8]


@pytest.mark.slow
def test_honest_chain_survives_channel_noise():
    cfg = config_for("honest-chain", {"noise_p": 0.05, "merkle_depth": 9, "expected_notes": 2, "trials": 50}, seed=8)
    counts = run_scenario(cfg)["metrics"]["verdict_counts"]
    passed, failed = counts.get("pass", 0), counts.get("fail-challenge", 0)
    assert passed / (passed + failed) >= 0.99


@pytest.mark.slow
@pytest.mark.parametrize("xi, zeta, expected, tolerance", [(2, 8, 0.25, 0.03), (4, 8, 0.0625, 0.02)])
def test_premeasure_single_copy_rate(xi, zeta, expected, tolerance):
    report = run_scenario(config_for("premeasure-adversary", {"xi": xi, "zeta": zeta, "trials": 10_000}, seed=10))
    assert abs(report["metrics"]["first_copy"]["frequency"] - expected) <= tolerance
