"""
Tests for the Textual dashboard, driven headless through App.run_test().
"""
import asyncio

from textual.widgets import Button

from harness_tui import DashboardScreen, HarnessApp, SummaryScreen, load_history, record_run, summarize_metrics

TINY = {"zeta": 8, "xi": 2, "n_otm": 64, "noise_p": 0.0, "trials": 3}


def test_dashboard_lists_every_scenario(tmp_path):
    async def scenario():
        app = HarnessApp(overrides=TINY, data_dir=tmp_path)
        async with app.run_test():
            assert isinstance(app.screen, DashboardScreen)
            buttons = app.screen.query(".scenario-btn")
            assert len(buttons) == 9

    asyncio.run(scenario())


def test_run_from_dashboard_reaches_summary(tmp_path):
    async def scenario():
        app = HarnessApp(overrides=TINY, data_dir=tmp_path)
        async with app.run_test() as pilot:
            app.screen.query_one("#run-double-spend-classical-copy", Button).press()
            await pilot.pause()
            await app.workers.wait_for_complete()
            await pilot.pause()
            assert isinstance(app.screen, SummaryScreen)
            assert app.screen.report["passed"]
            await pilot.press("s")
            await pilot.press("d")
            assert isinstance(app.screen, DashboardScreen)

    asyncio.run(scenario())
    history = load_history(tmp_path / "history.json")
    assert [h["scenario"] for h in history] == ["double-spend-classical-copy"]
    assert (tmp_path / "reports" / "double-spend-classical-copy-seed0.json").exists()


def test_history_is_capped(tmp_path):
    path = tmp_path / "history.json"
    report = {"scenario": "noise-sweep", "seed": 0, "passed": True, "elapsed_seconds": 1.0}
    for _ in range(60):
        record_run(report, path)
    assert len(load_history(path)) == 50


def test_metrics_summary_lines():
    metrics = {
        "double_spend": {"successes": 0, "trials": 10, "frequency": 0.0, "low": 0.0, "high": 0.6, "radius": 0.6},
        "otms": {"opened": 4},
        "passes_per_note": list(range(20)),
    }
    lines = summarize_metrics(metrics)
    assert lines == [
        "double_spend: 0.0000 ± 0.6000 (0/10)",
        "otms.opened: 4",
        "passes_per_note: [20 values]",
    ]
