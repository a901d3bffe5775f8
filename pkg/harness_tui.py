#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Quantum Money Lab, Textual TUI

Pick a scenario from the registry, run it in a worker thread and read its
checks and headline metrics. Past runs are kept in .harness_data/history.json.
Launch with: uv run python3 harness.py tui
"""

import time
from datetime import datetime
from pathlib import Path

from textual import on, work
from textual.app import App, ComposeResult
from textual.binding import Binding
from textual.containers import Center, Horizontal, Vertical, VerticalScroll
from textual.screen import Screen
from textual.timer import Timer
from textual.widgets import Button, Footer, Header, Input, Label, Static

from scenarios import SCENARIOS, config_for, run_scenario
from sim_core import QMoneyError, load_json, save_json

# ----------------------------------------------------------------------
# Run history
# ----------------------------------------------------------------------
HARNESS_DATA_DIR = Path(".harness_data")
HISTORY_FILE = HARNESS_DATA_DIR / "history.json"
HISTORY_LIMIT = 50


def load_history(file_path: Path = HISTORY_FILE) -> list[dict]:
    return load_json(file_path, default=[])


def record_run(report: dict, file_path: Path = HISTORY_FILE) -> list[dict]:
    history = load_history(file_path)
    history.append({
        "scenario": report["scenario"],
        "seed": report["seed"],
        "passed": report["passed"],
        "elapsed_seconds": report["elapsed_seconds"],
        "at": datetime.now().isoformat(timespec="seconds"),
    })
    history = history[-HISTORY_LIMIT:]
    save_json(history, file_path)
    return history


def summarize_metrics(metrics: dict, prefix: str = "") -> list[str]:
    """Flatten a metrics dict into short lines; frequency dicts become p ± r."""
    lines = []
    for key in sorted(metrics):
        value = metrics[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict) and "frequency" in value and "radius" in value:
            lines.append(f"{name}: {value['frequency']:.4f} ± {value['radius']:.4f} "
                         f"({value['successes']}/{value['trials']})")
        elif isinstance(value, dict):
            lines.extend(summarize_metrics(value, prefix=f"{name}."))
        elif isinstance(value, list) and len(value) > 8:
            lines.append(f"{name}: [{len(value)} values]")
        elif isinstance(value, bytes):
            lines.append(f"{name}: {value.hex()[:24]}...")
        else:
            lines.append(f"{name}: {value}")
    return lines


# ----------------------------------------------------------------------
# CSS
# ----------------------------------------------------------------------
APP_CSS = """
Screen {
    background: $surface;
}

#dashboard {
    align: center middle;
    width: 100%;
    height: 100%;
}

#dashboard-box {
    width: 72;
    height: auto;
    max-height: 95%;
    border: round $primary;
    padding: 1 2;
}

#dashboard-title {
    text-align: center;
    text-style: bold;
    color: $text;
    margin-bottom: 1;
}

#last-run-label {
    text-align: center;
    margin-bottom: 1;
    color: $text-muted;
}

#seed-input {
    margin-bottom: 1;
}

#scenario-list {
    width: 100%;
    height: auto;
    max-height: 30;
}

.scenario-btn {
    width: 100%;
    height: 3;
    content-align: left middle;
    text-align: left;
}

#quit-row {
    margin-top: 1;
    align: center middle;
    height: 3;
}

/* Run screen */
#run-body {
    align: center middle;
    width: 100%;
    height: 1fr;
}

#run-card {
    width: 70;
    height: auto;
    border: round $primary;
    padding: 1 2;
}

#run-title {
    text-style: bold;
    margin-bottom: 1;
}

#timer-label {
    color: $text-muted;
}

/* Summary screen */
#summary {
    align: center middle;
    width: 100%;
    height: 100%;
}

#summary-box {
    width: 90;
    height: auto;
    max-height: 90%;
    border: round $primary;
    padding: 1 2;
}

#summary-title {
    text-align: center;
    text-style: bold;
    color: $text;
    margin-bottom: 1;
}

#summary-scroll {
    height: auto;
    max-height: 30;
}

#summary-buttons {
    margin-top: 1;
    align: center middle;
    height: 3;
}

#summary-buttons Button {
    margin: 0 1;
}
"""


# ======================================================================
# Dashboard Screen
# ======================================================================
class DashboardScreen(Screen):
    BINDINGS = [
        Binding("q", "quit_app", "Quit"),
    ]

    def compose(self) -> ComposeResult:
        yield Header(show_clock=True)
        with Center(id="dashboard"):
            with Vertical(id="dashboard-box"):
                yield Label("Quantum Money Lab", id="dashboard-title")
                yield Label("", id="last-run-label")
                yield Input(placeholder="seed (default 0)", id="seed-input", type="integer")
                with VerticalScroll(id="scenario-list"):
                    for k, (name, scenario) in enumerate(SCENARIOS.items(), start=1):
                        yield Button(f"{k}  {name}\n   {scenario.summary}", id=f"run-{name}",
                                     variant="primary" if k == 1 else "default", classes="scenario-btn")
                with Center(id="quit-row"):
                    yield Button("Quit (q)", id="btn-quit", variant="error")
        yield Footer()

    def on_mount(self) -> None:
        self._refresh_stats()

    def _refresh_stats(self) -> None:
        history = load_history(self.app.history_file)
        label = self.query_one("#last-run-label", Label)
        if not history:
            label.update("No runs yet")
            return
        last = history[-1]
        verdict = "[green]passed[/]" if last["passed"] else "[red]failed[/]"
        label.update(f"Last run: {last['scenario']} (seed {last['seed']}) {verdict} in {last['elapsed_seconds']:.1f}s")

    def _seed(self) -> int:
        raw = self.query_one("#seed-input", Input).value.strip()
        return int(raw) if raw else 0

    @on(Button.Pressed, ".scenario-btn")
    def on_scenario(self, event: Button.Pressed) -> None:
        name = event.button.id.removeprefix("run-")
        self.app.push_screen(RunScreen(name, self._seed()))

    def action_quit_app(self) -> None:
        self.app.exit()

    @on(Button.Pressed, "#btn-quit")
    def on_quit(self) -> None:
        self.action_quit_app()


# ======================================================================
# Run Screen
# ======================================================================
class RunScreen(Screen):
    BINDINGS = [
        Binding("escape", "go_back", "Back"),
    ]

    def __init__(self, scenario: str, seed: int = 0) -> None:
        super().__init__()
        self.scenario = scenario
        self.seed = seed
        self.started = 0.0
        self._timer: Timer | None = None

    def compose(self) -> ComposeResult:
        yield Header(show_clock=True)
        with Center(id="run-body"):
            with Vertical(id="run-card"):
                yield Label(f"[bold]{self.scenario}[/] (seed {self.seed})", id="run-title")
                yield Label("Running...", id="status-label")
                yield Label("0:00", id="timer-label")
        yield Footer()

    def on_mount(self) -> None:
        self.started = time.monotonic()
        self._timer = self.set_interval(1.0, self._tick_timer)
        self.run_in_background()

    def _tick_timer(self) -> None:
        elapsed = int(time.monotonic() - self.started)
        self.query_one("#timer-label", Label).update(f"{elapsed // 60}:{elapsed % 60:02d}")

    @work(thread=True, exclusive=True)
    def run_in_background(self) -> None:
        try:
            config = config_for(self.scenario, self.app.overrides, seed=self.seed)
            report = run_scenario(config)
        except QMoneyError as exc:
            self.app.call_from_thread(self._failed, str(exc))
            return
        self.app.call_from_thread(self._finished, report)

    def _failed(self, message: str) -> None:
        if self._timer:
            self._timer.stop()
        self.query_one("#status-label", Label).update(f"[bold red]Error:[/] {message}")

    def _finished(self, report: dict) -> None:
        if self._timer:
            self._timer.stop()
        record_run(report, self.app.history_file)
        self.app.pop_screen()
        self.app.push_screen(SummaryScreen(report))

    def action_go_back(self) -> None:
        self.app.pop_screen()


# ======================================================================
# Summary Screen
# ======================================================================
class SummaryScreen(Screen):
    BINDINGS = [
        Binding("d", "dashboard", "Dashboard"),
        Binding("s", "save_report", "Save report"),
        Binding("q", "quit_app", "Quit"),
    ]

    def __init__(self, report: dict) -> None:
        super().__init__()
        self.report = report

    def compose(self) -> ComposeResult:
        yield Header(show_clock=True)
        with Center(id="summary"):
            with Vertical(id="summary-box"):
                yield Label("Scenario Report", id="summary-title")
                with VerticalScroll(id="summary-scroll"):
                    yield Static(id="summary-content")
                with Horizontal(id="summary-buttons"):
                    yield Button("Dashboard (d)", id="btn-dashboard", variant="primary")
                    yield Button("Save (s)", id="btn-save", variant="default")
                    yield Button("Quit (q)", id="btn-summary-quit", variant="error")
        yield Footer()

    def on_mount(self) -> None:
        r = self.report
        verdict = "[bold green]all checks passed[/]" if r["passed"] else "[bold red]checks failed[/]"
        lines = [
            f"  Scenario:  {r['scenario']}",
            f"  Seed:      {r['seed']}",
            f"  Time:      {r['elapsed_seconds']:.2f}s",
            f"  Verdict:   {verdict}",
            "",
            "[bold]  Checks:[/]",
        ]
        for name, ok in r["checks"].items():
            mark = "[green]ok[/]  " if ok else "[red]FAIL[/]"
            lines.append(f"    {mark} {name}")
        lines.append("")
        lines.append("[bold]  Metrics:[/]")
        lines.extend(f"    {line}" for line in summarize_metrics(r["metrics"]))
        self.query_one("#summary-content", Static).update("\n".join(lines))

    def action_save_report(self) -> None:
        path = self.app.reports_dir / f"{self.report['scenario']}-seed{self.report['seed']}.json"
        save_json(self.report, path)
        self.notify(f"Saved {path}")

    def action_dashboard(self) -> None:
        while not isinstance(self.app.screen, DashboardScreen):
            self.app.pop_screen()
        self.app.screen._refresh_stats()

    def action_quit_app(self) -> None:
        self.app.exit()

    @on(Button.Pressed, "#btn-dashboard")
    def on_dashboard(self) -> None:
        self.action_dashboard()

    @on(Button.Pressed, "#btn-save")
    def on_save(self) -> None:
        self.action_save_report()

    @on(Button.Pressed, "#btn-summary-quit")
    def on_quit(self) -> None:
        self.action_quit_app()


# ======================================================================
# Main App
# ======================================================================
class HarnessApp(App):
    CSS = APP_CSS
    TITLE = "Quantum Money Lab"
    BINDINGS = [
        Binding("ctrl+c", "quit", "Quit", show=False),
    ]

    def __init__(self, overrides: dict | None = None, data_dir: Path = HARNESS_DATA_DIR) -> None:
        super().__init__()
        self.overrides = overrides or {}
        self.history_file = data_dir / "history.json"
        self.reports_dir = data_dir / "reports"

    def on_mount(self) -> None:
        self.push_screen(DashboardScreen())


def main():
    app = HarnessApp()
    app.run()


if __name__ == "__main__":
    main()
