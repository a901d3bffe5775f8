#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Command-line harness for the quantum money simulator.

Runs the named scenarios, writes their JSON reports, mints a demo banknote
to a file and pretty-prints serialized notes and token signatures.

Usage:
    python3 harness.py list
    python3 harness.py run --scenario honest-chain --seed 7 --out report.json
    python3 harness.py mint-demo --out note.bin --ledger ledger.json
    python3 harness.py inspect note.bin
    python3 harness.py tui
"""

import argparse
import logging
import sys
from pathlib import Path

from rich.console import Console
from rich.table import Table

import hashsig
from banknote import Mint, decode_note, encode_note, verify
from qsim import QubitStore
from qtds import decode_signature
from scenarios import SCENARIOS, config_for, ensure_passed, list_scenarios, note_params, run_scenario
from sim_core import (
    InvalidConfig,
    QMoneyError,
    ScenarioAssertionFailed,
    UnknownScenario,
    WireFormatError,
    configure_logging,
    dumps_report,
    load_config,
    make_rng,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSERTION = 2

console = Console()


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------
def cmd_list(args) -> int:
    table = Table(title="Scenarios")
    table.add_column("name", style="bold")
    table.add_column("what it runs")
    table.add_column("defaults")
    for name in list_scenarios():
        s = SCENARIOS[name]
        table.add_row(name, s.summary, ", ".join(f"{k}={v}" for k, v in s.defaults.items()))
    console.print(table)
    return EXIT_OK


def cmd_run(args) -> int:
    base = load_config(args.config) if args.config else None
    config = config_for(
        args.scenario,
        base,
        seed=args.seed,
        zeta=args.zeta,
        xi=args.xi,
        n_otm=args.n_otm,
        delta=args.delta,
        noise_p=args.noise_p,
        trials=args.trials,
        workers=args.workers,
    )
    report = run_scenario(config)
    text = dumps_report(report)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        console.print(f"Report written to {args.out}")
    else:
        sys.stdout.write(text)
    ensure_passed(report)
    return EXIT_OK


def cmd_mint_demo(args) -> int:
    config = config_for("honest-chain", seed=args.seed, zeta=args.zeta, xi=args.xi)
    rng = make_rng(config.seed)
    store = QubitStore(rng=rng, noise_p=config.noise_p)
    keypair = hashsig.keygen(rng.bytes(32), hashsig.depth_for(4 * 2 * config.zeta), config.hash_name)
    issuer = Mint(store, note_params(config), keypair, rng, ledger_path=args.ledger)
    alice = store.view("alice")
    note = issuer.issue(alice)
    for _ in range(args.verify):
        outcome = verify(alice, note, config.xi, issuer.public_key, rng, config.hash_name)
        console.print(f"verification by alice: {outcome}")
    if args.redeem:
        fresh = issuer.redeem(alice, note)
        console.print(f"redeemed {note.note_id.hex()[:16]}, fresh note {fresh.note_id.hex()[:16]}")
        note = fresh
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(encode_note(note))
    console.print(f"Banknote {note.note_id.hex()[:16]} written to {args.out}")
    console.print(f"Mint public key: {issuer.public_key.hex()}")
    return EXIT_OK


def _note_table(note) -> Table:
    table = Table(title=f"Banknote {note.note_id.hex()}")
    table.add_column("field", style="bold")
    table.add_column("value")
    table.add_row("zeta", str(note.zeta))
    table.add_row("sealed OTMs (J)", str(len(note.unopened)))
    table.add_row("opened OTMs (K)", str(len(note.revealed)))
    table.add_row("OTM hardware present", str(len(note.otms)))
    table.add_row("mint signatures", str(len(note.sigs)))
    for i in sorted(note.revealed)[:8]:
        b, kappa = note.revealed[i]
        table.add_row(f"  revealed {i}", f"bit {b}: {kappa.hex()[:32]}...")
    return table


def _signature_table(sig) -> Table:
    matches = sum(1 for i in sig.unopened if hashsig.hash_bytes(sig.opened.get(i, b"")) == sig.hashes[(i, sig.beta)])
    table = Table(title=f"Token signature on note {sig.note_id.hex()}")
    table.add_column("field", style="bold")
    table.add_column("value")
    table.add_row("signed bit", str(sig.beta))
    table.add_row("zeta", str(sig.zeta))
    table.add_row("signing set", str(len(sig.unopened)))
    table.add_row("matching pre-images", f"{matches}/{len(sig.unopened)}")
    return table


def cmd_inspect(args) -> int:
    data = args.file.read_bytes()
    try:
        table = _note_table(decode_note(data, None, args.hash_len, args.kappa_len))
    except WireFormatError as note_error:
        try:
            table = _signature_table(decode_signature(data, args.hash_len))
        except WireFormatError:
            raise note_error from None
    console.print(table)
    return EXIT_OK


def cmd_tui(args) -> int:
    from harness_tui import HarnessApp

    HarnessApp().run()
    return EXIT_OK


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------
def _build_epilog() -> str:
    lines = ["Scenarios:"]
    for name, s in SCENARIOS.items():
        lines.append(f"  - {name}: {s.summary}")
    lines.append("")
    lines.append("Examples:")
    lines.append("  python3 harness.py run --scenario honest-chain       # Mint, pass around, redeem")
    lines.append("  python3 harness.py run --scenario forgery-game -v    # Duplicator suite with progress")
    lines.append("  python3 harness.py run --scenario noise-sweep --workers 4 --out sweep.json")
    lines.append("  python3 harness.py mint-demo --out note.bin --verify 2")
    lines.append("  python3 harness.py inspect note.bin")
    lines.append("")
    lines.append("Exit codes: 0 completed, 1 configuration error, 2 a scenario check failed.")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Quantum money and quantum-token signature simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=_build_epilog(),
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="Log progress (-v) or protocol detail (-vv)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one scenario and write its report")
    run.add_argument("--scenario", default="honest-chain", help="Scenario name (see 'list')")
    run.add_argument("--seed", type=int, help="Master seed for every random draw")
    run.add_argument("--zeta", type=int, help="OTMs per banknote")
    run.add_argument("--xi", type=int, help="OTMs opened per verification")
    run.add_argument("--n-otm", type=int, help="Qubits per OTM")
    run.add_argument("--delta", type=float, help="OTM mismatch tolerance")
    run.add_argument("--noise-p", type=float, help="Measurement bit-flip probability")
    run.add_argument("--trials", type=int, help="Monte Carlo trials")
    run.add_argument("--workers", type=int, help="Worker processes for independent trials")
    run.add_argument("--config", type=Path, help="JSON file with config fields")
    run.add_argument("--out", type=Path, help="Write the report here instead of stdout")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="List the scenario registry")
    lst.set_defaults(func=cmd_list)

    demo = sub.add_parser("mint-demo", help="Mint one banknote and save its serialized form")
    demo.add_argument("--out", type=Path, required=True, help="Output file for the note blob")
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--zeta", type=int, default=32)
    demo.add_argument("--xi", type=int, default=4)
    demo.add_argument("--verify", type=int, default=1, help="Verifications before saving")
    demo.add_argument("--redeem", action="store_true", help="Redeem the note and save the fresh one")
    demo.add_argument("--ledger", type=Path, help="JSON ledger of redeemed note ids")
    demo.set_defaults(func=cmd_mint_demo)

    insp = sub.add_parser("inspect", help="Pretty-print a serialized banknote or token signature")
    insp.add_argument("file", type=Path)
    insp.add_argument("--hash-len", type=int, default=32)
    insp.add_argument("--kappa-len", type=int, default=128)
    insp.set_defaults(func=cmd_inspect)

    tui = sub.add_parser("tui", help="Interactive scenario dashboard")
    tui.set_defaults(func=cmd_tui)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except (InvalidConfig, UnknownScenario, WireFormatError, FileNotFoundError) as exc:
        console.print(f"[red]Error:[/red] {exc}")
        return EXIT_CONFIG
    except ScenarioAssertionFailed as exc:
        console.print(f"[red]Scenario check failed:[/red] {exc}")
        return EXIT_ASSERTION
    except QMoneyError as exc:
        console.print(f"[red]Protocol error:[/red] {exc}")
        return EXIT_ASSERTION


if __name__ == "__main__":
    sys.exit(main())
