"""Command-line entry points: solve one clause file, or bench a directory.

    chc-ta [flags] FILE
    chc-ta bench DIR --csv OUT [flags]

The first stdout line is always one of sat/unsat/unknown (competition
convention); witnesses, models and statistics follow.  Exit codes:
0 for sat/unsat, 2 for unknown, 1 for usage or parse errors.
"""

from __future__ import annotations

import argparse
import csv as csv_mod
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .backend import DEFAULT_SOLVER_COMMAND, KNOWN_SOLVERS
from .clauses import ChcSystem, validate_system
from .engine import SolveConfig, SolveOutcome, canonical_params, refine_loop
from .parser import ParseError, parse_file
from .terms import Const, symbol_text, to_smtlib


@dataclass
class Config:
    """Everything a single solve run needs."""

    input_path: str
    solver_command: Optional[str] = None
    interpolation: str = "external"  # external | subtree
    minimize: str = "bisim"  # none | naive | bisim
    on_demand: bool = True
    max_iterations: int = 1000
    timeout: float = 60.0
    witness: bool = False
    stats: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max-iterations must be positive")

    def solve_config(self) -> SolveConfig:
        return SolveConfig(
            solver_command=self.solver_command,
            interpolation=self.interpolation,
            minimize=self.minimize,
            on_demand=self.on_demand,
            max_iterations=self.max_iterations,
            timeout=self.timeout,
            seed=self.seed,
        )


def _add_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", metavar="CMD", default=None,
                   help="solver command line (default: bundled solver; "
                        f"e.g. {KNOWN_SOLVERS['z3']!r} or {KNOWN_SOLVERS['cvc5']!r})")
    p.add_argument("--interpolation", choices=["external", "subtree"],
                   default="external")
    p.add_argument("--minimize", choices=["none", "naive", "bisim"],
                   default="bisim")
    p.add_argument("--no-on-demand", action="store_true",
                   help="materialize every generalization rule eagerly")
    p.add_argument("--max-iterations", type=int, default=1000, metavar="N")
    p.add_argument("--timeout", type=float, default=60.0, metavar="SECS")
    p.add_argument("--witness", action="store_true",
                   help="print the derivation (unsat) or model (sat)")
    p.add_argument("--stats", action="store_true",
                   help="print per-iteration statistics")
    p.add_argument("--seed", type=int, default=0, metavar="N")


def _parse_args(argv: Sequence[str]):
    if argv and argv[0] == "bench":
        p = argparse.ArgumentParser(prog="chc-ta bench")
        p.add_argument("dir")
        p.add_argument("--csv", required=True, metavar="OUT")
        _add_flags(p)
        ns = p.parse_args(argv[1:])
        return "bench", ns
    p = argparse.ArgumentParser(prog="chc-ta")
    p.add_argument("file")
    _add_flags(p)
    ns = p.parse_args(argv)
    return "run", ns


def _config_from(ns, input_path: str) -> Config:
    return Config(
        input_path=input_path,
        solver_command=ns.solver,
        interpolation=ns.interpolation,
        minimize=ns.minimize,
        on_demand=not ns.no_on_demand,
        max_iterations=ns.max_iterations,
        timeout=ns.timeout,
        witness=ns.witness,
        stats=ns.stats,
        seed=ns.seed,
    )


def _print_model(system: ChcSystem, model: Optional[dict], out) -> None:
    if model is None:
        print("; no certificate", file=out)
        return
    for p in sorted(system.predicates, key=lambda p: p.name):
        params = " ".join(f"({v.name} {v.sort.name})"
                          for v in canonical_params(p.param_sorts))
        body = to_smtlib(model[p])
        print(f"(define-fun {symbol_text(p.name)} ({params}) Bool {body})",
              file=out)


def _value_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v) if v >= 0 else f"(- {-v})"
    if isinstance(v, Fraction):
        if v < 0:
            return f"(- {abs(v)})"
        return str(v)
    return str(v)


def _print_witness(outcome: SolveOutcome, out) -> None:
    print("; derivation (nested clause ids)", file=out)
    print(outcome.witness.witness_text(), file=out)
    print("; satisfying assignment", file=out)
    pairs = " ".join(
        f"({symbol_text(v.name)} {_value_text(val)})"
        for v, val in sorted(outcome.assignment.items(),
                             key=lambda kv: kv[0].name))
    print(f"({pairs})", file=out)


def solve_file(config: Config, out=None, err=None) -> tuple[str, SolveOutcome | None]:
    """Parse and solve one file; prints the verdict first.  Returns
    (verdict, outcome); parse/validation problems raise ParseError."""
    out = out or sys.stdout
    err = err or sys.stderr
    warnings: list = []
    system = parse_file(config.input_path, warnings=warnings)
    for w in warnings:
        print(w, file=err)
    if not system.clauses:
        # nothing asserted: trivially satisfiable
        print("sat", file=out)
        if config.witness:
            _print_model(system, {p: _true_term() for p in system.predicates},
                         out)
        return "sat", None
    diagnostics = validate_system(system)
    if diagnostics:
        raise ParseError("; ".join(map(str, diagnostics)), 0, 0,
                         config.input_path)
    try:
        outcome = refine_loop(system, config.solve_config())
    except Exception as e:  # verdict line must still appear
        print("unknown", file=out)
        print(f"{config.input_path}: error: {type(e).__name__}: {e}", file=err)
        return "unknown", None
    print(outcome.status, file=out)
    if outcome.status == "unknown" and outcome.reason:
        print(f"; {outcome.reason}", file=out)
    if config.witness:
        if outcome.status == "unsat":
            _print_witness(outcome, out)
        elif outcome.status == "sat":
            _print_model(system, outcome.model, out)
    if config.stats:
        print(outcome.stats.kv_text(), file=out)
    return outcome.status, outcome


def _true_term():
    from .terms import TRUE
    return TRUE


def run(argv: Sequence[str]) -> int:
    """Solve one file; competition-style output and exit codes."""
    try:
        mode, ns = _parse_args(list(argv))
    except SystemExit as e:
        return 1 if e.code else 0
    if mode == "bench":
        return bench(ns)
    try:
        config = _config_from(ns, ns.file)
    except ValueError as e:
        print(f"chc-ta: error: {e}", file=sys.stderr)
        return 1
    try:
        verdict, _ = solve_file(config)
    except ParseError as e:
        print(e, file=sys.stderr)
        return 1
    except OSError as e:
        print(f"chc-ta: error: {e}", file=sys.stderr)
        return 1
    return 0 if verdict in ("sat", "unsat") else 2


def bench(ns) -> int:
    """Run every .smt2 file in a directory; write a CSV of results."""
    try:
        files = sorted(f for f in os.listdir(ns.dir) if f.endswith(".smt2"))
    except OSError as e:
        print(f"chc-ta: error: {e}", file=sys.stderr)
        return 1
    rows = []
    counts = {"sat": 0, "unsat": 0, "unknown": 0, "error": 0}
    for name in files:
        path = os.path.join(ns.dir, name)
        started = time.monotonic()
        try:
            config = _config_from(ns, path)
            import io
            sink = io.StringIO()
            verdict, outcome = solve_file(config, out=sink)
            wall_ms = int((time.monotonic() - started) * 1000)
            rows.append({
                "file": name,
                "result": verdict,
                "iterations": outcome.iterations if outcome else 0,
                "wall_ms": wall_ms,
                "automaton_peak_states": outcome.stats.peak_states if outcome else 0,
                "smt_queries": outcome.stats.total_queries if outcome else 0,
            })
            counts[verdict] = counts.get(verdict, 0) + 1
        except (ParseError, OSError, ValueError) as e:
            wall_ms = int((time.monotonic() - started) * 1000)
            print(f"{path}: {e}", file=sys.stderr)
            rows.append({"file": name, "result": "error", "iterations": 0,
                         "wall_ms": wall_ms, "automaton_peak_states": 0,
                         "smt_queries": 0})
            counts["error"] += 1
        print(f"{name}: {rows[-1]['result']} "
              f"({rows[-1]['wall_ms']} ms, {rows[-1]['iterations']} iterations)")
    fieldnames = ["file", "result", "iterations", "wall_ms",
                  "automaton_peak_states", "smt_queries"]
    with open(ns.csv, "w", newline="") as f:
        writer = csv_mod.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    total = len(rows)
    summary = ", ".join(f"{counts.get(k, 0)} {k}"
                        for k in ("sat", "unsat", "unknown", "error"))
    print(f"{total} files: {summary}; results in {ns.csv}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
