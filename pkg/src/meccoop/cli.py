"""Command line entry point: ``python -m meccoop <command> --config FILE``.

Exit codes: 0 success, 1 config error, 2 solver did not converge on some row.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import replace

from .dual import SolveStatus, solve_joint
from .experiments import (ALLOC_COLUMNS, ConfigError, ExperimentConfig, build_scenario,
                          load_config, run_sweep, format_rows)
from .lp import max_supportable_bits
from .oracle import GridSpec, brute_force_min_energy
from .schemes import run_scheme

OK, CONFIG_ERROR, NOT_CONVERGED = 0, 1, 2


def _fmt(x):
    return format(x, ".17g")


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.scheme is not None:
        changes["schemes"] = tuple(s.strip() for s in args.scheme.split(",") if s.strip())
    if args.tolerance is not None:
        changes["tolerance"] = args.tolerance
    return replace(config, **changes) if changes else config


def cmd_solve(args, config) -> int:
    s = build_scenario(config, args.value)
    rep = solve_joint(s, tolerance=config.tolerance)
    rows = [("status", rep.status.value), ("l_max_bits", _fmt(rep.l_max_bits))]
    if rep.allocation is not None:
        rows += [(c, _fmt(getattr(rep.allocation, c))) for c in ALLOC_COLUMNS]
        rows += [("energy_j", _fmt(rep.energy_j)), ("dual_value_j", _fmt(rep.dual_value)),
                 ("duality_gap_j", _fmt(rep.duality_gap)), ("iterations", rep.iterations)]
    for name in config.schemes:
        if name != "joint":
            r = run_scheme(name, s, config.literal_comm_time)
            rows.append((f"energy_{name}_j", _fmt(r.energy_j) if r.feasible else "infeasible"))
    if args.out:
        _emit(_table(("field", "value"), rows), args.out)
    else:
        width = max(len(k) for k, _ in rows)
        sys.stdout.write("".join(f"{k:<{width}}  {v}\n" for k, v in rows))
    return NOT_CONVERGED if rep.status is SolveStatus.NOT_CONVERGED else OK


def cmd_sweep(args, config) -> int:
    rows = run_sweep(config)
    _emit(format_rows(config, rows), args.out or config.output or None)
    return OK if all(r.converged for r in rows) else NOT_CONVERGED


def cmd_feasibility(args, config) -> int:
    rows = []
    for v in config.sweep_values():
        s = build_scenario(config, v)
        l_max, _ = max_supportable_bits(s)
        rows.append((_fmt(v), _fmt(s.task_bits), _fmt(l_max), str(s.task_bits <= l_max).lower()))
    _emit(_table((f"sweep_{config.sweep_variable}", "task_bits", "l_max_bits", "feasible"), rows),
          args.out)
    return OK


def cmd_oracle_check(args, config) -> int:
    grid = GridSpec.parse(args.grid) if args.grid else GridSpec()
    rows, status = [], OK
    for v in config.sweep_values():
        s = build_scenario(config, v)
        rep = solve_joint(s, tolerance=config.tolerance)
        if rep.status is SolveStatus.INFEASIBLE_TASK:
            rows.append((_fmt(v), "infeasible", "", "", "", rep.status.value))
            continue
        if rep.status is SolveStatus.NOT_CONVERGED:
            status = NOT_CONVERGED
        e_oracle, _ = brute_force_min_energy(s, grid)
        rel = abs(rep.energy_j - e_oracle) / max(e_oracle, 1e-300) if math.isfinite(e_oracle) else math.nan
        rows.append((_fmt(v), _fmt(rep.energy_j), _fmt(rep.dual_value), _fmt(e_oracle), _fmt(rel),
                     rep.status.value))
    header = (f"sweep_{config.sweep_variable}", "joint_energy_j", "dual_value_j",
              "oracle_energy_j", "relative_difference", "joint_status")
    _emit(_table(header, rows), args.out)
    return status


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "feasibility": cmd_feasibility,
            "oracle-check": cmd_oracle_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="meccoop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("solve", "solve one scenario (config base values)"),
                        ("sweep", "run the configured sweep and write CSV"),
                        ("feasibility", "maximum supportable bits at every sweep point"),
                        ("oracle-check", "compare the dual solver with the grid oracle")]:
        q = sub.add_parser(name, help=help_)
        q.add_argument("--config", help="config file (defaults built in if omitted)")
        q.add_argument("--out", help="output path, '-' for stdout")
        q.add_argument("--scheme", help="comma-separated scheme list")
        q.add_argument("--grid", help="oracle grid 'tau,bits,power[,refinements]'")
        q.add_argument("--tolerance", type=float, help="constraint tolerance")
        if name == "solve":
            q.add_argument("--value", type=float, help="substitute this sweep value")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = _config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except ValueError as exc:
        # grid spec and scheme names are config errors too
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
