"""Command-line front end.

Exit status: 0 on success, 1 on usage errors, 2 when a verification step
(equivalence, yield, timing) fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import plotting
from .cell import nominal_instance, margins as cell_margins
from .config import RunConfig, load_config
from .flows import DRIFT_SWEEP_MV, TRAIN_HEADER, drift_study, program_library, train_library
from .io import atomic_write, csv_text, header_line, write_csv
from .threshold import (
    MAX_ARITY,
    Library,
    ThresholdFunction,
    TruthTable,
    detect_threshold,
    enumerate_library,
    read_library,
    write_library,
)
from .trainer import (
    class_fix_rates,
    evaluate_yield,
    mpla_plusplus,
    read_vt_databases,
    write_vt_databases,
    VtDatabase,
)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _library(args, cfg: RunConfig) -> Library:
    if getattr(args, "library", None):
        return read_library(args.library)
    return enumerate_library(MAX_ARITY)


def _parse_function(text: str) -> TruthTable:
    """Accept '[w1,..;T]' or 'n:hex'."""
    text = text.strip()
    if ";" in text:
        return ThresholdFunction.parse(text).truth_table()
    if ":" in text:
        n, hx = text.split(":", 1)
        return TruthTable.from_hex(int(n), hx)
    raise UsageError(f"cannot parse function {text!r}; use [w1,..,wn;T] or n:hex")


def _out(cfg: RunConfig, args, name: str) -> Path:
    base = Path(args.out_dir or cfg.out_dir)
    return base / name


def cmd_enumerate(args, cfg: RunConfig) -> int:
    if not 1 <= args.n <= MAX_ARITY:
        raise UsageError(f"--n must be within 1..{MAX_ARITY}")
    lib = enumerate_library(args.n)
    path = Path(args.output) if args.output else _out(cfg, args, f"library_n{args.n}.tsv")
    write_library(lib, path)
    print(f"{len(lib)} classes written to {path}")
    return EXIT_OK


def cmd_detect(args, cfg: RunConfig) -> int:
    tt = _parse_function(args.function)
    tf = detect_threshold(tt)
    print(tf if tf is not None else "not a threshold function")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    lib = _library(args, cfg)
    indices = [int(i) for i in args.functions.split(",")] if args.functions else None
    trained = train_library(lib, cfg, indices)
    h = cfg.digest()
    write_csv(_out(cfg, args, "train_report.csv"), TRAIN_HEADER, [t.row() for t in trained], h)
    dbs = [VtDatabase(t.cls.class_index, t.cls.canonical_tt, t.result.vt, handicap=t.handicap) for t in trained]
    write_vt_databases(dbs, _out(cfg, args, "vt_database.tsv"), h)
    plotting.plot_iterations(
        [t.cls.class_index for t in trained],
        [t.result.iterations for t in trained],
        [t.kmax for t in trained],
        _out(cfg, args, "train_iterations.png"),
    )
    failed = [t.cls.class_index for t in trained if not t.result.converged]
    print(f"trained {len(trained)} functions, {len(trained) - len(failed)} converged")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_yield(args, cfg: RunConfig) -> int:
    tt = _parse_function(args.function)
    params = cfg.cell_params(tt.arity)
    tcfg = cfg.trainer()
    db, groups = mpla_plusplus(
        tt, params, cfg.n_mc, cfg.sigma_vt, cfg.sigma_beta, cfg.seed, tcfg, cfg.lam, return_population=True
    )
    rates = class_fix_rates(tt, db, groups)
    summary = evaluate_yield(tt, db, params, cfg.n_test, cfg.sigma_vt, cfg.sigma_beta, cfg.test_seed, tcfg)
    rows = [
        ("training_instances", cfg.n_mc),
        ("training_errors", db.n_errors),
        ("error_types", db.m_f),
        ("unfixable_types", len(db.unfixable)),
        ("test_instances", summary.n_test),
        ("yield_nominal", summary.nominal_yield),
        ("yield_with_error_types", summary.errtype_yield),
        ("yield_with_onchip", summary.final_yield),
        ("error_type_coverage", summary.coverage),
        ("mean_onchip_iterations", summary.mean_onchip_iterations),
        ("classes_fixed_99pct", sum(r >= 0.99 for r in rates.values())),
    ]
    text = csv_text(("metric", "value"), rows, cfg.digest())
    atomic_write(_out(cfg, args, "yield.csv"), text)
    write_vt_databases([db], _out(cfg, args, "yield_vt_database.tsv"), cfg.digest())
    plotting.plot_yield(
        {"nominal": summary.nominal_yield, "+error types": summary.errtype_yield, "+on-chip": summary.final_yield},
        _out(cfg, args, "yield.png"),
    )
    sys.stdout.write(text)
    return EXIT_OK if summary.final_yield >= args.min_yield else EXIT_VERIFY


def cmd_program(args, cfg: RunConfig) -> int:
    lib = _library(args, cfg)
    dbs = list(read_vt_databases(args.db, lib).values())
    if not dbs:
        raise UsageError("database is empty")
    plan = program_library(dbs, args.cells, cfg)
    atomic_write(_out(cfg, args, "program_plan.csv"), plan.to_csv(cfg.digest()))
    per_cell = {}
    for c in plan.commands:
        per_cell[c.cell_index] = per_cell.get(c.cell_index, 0) + c.count
    arities = [dbs[i % len(dbs)].nominal.arity for i in range(args.cells)]
    plotting.plot_pulses_by_arity(arities, [per_cell.get(i, 0) for i in range(args.cells)], _out(cfg, args, "pulses_by_arity.png"))
    print(f"total_pulses={plan.total_pulses} total_time_us={plan.estimated_time_us:g}")
    return EXIT_OK


def cmd_drift(args, cfg: RunConfig) -> int:
    lib = _library(args, cfg)
    sweep = [float(x) for x in args.sweep.split(",")]
    rows = drift_study(lib, cfg, sweep)
    n = len(rows)
    plus = [sum(r.plus_survives[k] for r in rows) / n for k in range(len(sweep))]
    zero = [sum(r.zero_survives[k] for r in rows) / n for k in range(len(sweep))]
    table = [(d, p, z) for d, p, z in zip(sweep, plus, zero)]
    text = csv_text(("drift_mv", "handicap_trained", "plain_trained"), table, cfg.digest())
    atomic_write(_out(cfg, args, "drift.csv"), text)
    plotting.plot_drift(sweep, {"handicap-trained": plus, "plain-trained": zero}, _out(cfg, args, "drift.png"))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    from .synth import (
        TechTable,
        emit_blif,
        inverters_added,
        map_to_ftl,
        parse_blif,
        ppa_report,
        verify_equivalence,
    )

    lib = _library(args, cfg)
    text = Path(args.blif).read_text() if args.blif != "-" else sys.stdin.read()
    before = parse_blif(text, lib)
    tech = TechTable.load(args.tech) if args.tech else TechTable.bundled()
    after, refs = map_to_ftl(before, lib, args.policy, tech)
    eq = verify_equivalence(before, after, cfg.vector_count, cfg.seed)
    report = ppa_report(before, after, tech, inverters_added(refs, before, after), eq.passed)
    data = report.as_json()
    data["equivalence_mode"] = eq.mode
    data["cells"] = [
        {"dff": r.dff_id, "class": r.class_index, "inputs": list(r.binding), "inverted": list(r.inverted), "output_inverted": r.output_inverted}
        for r in refs
    ]
    stem = Path(args.blif).stem if args.blif != "-" else "stdin"
    atomic_write(_out(cfg, args, f"{stem}_report.json"), json.dumps(data, indent=2) + "\n")
    if refs:
        plotting.plot_class_distribution([f"f{r.class_index}" for r in refs], _out(cfg, args, f"{stem}_classes.png"))
    if not eq.passed:
        print(f"equivalence check failed: {eq.counterexample}", file=sys.stderr)
        return EXIT_VERIFY
    atomic_write(_out(cfg, args, f"{stem}_ftl.blif"), emit_blif(after))
    print(json.dumps({k: v for k, v in data.items() if k != "cells"}))
    return EXIT_OK


def cmd_timing_fix(args, cfg: RunConfig) -> int:
    from .cell import critical_delay
    from .synth.timing import Stage, candidates, c2q_range, fix_timing
    from .trainer import mpla_plus

    tt = _parse_function(args.function)
    params = cfg.cell_params(tt.arity)
    inst = nominal_instance(params)
    tcfg = cfg.trainer()
    cands = candidates(tt, inst, tcfg, cfg.lam)
    lo, hi = c2q_range(cands)
    span = hi - lo
    d2d, setup, hold = args.d2d, args.setup, args.hold
    if args.inject == "setup":
        current = mpla_plus(tt, inst, tcfg, 0.0, 0.0, cfg.lam).vt
        c2q = critical_delay(inst, current)
        stage = Stage(d2d, setup, hold=0.0, skew=0.0, period=c2q + d2d + setup - args.fraction * span)
    elif args.inject == "hold":
        current = min(cands, key=lambda c: c.c2q).vt
        c2q = critical_delay(inst, current)
        stage = Stage(d2d, setup, hold=c2q + d2d + args.fraction * span, skew=0.0, period=10 * (hi + d2d + setup))
    else:
        raise UsageError("--inject must be setup or hold")
    fix = fix_timing(stage, tt, inst, current, tcfg, cfg.lam, cands)
    rows = [
        ("c2q_before", fix.before.c2q),
        ("setup_slack_before", fix.before.setup_slack),
        ("hold_slack_before", fix.before.hold_slack),
        ("c2q_after", fix.after.c2q),
        ("setup_slack_after", fix.after.setup_slack),
        ("hold_slack_after", fix.after.hold_slack),
        ("action", fix.action),
        ("fixed", fix.fixed),
    ]
    text = csv_text(("metric", "value"), rows, cfg.digest())
    atomic_write(_out(cfg, args, f"timing_{args.inject}.csv"), text)
    sys.stdout.write(text)
    return EXIT_OK if fix.fixed else EXIT_VERIFY


def cmd_report(args, cfg: RunConfig) -> int:
    """Margin/delay sweep over handicaps for one function, with figures."""
    from .cell import critical_delay
    from .trainer import find_max_handicap, mpla_plus

    tt = _parse_function(args.function)
    inst = nominal_instance(cfg.cell_params(tt.arity))
    tcfg = cfg.trainer()
    c_star = find_max_handicap(tt, inst, tcfg, cfg.lam)
    grid = sorted({round(c, 2) for c in (0.0, 0.01, 0.02, 0.05, 0.1, 0.15) if c <= c_star + 1e-9} | {round(c_star, 2)})
    rows = []
    for c in grid:
        res = mpla_plus(tt, inst, tcfg, c, c, cfg.lam)
        m = res.margins
        rows.append((c, res.iterations, int(res.converged), m.min_onset_margin, m.min_offset_margin, critical_delay(inst, res.vt)))
    text = csv_text(("C", "iterations", "converged", "min_onset_margin", "min_offset_margin", "critical_delay"), rows, cfg.digest())
    atomic_write(_out(cfg, args, "handicap_sweep.csv"), text)
    plotting.plot_margins([r[0] for r in rows], [r[3] for r in rows], [r[4] for r in rows], [r[5] for r in rows], _out(cfg, args, "handicap_sweep.png"))
    best = mpla_plus(tt, inst, tcfg, c_star, c_star, cfg.lam)
    rep = cell_margins(inst, best.vt, tt)
    plotting.plot_conductance(rep.g_left, rep.g_right, [bool(tt[m]) for m in range(tt.size)], _out(cfg, args, "conductance.png"))
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ftlkit", description="Threshold-logic cell training, programming and mapping flows.")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one configuration key")
    p.add_argument("--out-dir", help="directory for output files (overrides out_dir)")
    p.add_argument("--show-config", action="store_true", help="print the effective configuration and exit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("enumerate", help="write the threshold-function library")
    s.add_argument("--n", type=int, default=5, help="maximum arity (1..5)")
    s.add_argument("--output", help="library file path")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("detect", help="test a truth table for threshold realizability")
    s.add_argument("function", help="'n:hex' truth table or '[w..;T]'")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("train", help="train every library function on the nominal cell")
    s.add_argument("--library")
    s.add_argument("--functions", help="comma-separated class indices")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("yield", help="Monte-Carlo error-type training and staged yield")
    s.add_argument("function", nargs="?", default="[3,3,2,1,1;8]")
    s.add_argument("--min-yield", type=float, default=1.0)
    s.set_defaults(func=cmd_yield)

    s = sub.add_parser("program", help="plan scan-chain programming from a VT database")
    s.add_argument("--db", required=True)
    s.add_argument("--cells", type=int, required=True)
    s.add_argument("--library")
    s.set_defaults(func=cmd_program)

    s = sub.add_parser("drift", help="uniform VT drift robustness")
    s.add_argument("--sweep", default=",".join(f"{d:g}" for d in (0.0,) + DRIFT_SWEEP_MV))
    s.add_argument("--library")
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("synth", help="map cones plus flip-flops onto threshold cells")
    s.add_argument("blif", help="input BLIF ('-' for stdin); 'bundled:<name>' picks a bundled fixture")
    s.add_argument("--policy", choices=("benefit", "exhaustive"), default="benefit")
    s.add_argument("--tech")
    s.add_argument("--library")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("timing-fix", help="repair an injected setup or hold violation")
    s.add_argument("function", nargs="?", default="[1,1,1;2]")
    s.add_argument("--inject", choices=("setup", "hold"), default="setup")
    s.add_argument("--fraction", type=float, default=0.1, help="violation as a fraction of the achievable C2Q range")
    s.add_argument("--d2d", type=float, default=20.0)
    s.add_argument("--setup", type=float, default=2.0)
    s.add_argument("--hold", type=float, default=1.0)
    s.set_defaults(func=cmd_timing_fix)

    s = sub.add_parser("report", help="handicap sweep with margin, delay and conductance figures")
    s.add_argument("function", nargs="?", default="[4,1,1,1,1;5]")
    s.set_defaults(func=cmd_report)
    return p


def _resolve_bundled(args) -> None:
    blif = getattr(args, "blif", None)
    if blif and blif.startswith("bundled:"):
        name = blif.split(":", 1)[1]
        src = resources.files("ftlkit.data").joinpath(f"{name}.blif")
        if not src.is_file():
            raise UsageError(f"no bundled netlist named {name!r}")
        args.blif = str(src)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
    except (ValueError, OSError) as exc:
        print(f"ftlkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.show_config:
        sys.stdout.write(header_line(cfg.digest()) + cfg.dumps())
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        _resolve_bundled(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"ftlkit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
