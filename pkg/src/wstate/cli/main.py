"""Command-line entry point: ``wstate reproduce|simulate|sweep|modes``.

Exit status: 0 success, 1 tolerance failure or aborted run, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import crystal
from ..lindblad import EvolutionError
from ..wbasis import WLabel
from .config import ConfigError, ScenarioConfig, apply_overrides, dump_config, grid_points, load_config, section_at
from .io import write_json, write_rows, write_trajectory
from .presets import PRESETS, Context, mode_columns, mode_rows, run_preset
from .runs import parallel_map, report_summary, run_job, step_rows

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "wstate_out"


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("WSTATE_OUT_DIR") or DEFAULT_OUT)


def _load(args, kinds: Sequence[str]) -> ScenarioConfig:
    cfg = load_config(args.config)
    if cfg.kind not in kinds:
        raise ConfigError("kind", f"'{cfg.kind}' cannot be run by '{args.command}' (expected {' or '.join(kinds)})")
    return apply_overrides(cfg, args.dt, args.nmax)


def cmd_reproduce(args) -> int:
    if args.preset not in PRESETS:
        print(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(PRESETS))}", file=sys.stderr)
        return EXIT_USAGE
    ctx = Context(_out_dir(args) / args.preset, args.dt, args.nmax, args.threads)
    res = run_preset(args.preset, ctx)
    print(f"{res.name} ({res.figure_id})")
    for c in res.checks:
        print("  " + c.line())
    print(f"{'PASS' if res.passed else 'FAIL'}: files in {ctx.out}")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = _load(args, ("scheme_a", "scheme_b", "modes"))
    if cfg.kind == "modes":
        return _modes(cfg, _out_dir(args) / cfg.name)
    sec = cfg.section()
    out = _out_dir(args) / cfg.name
    rep = run_job((sec.to_config(cfg.kind), WLabel.parse(sec.initial)))
    header = {"scenario": cfg.name, "kind": cfg.kind, "target": sec.target}
    write_trajectory(out / "trajectory.csv", rep.trajectory, header)
    step = "repump_step" if cfg.kind == "scheme_a" else "iteration"
    write_rows(out / "steps.csv", (step, "time_us", "fidelity"), step_rows(rep), header)
    write_json(out / "summary.json", {"scenario": cfg.name, "kind": cfg.kind, **report_summary(rep)})
    (out / "config.json").write_text(dump_config(cfg) + "\n")
    print(f"{cfg.name}: final fidelity {rep.final_fidelity:.6f}; files in {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args, ("sweep",))
    points = grid_points(cfg)
    base = cfg.sweep.base
    sections = [section_at(cfg, p) for p in points]
    jobs = [(s.to_config(base), WLabel.parse(s.initial)) for s in sections]
    reps = parallel_map(run_job, jobs, args.threads)
    axes = [a.field for a in cfg.sweep.axes]
    rows = []
    for p, r in zip(points, reps):
        f_peak, t_peak = r.peak
        rows.append([*p, r.final_fidelity, f_peak, t_peak * 1e6, r.quasi_steady_state])
    out = _out_dir(args) / cfg.name
    cols = (*axes, "final_fidelity", "peak_fidelity", "peak_time_us", "quasi_steady_state_fidelity")
    write_rows(out / "sweep.csv", cols, rows, {"scenario": cfg.name, "base": base})
    write_json(out / "summary.json", {"scenario": cfg.name, "base": base, "axes": axes, "points": len(rows)})
    (out / "config.json").write_text(dump_config(cfg) + "\n")
    print(f"{cfg.name}: {len(rows)} grid points; files in {out}")
    return EXIT_OK


def _modes(cfg: ScenarioConfig, out: Path) -> int:
    m = cfg.modes
    sp = m.species()
    k4 = m.k4_uV_per_um4 * crystal.UV_PER_UM4
    summary = {"scenario": cfg.name, "chain": [s.name for s in sp], "k4_uV_per_um4": m.k4_uV_per_um4}
    if m.tune is not None:
        bracket = None
        if m.tune.k2_bracket_uV_per_um2 is not None:
            bracket = tuple(v * crystal.UV_PER_UM2 for v in m.tune.k2_bracket_uV_per_um2)
        res = crystal.tune_k2(sp, k4, m.tune.mode, m.qubits(), bracket=bracket)
        modes, k2 = res.modes, res.k2
        summary.update(tuned_mode=res.mode_index, uniformity=res.uniformity, gap_kHz=res.gap_hz / 1e3,
                       gap_flag=res.gap_flag)
    else:
        k2 = m.k2_uV_per_um2 * crystal.UV_PER_UM2
        modes = crystal.normal_modes(crystal.CrystalConfig(sp, k2, k4))
    c = crystal.CrystalConfig(sp, k2, k4)
    summary.update(
        k2_uV_per_um2=k2 / crystal.UV_PER_UM2,
        positions_um=modes.positions * 1e6,
        max_residual_force_N=float(np.abs(crystal.net_forces(c, modes.positions)).max()),
        frequencies_MHz=modes.frequencies_hz / 1e6,
    )
    write_rows(out / "modes.csv", mode_columns(len(sp)), mode_rows(modes, cfg.name), {"scenario": cfg.name})
    write_json(out / "summary.json", summary)
    print(f"{cfg.name}: k2 = {k2 / crystal.UV_PER_UM2:.6g} uV/um^2; files in {out}")
    return EXIT_OK


def cmd_modes(args) -> int:
    cfg = _load(args, ("modes",))
    return _modes(cfg, _out_dir(args) / cfg.name)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default $WSTATE_OUT_DIR or ./wstate_out)")
    common.add_argument("--dt", type=float, help="integrator step in ns")
    common.add_argument("--nmax", type=int, help="Fock truncation")
    common.add_argument("--threads", type=int, default=None, help="worker processes for grids")
    p = argparse.ArgumentParser(prog="wstate", description="Dissipative W-state preparation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("reproduce", parents=[common], help="run a named reference scenario")
    r.add_argument("preset", help=", ".join(sorted(PRESETS)))
    for name, doc in (("simulate", "run one scenario file"), ("sweep", "run a scenario over a 1-2 axis grid"),
                      ("modes", "equilibrium and normal modes of an ion chain")):
        s = sub.add_parser(name, parents=[common], help=doc)
        s.add_argument("config", help="scenario JSON file")
    return p


COMMANDS = {"reproduce": cmd_reproduce, "simulate": cmd_simulate, "sweep": cmd_sweep, "modes": cmd_modes}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.dt is not None and not args.dt > 0:
        print("--dt must be positive", file=sys.stderr)
        return EXIT_USAGE
    if args.nmax is not None and args.nmax < 1:
        print("--nmax must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EvolutionError as exc:
        print(f"run aborted at t = {exc.time * 1e6:.3f} us: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except crystal.CrystalError as exc:
        print(f"crystal error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
