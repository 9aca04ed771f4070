"""Command-line entry point.

Subcommands:

* ``simulate`` -- closed-loop run, trajectory CSV
* ``scan``     -- phase-plane grid scan, grid CSV
* ``validate`` -- sampled assumption checks plus a validity scan, report
* ``compare``  -- one simulation per requested CBF kind, metrics CSV

Exit codes: 0 success, 1 configuration error, 2 truncated run (blow-up or
leaving the domain), 3 validation failure.  Floating-point CSV fields use
nine significant digits; booleans are 0/1; the switching column ``s`` is
populated for the activated backstepping construction and empty otherwise.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import svg as svg_mod
from .analysis import grid_scan, validity_report
from .cbf import RECBF, recbf_validity_condition
from .config import ConfigError, ScenarioConfig, parse_assignments
from .core import check_constraint_regularity, check_relative_degree
from .sim import compute_metrics, simulate

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_TRUNCATED = 2
EXIT_VALIDATION = 3


def _fmt(value: float) -> str:
    """Nine significant digits, plain decimal or exponent as needed."""
    return f"{value:.9g}"


def _write_lines(path, lines):
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as handle:
            handle.write(text)


def _load_config(args, single_cbf: bool = True) -> ScenarioConfig:
    assignments = {}
    if args.config:
        with open(args.config) as handle:
            assignments.update(parse_assignments(handle.read()))
    if args.scenario:
        assignments["scenario"] = args.scenario
    if args.cbf:
        assignments["cbf"] = args.cbf
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        assignments[key] = value
    config = ScenarioConfig.from_assignments(assignments)
    if single_cbf and len(config.cbfs) != 1:
        raise ConfigError(
            f"cbf: this command takes a single construction, got {','.join(config.cbfs)!r}"
        )
    return config


# -- simulate ----------------------------------------------------------------


def _trajectory_csv(scenario, traj):
    n = scenario.system.n
    m = scenario.system.m
    header = (
        "t,"
        + ",".join(f"x{i + 1}" for i in range(n))
        + ","
        + ",".join(f"u{i + 1}" for i in range(m))
        + ",h,psi,s"
    )
    lines = [header]
    has_s = traj.s is not None
    for k in range(len(traj)):
        cells = [_fmt(traj.t[k])]
        cells += [_fmt(v) for v in traj.x[k]]
        cells += [_fmt(v) for v in traj.u[k]]
        cells += [_fmt(traj.h[k]), _fmt(traj.psi[k])]
        cells.append(_fmt(traj.s[k]) if has_s else "")
        lines.append(",".join(cells))
    return lines


def cmd_simulate(args) -> int:
    config = _load_config(args)
    scenario = config.build_scenario()
    kind = config.cbfs[0]
    instance = scenario.make_cbf(kind)
    traj = simulate(
        scenario.system,
        instance,
        scenario.filter_spec(),
        scenario.x0,
        scenario.horizon,
        scenario.dt,
        blow_up_threshold=config.blow_up_threshold,
    )
    _write_lines(args.out, _trajectory_csv(scenario, traj))
    if args.svg:
        svg_path = (args.out or f"{scenario.name}_{kind}") + ".svg"
        series = {"h": traj.h, "psi": traj.psi}
        for i in range(traj.u.shape[1]):
            series[f"u{i + 1}"] = traj.u[:, i]
        svg_mod.line_chart(
            svg_path,
            traj.t,
            series,
            title=f"{scenario.name} / {kind} ({traj.exit_reason})",
            x_label="t [s]",
        )
    if traj.exit_reason != "completed":
        print(f"run truncated: {traj.exit_reason} at t = {traj.t[-1]:g} s", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


# -- scan --------------------------------------------------------------------


def _scan_csv(scenario, scan):
    n = scenario.system.n
    header = (
        ",".join(f"x{i + 1}" for i in range(n))
        + ",h,psi,lgh_norm,margin,s,in_S,in_C,singular,violation"
    )
    lines = [header]
    in_s = scan.in_safe_set
    in_c = scan.in_constraint_set
    sing = scan.singular
    viol = scan.validity_violation
    has_s = scan.s is not None
    for i in range(len(scan)):
        cells = [_fmt(v) for v in scan.x[i]]
        cells += [
            _fmt(scan.h[i]),
            _fmt(scan.psi[i]),
            _fmt(scan.lgh_norm[i]),
            _fmt(scan.margin[i]),
            _fmt(scan.s[i]) if has_s else "",
            str(int(in_s[i])),
            str(int(in_c[i])),
            str(int(sing[i])),
            str(int(viol[i])),
        ]
        lines.append(",".join(cells))
    return lines


def _run_scan(scenario, kind):
    instance = scenario.make_cbf(kind)
    return grid_scan(
        instance,
        scenario.system,
        scenario.window,
        scenario.resolution,
        state_from_axes=scenario.state_from_axes,
        alpha_outer=scenario.alpha_outer,
    )


def cmd_scan(args) -> int:
    config = _load_config(args)
    scenario = config.build_scenario()
    kind = config.cbfs[0]
    scan = _run_scan(scenario, kind)
    _write_lines(args.out, _scan_csv(scenario, scan))
    if args.svg:
        svg_path = (args.out or f"{scenario.name}_{kind}_scan") + ".svg"
        # categories: 0 unsafe, 1 constraint only, 2 safe set, 3 singular, 4 violation
        cats = np.zeros(len(scan), dtype=int)
        cats[scan.in_constraint_set] = 1
        cats[scan.in_safe_set] = 2
        cats[scan.singular] = 3
        cats[scan.validity_violation] = 4
        svg_mod.cell_map(
            svg_path,
            scan.axes,
            cats,
            colors={1: "#f4c7c3", 2: "#c8e6c9", 3: "#555555", 4: "#d62728"},
            title=f"{scenario.name} / {kind} scan",
        )
    return EXIT_OK


# -- validate ----------------------------------------------------------------


def cmd_validate(args) -> int:
    config = _load_config(args)
    scenario = config.build_scenario()
    kind = config.cbfs[0]
    instance = scenario.make_cbf(kind)
    ok = True
    lines = [f"scenario: {scenario.name}, construction: {kind}"]

    rel = check_relative_degree(scenario.output, scenario.system, scenario.assumption_states)
    lines.append(str(rel))
    ok &= rel.ok
    reg = check_constraint_regularity(scenario.output, scenario.assumption_states)
    lines.append(str(reg))
    ok &= reg.ok

    if kind == RECBF:
        condition = recbf_validity_condition(
            instance,
            scenario.system,
            _validity_states(scenario),
        )
        lines.append(str(condition))
        ok &= condition.ok

    scan = _run_scan(scenario, kind)
    report = validity_report(scan)
    lines.append(str(report))
    ok &= report.ok

    lines.append("result: " + ("PASS" if ok else "FAIL"))
    _write_lines(args.out, lines)
    return EXIT_OK if ok else EXIT_VALIDATION


def _validity_states(scenario):
    axes = [np.linspace(lo, hi, 101) for lo, hi in scenario.window]
    states = []
    for a in axes[0]:
        for b in axes[1]:
            states.append(scenario.state_from_axes((a, b)))
    return np.asarray(states)


# -- compare -----------------------------------------------------------------


def cmd_compare(args) -> int:
    config = _load_config(args, single_cbf=False)
    scenario = config.build_scenario()
    n = scenario.system.n
    m = scenario.system.m
    header = (
        "cbf,min_h,min_psi,"
        + ",".join(f"max_abs_u{i + 1}" for i in range(m))
        + ","
        + ",".join(f"max_step_delta_u{i + 1}" for i in range(m))
        + ",blew_up,exit_reason,"
        + ",".join(f"final_x{i + 1}" for i in range(n))
    )
    lines = [header]
    truncated = False
    for kind in config.cbfs:
        instance = scenario.make_cbf(kind)
        traj = simulate(
            scenario.system,
            instance,
            scenario.filter_spec(),
            scenario.x0,
            scenario.horizon,
            scenario.dt,
            blow_up_threshold=config.blow_up_threshold,
        )
        metrics = compute_metrics(traj)
        truncated |= traj.exit_reason != "completed"
        cells = [kind, _fmt(metrics.min_h), _fmt(metrics.min_psi)]
        cells += [_fmt(v) for v in metrics.max_abs_u]
        cells += [_fmt(v) for v in metrics.max_step_delta_u]
        cells.append(str(int(metrics.blew_up)))
        cells.append(metrics.exit_reason)
        cells += [_fmt(v) for v in metrics.final_state]
        lines.append(",".join(cells))
    _write_lines(args.out, lines)
    return EXIT_TRUNCATED if truncated else EXIT_OK


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbftk",
        description="Safety filters and CBF constructions for relative-degree-two constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (
        ("simulate", cmd_simulate),
        ("scan", cmd_scan),
        ("validate", cmd_validate),
        ("compare", cmd_compare),
    ):
        p = sub.add_parser(name)
        p.add_argument("--scenario", choices=("pendulum", "bicycle"))
        p.add_argument("--cbf", help="CBF kind (comma-separated list for compare)")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a configuration key (repeatable)",
        )
        p.add_argument("--config", help="configuration file (flat key = value lines)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--svg", action="store_true", help="also render an SVG chart")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
