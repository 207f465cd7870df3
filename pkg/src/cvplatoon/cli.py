"""Command-line interface.

Subcommands: accel, equilibrium, criterion, map, simulate, verify.
Exit codes: 0 success, 1 usage/config error, 2 physics/domain error,
3 collision outcome, 4 verification disagreement.  The CVPLATOON_CONFIG
environment variable supplies a default config path.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .model import DomainError, cv_effect, idm_acceleration
from .report import (
    equilibrium_csv_text,
    fmt,
    map_csv_text,
    render_map_figure,
    render_trajectory_figure,
    render_verify_figure,
    trajectory_csv_text,
    write_text,
)
from .simulation import IndeterminateGrowth, Integrator, Simulator, measure_growth
from .stability import linear_coefficients, stability_lhs, stability_map
from .verify import sample_points, verify_batch

ENV_CONFIG = "CVPLATOON_CONFIG"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_COLLISION = 3
EXIT_DISAGREE = 4


class _UsageError(Exception):
    pass


def _load(args) -> RunConfig:
    path = args.config or os.environ.get(ENV_CONFIG) or None
    return load_config(path)


def _parse_floats(text: str, flag: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise _UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _parse_neighbors(values) -> List[tuple]:
    out = []
    for raw in values or []:
        parts = raw.split(":")
        if len(parts) != 3:
            raise _UsageError(f"--neighbor expects gap:v:a, got {raw!r}")
        try:
            gap, v, a = (float(p) for p in parts)
        except ValueError:
            raise _UsageError(f"--neighbor expects numbers, got {raw!r}") from None
        out.append((gap, v, a))
    return out


def cmd_accel(args) -> int:
    cfg = _load(args)
    p, cp = cfg.idm, cfg.connectivity
    if args.kv is not None:
        cp = replace(cp, kv=args.kv)
    if args.ka is not None:
        cp = replace(cp, ka=args.ka)
    if args.gap <= 0.0:
        raise DomainError("field 'gap' must be > 0")
    if args.speed < 0.0:
        raise DomainError("field 'speed' must be >= 0")
    if args.leader_speed < 0.0:
        raise DomainError("field 'leader-speed' must be >= 0")
    neighbors = _parse_neighbors(args.neighbor)
    if any(n[0] <= 0.0 for n in neighbors):
        raise DomainError("field 'neighbor' gap must be > 0")
    a_idm = float(idm_acceleration(args.gap, args.speed,
                                   args.speed - args.leader_speed, p))
    a_cv = cv_effect(args.speed, neighbors, cp)
    print(f"IDM term  {a_idm:.9f}")
    print(f"CV term   {a_cv:.9f}")
    print(f"total     {a_idm + a_cv:.9f}")
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    cfg = _load(args)
    if args.speeds:
        speeds = _parse_floats(args.speeds, "--speeds")
    elif args.speed_range:
        parts = args.speed_range.split(":")
        if len(parts) != 3:
            raise _UsageError("--speed-range expects min:max:step")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0.0 or hi < lo:
            raise _UsageError("--speed-range expects step > 0 and max >= min")
        n = int(round((hi - lo) / step)) + 1
        speeds = [float(v) for v in np.linspace(lo, hi, max(n, 1))]
    else:
        raise _UsageError("equilibrium requires --speeds or --speed-range")
    text = equilibrium_csv_text(speeds, cfg.idm)
    if args.output:
        write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_criterion(args) -> int:
    cfg = _load(args)
    p = cfg.idm
    if args.a_m is not None:
        p = replace(p, a0=args.a_m)
    if args.t_d is not None:
        p = replace(p, T=args.t_d)
    v_e = args.v_e if args.v_e is not None else cfg.grid.v_e
    m_cv = args.m if args.m is not None else cfg.grid.m_cv
    spacing = args.cv_spacing if args.cv_spacing is not None else cfg.grid.cv_spacing
    coeffs = linear_coefficients(p, cfg.connectivity, v_e, spacing, m_cv)
    lhs = stability_lhs(coeffs)
    verdict = "marginal" if abs(lhs) <= 1e-12 else ("stable" if lhs < 0.0 else "unstable")
    print(f"v_e        {fmt(v_e)}")
    print(f"g1         {fmt(coeffs.g1)}")
    print(f"g2         {fmt(coeffs.g2)}")
    print(f"g3         {fmt(coeffs.g3)}")
    print(f"f4         {fmt(coeffs.f4)}")
    print(f"f5         {fmt(coeffs.f5)}")
    print(f"weight_sum {fmt(coeffs.weight_sum)}")
    print(f"t_react    {fmt(coeffs.t_react)}")
    print(f"lhs        {fmt(lhs)}")
    print(f"verdict    {verdict}")
    return EXIT_OK


def cmd_map(args) -> int:
    cfg = _load(args)
    spec = cfg.grid_spec()
    if len(spec.a_m_values()) == 0 or len(spec.t_d_values()) == 0:
        raise _UsageError("map: empty grid")
    overlay = cfg.grid.overlay_m
    if args.overlay_m is not None:
        overlay = tuple(int(v) for v in _parse_floats(args.overlay_m, "--overlay-m"))
    m_list = sorted(set((cfg.grid.m_cv,) + tuple(overlay)))
    grids = {m: stability_map(replace(spec, m_cv=m), workers=args.workers)
             for m in m_list}
    text = map_csv_text(grids, cfg.grid.m_cv)
    write_text(args.csv, text)
    for line in text.splitlines():
        if line.startswith("# "):
            print(line[2:])
    if args.svg:
        render_map_figure(grids, args.svg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    sim_cfg = cfg.sim
    if args.duration is not None:
        sim_cfg = replace(sim_cfg, duration=args.duration)
    if args.dt is not None:
        sim_cfg = replace(sim_cfg, dt=args.dt)
    if args.integrator is not None:
        sim_cfg = replace(sim_cfg, integrator=Integrator(args.integrator))
    traj = Simulator(cfg.scenario_spec(), sim_cfg).run()
    write_text(args.csv, trajectory_csv_text(traj))
    if args.svg:
        render_trajectory_figure(traj, args.svg)
    try:
        report = measure_growth(traj)
        print(f"classification: {report.classification.value}")
        print(f"rho: {fmt(report.rho)}")
    except IndeterminateGrowth:
        print("classification: indeterminate")
        print("rho: nan")
    if traj.collision is not None:
        c = traj.collision
        print(f"collision: t={fmt(c.time)} follower={c.follower} leader={c.leader}")
        return EXIT_COLLISION
    print("collision: none")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    m_values = [int(v) for v in _parse_floats(args.m_values, "--m-values")]
    if args.points is not None:
        points = []
        for raw in args.points.split(","):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(":")
            if len(parts) != 2:
                raise _UsageError(f"--points expects a_m:T_d pairs, got {raw!r}")
            points.append((float(parts[0]), float(parts[1])))
    else:
        try:
            n_a, n_t = (int(v) for v in args.samples.split("x"))
        except ValueError:
            raise _UsageError("--samples expects the form NAxNT, e.g. 5x4") from None
        points = sample_points(cfg, n_a, n_t)
    if not points:
        raise _UsageError("verify: empty point list")

    result = verify_batch(cfg, m_values=m_values, points=points,
                          margin=args.margin,
                          integrator=Integrator(args.integrator),
                          workers=args.workers)
    lines = ["a_m,T_d,M,lhs,analytic,simulated,rho,retained,agree"]
    for pt in result.points:
        lines.append(f"{fmt(pt.a_m)},{fmt(pt.t_d)},{pt.m},{fmt(pt.lhs)},"
                     f"{pt.analytic},{pt.simulated},{fmt(pt.rho)},"
                     f"{str(pt.retained).lower()},{str(pt.agree).lower()}")
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if args.csv:
        write_text(args.csv, table)
    if args.svg:
        render_verify_figure(result.points, args.svg)
    if result.retained == 0:
        print("agreement: inconclusive (every point filtered as near-boundary)")
        return EXIT_DOMAIN
    rate = 100.0 * result.agreed / result.retained
    print(f"agreement: {result.agreed}/{result.retained} retained points "
          f"({rate:.1f}%), {result.excluded} excluded near boundary")
    return EXIT_OK if result.agreed == result.retained else EXIT_DISAGREE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvplatoon",
        description="Mixed CV/HV platoon model: acceleration law, string-stability "
                    "criterion, stability maps, and time-domain simulation.")
    parser.add_argument("--config", help=f"YAML config path (default: ${ENV_CONFIG})")
    sub = parser.add_subparsers(dest="command", required=True)

    p_accel = sub.add_parser("accel", help="acceleration breakdown for one vehicle")
    p_accel.add_argument("--gap", type=float, required=True)
    p_accel.add_argument("--speed", type=float, required=True)
    p_accel.add_argument("--leader-speed", type=float, required=True)
    p_accel.add_argument("--neighbor", action="append",
                         help="connected predecessor as gap:v:a (repeatable)")
    p_accel.add_argument("--kv", type=float)
    p_accel.add_argument("--ka", type=float)
    p_accel.set_defaults(func=cmd_accel)

    p_eq = sub.add_parser("equilibrium", help="speed/equilibrium-gap table")
    p_eq.add_argument("--speeds", help="comma-separated speeds (m/s)")
    p_eq.add_argument("--speed-range", help="min:max:step")
    p_eq.add_argument("--output", help="CSV file (default stdout)")
    p_eq.set_defaults(func=cmd_equilibrium)

    p_cr = sub.add_parser("criterion", help="criterion value at one point")
    p_cr.add_argument("--v-e", type=float)
    p_cr.add_argument("--m", type=int)
    p_cr.add_argument("--cv-spacing", type=int)
    p_cr.add_argument("--a-m", type=float)
    p_cr.add_argument("--t-d", type=float)
    p_cr.set_defaults(func=cmd_criterion)

    p_map = sub.add_parser("map", help="stability map CSV + SVG diagram")
    p_map.add_argument("--csv", required=True)
    p_map.add_argument("--svg")
    p_map.add_argument("--overlay-m", help="comma-separated M values for extra curves")
    p_map.add_argument("--workers", type=int, default=1)
    p_map.set_defaults(func=cmd_map)

    p_sim = sub.add_parser("simulate", help="run the scenario; trajectory CSV + summary")
    p_sim.add_argument("--csv", required=True)
    p_sim.add_argument("--svg")
    p_sim.add_argument("--duration", type=float)
    p_sim.add_argument("--dt", type=float)
    p_sim.add_argument("--integrator", choices=["euler", "heun"])
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="criterion vs simulation agreement report")
    p_ver.add_argument("--m-values", default="0,2")
    p_ver.add_argument("--samples", default="5x4", help="sample grid NAxNT")
    p_ver.add_argument("--points", help="explicit a_m:T_d pairs, comma-separated")
    p_ver.add_argument("--margin", type=float, default=0.1)
    p_ver.add_argument("--integrator", choices=["euler", "heun"], default="heun")
    p_ver.add_argument("--workers", type=int, default=1)
    p_ver.add_argument("--csv")
    p_ver.add_argument("--svg")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
