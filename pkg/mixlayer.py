#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
mixlayer command line
  mixlayer solve   --m 1 --b 0.5
  mixlayer table   d --m 0.5,1,2
  mixlayer flow    --preset flooded-jet --seed 1,1
  mixlayer phase   --m 1 --a 1
  mixlayer blowup  --m 0.4
"""

import argparse
import logging
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from app_config import SolverConfig, build_config
from blowup_helper import blowup_local_state, default_local_radius, pole_local_form
from exact_solutions import PresetName, flooded_jet_table, preset_problem
from flow_field import (
    FlowGridSpec,
    SimilarityFlow,
    evaluate_field,
    singular_overlay_lines,
    trace_streamline,
    velocity_profiles,
)
from mixlayer_lib import (
    TableSweep,
    base_b,
    base_solution,
    bvp_evaluator,
    check_two_sided_estimates,
    locate_inflection,
    solve_ibvp,
    verify_integral_identities,
)
from mixlayer_types import (
    DomainError,
    MixlayerError,
    MValue,
    Regime,
    Termination,
    classify_regime,
)
from output_writer import DocKind, OutputDoc, report_doc, table_doc, write_doc
from phase_plane import (
    PhaseTerminationKind,
    converged_fit_B,
    f_exact,
    integral_relation_check,
    phase_bounds_check,
    phase_consistency_check,
    solve_phase_cp,
)

logger = logging.getLogger("mixlayer")

LOG_FORMAT = "[%(name)s] %(levelname)s: %(message)s"
FIGURE_STEMS = {
    PresetName.FLOODED_JET: "fig1",
    PresetName.SEPARATION: "fig2",
    PresetName.NEAR_WALL_JET: "fig3",
}
TABLE1_X = (0.75, 1.75, 2.75, 3.75, 4.75)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------

def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def _seed(text: str):
    values = _float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"seed must be 'x,y', got '{text}'")
    return values[0], values[1]


def _m_values(text: str) -> List[str]:
    """'0.5,1,inf' or 'start:stop:step'."""
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got '{text}'") from e
        if not step > 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [f"{start + i * step:.12g}" for i in range(count)]
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixlayer",
                                description="Self-similar mixing-layer solutions and derived flows.")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", dest="output_dir", help="output directory (default: out, env MIXLAYER_OUT)")
    p.add_argument("--format", dest="output_format", choices=["csv", "json"], help="output format")
    p.add_argument("--T", type=float, help="left cutoff tau=-T (default 7)")
    p.add_argument("--rel-tol", type=float, dest="rel_tol", help="integrator relative tolerance")
    p.add_argument("--abs-tol", type=float, dest="abs_tol", help="integrator absolute tolerance")
    p.add_argument("--target-tol", type=float, dest="target_tol", help="shooting target tolerance")
    p.add_argument("--lyapunov-order", type=int, dest="lyapunov_order", help="Lyapunov series order")
    p.add_argument("--farfield-order", type=int, dest="farfield_order", help="far-field series order")
    p.add_argument("--sample-step", type=float, dest="sample_step", help="output sampling step")
    p.add_argument("--workers", type=int, help="worker threads for sweeps and grids")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve for given (m, b) or (m, a)")
    s.add_argument("--m", required=True, help="self-similarity parameter (number, fraction or inf)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--b", type=float, help="far-field amplitude (IBVP, 1/2 < m < inf)")
    g.add_argument("--a", type=float, help="equilibrium depth (BVP, m >= 1/3)")
    s.add_argument("--tau-min", type=float, dest="tau_min", help="profile start (default -T/a)")
    s.add_argument("--tau-max", type=float, dest="tau_max", help="profile end (default 10/a)")

    t = sub.add_parser("table", help="sweep d_m(1) or b_m(1) over m")
    t.add_argument("which", choices=TableSweep.KINDS)
    t.add_argument("--m", required=True, type=_m_values, help="'0.5,1,2' or 'start:stop:step'")

    f = sub.add_parser("flow", help="physical-plane fields, streamlines and profiles")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=[n.value for n in PresetName])
    src.add_argument("--m", help="self-similarity parameter of a computed solution")
    f.add_argument("--b", type=float, help="far-field amplitude (with --m)")
    f.add_argument("--a", type=float, default=1.0, help="equilibrium depth (default 1)")
    f.add_argument("--nu", type=float, default=1.0, help="kinematic viscosity (default 1)")
    f.add_argument("--reflect", action="store_true", help="use -Phi(-tau) (fluid at rest above)")
    f.add_argument("--x-range", type=_float_list, default=[0.25, 5.0], dest="x_range")
    f.add_argument("--y-range", type=_float_list, default=[-5.0, 5.0], dest="y_range")
    f.add_argument("--nx", type=int, default=40)
    f.add_argument("--ny", type=int, default=81)
    f.add_argument("--seed", type=_seed, action="append", default=[], help="streamline seed 'x,y'")
    f.add_argument("--x-end", type=float, dest="x_end", help="streamline end (default: grid x max)")
    f.add_argument("--profiles", type=_float_list, default=list(TABLE1_X), help="x stations for profiles")

    ph = sub.add_parser("phase", help="phase-plane curve f(Phi) = Phi'")
    ph.add_argument("--m", required=True)
    ph.add_argument("--a", type=float, default=1.0)
    ph.add_argument("--phi-max", type=float, dest="phi_max", help="right end in Phi (default 20a)")

    bl = sub.add_parser("blowup", help="local form near a pole")
    bl.add_argument("--m", required=True)
    bl.add_argument("--tau-p", type=float, dest="tau_p", help="pole position for local evaluation")
    bl.add_argument("--c1", type=float, default=0.0)
    bl.add_argument("--c2", type=float, default=0.0)
    bl.add_argument("--taus", type=_float_list, help="tau values for local evaluation")
    return p


def _config_from(args) -> SolverConfig:
    keys = ("output_dir", "output_format", "T", "rel_tol", "abs_tol", "target_tol",
            "lyapunov_order", "farfield_order", "sample_step", "workers")
    return build_config(args.config, **{k: getattr(args, k) for k in keys})


def _write(doc: OutputDoc, cfg: SolverConfig, stem: str) -> str:
    path = write_doc(doc, cfg.output_dir, stem, cfg.output_format)
    print(f"💾 {path}")
    return path


def _params_meta(cfg: SolverConfig, **params) -> Dict[str, str]:
    meta = {f"param_{k}": v for k, v in params.items() if v is not None}
    meta.update({f"cfg_{k}": v for k, v in cfg.to_dict().items()
                 if k not in ("output_dir", "output_format")})
    return meta


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_solve(args, cfg: SolverConfig) -> int:
    m = MValue.parse(args.m)
    if args.b is not None:
        sol = solve_ibvp(m, args.b, cfg)
        evaluator, a, d, b = sol.evaluator, sol.a, sol.d, sol.b
        base = sol.base
    else:
        a = 1.0 if args.a is None else args.a
        evaluator = bvp_evaluator(m, a, cfg)
        base = evaluator.base
        d = a * base.shoot.d
        b = a ** (m.value + 1.0) * base.fit.b if base.fit is not None else None

    tau_min = -cfg.T / a if args.tau_min is None else args.tau_min
    tau_max = 10.0 / a if args.tau_max is None else args.tau_max
    if evaluator.pole is not None:
        tau_max = min(tau_max, evaluator.pole - 1e-3 / a)
    if not tau_max > tau_min:
        raise DomainError(f"empty profile range [{tau_min:g}, {tau_max:g}]")
    taus = np.arange(tau_min, tau_max, cfg.sample_step / a)
    phi, dphi, ddphi = evaluator.state(taus)
    term = (Termination.pole_at(evaluator.pole) if evaluator.pole is not None
            else Termination.completed())
    label = m.label()
    meta = _params_meta(cfg, m=label, a=a, b=b, d=d)
    _write(OutputDoc(DocKind.PROFILE, {'tau': taus, 'phi': phi, 'dphi': dphi, 'ddphi': ddphi},
                     meta, footer=term.describe()), cfg, f"solve_m{label}_profile")

    report = dict(base.shoot.to_dict())
    report.update({'a': a, 'd': d, 'b': b, 'base_d': base.shoot.d})
    identities = verify_integral_identities(base.shoot)
    report.update({f"identity_{k}": v for k, v in identities.items()})
    regime = classify_regime(m)
    if regime is Regime.POLE_BOUNDED_BVP and m.value < 0.5:
        try:
            report.update({f"inflection_{k}": v for k, v in locate_inflection(base.shoot).items()})
        except MixlayerError as e:
            logger.warning("inflection point not located: %s", e)
            report["inflection_message"] = str(e)
    if regime is not Regime.SEPARATION_LIMIT:
        grid = np.linspace(-cfg.T / a, 5.0 / a, 121)
        estimates = check_two_sided_estimates(evaluator, a, grid)
        report.update({f"estimates_{k}": v for k, v in estimates.items()})
    _write(report_doc(report, meta), cfg, f"solve_m{label}_report")

    b_text = "" if b is None else f" b={b:.9g}"
    print(f"✅ m={label}{b_text}: a={a:.9g} d={d:.9g} (regime {regime.value})")
    if evaluator.pole is not None:
        print(f"   pole at tau_p={evaluator.pole:.9g}")
    print(f"   {identities['message']}")
    return 0


def cmd_table(args, cfg: SolverConfig) -> int:
    sweep = TableSweep(args.which, cfg)
    rows = sweep.run(args.m)
    which = args.which
    doc = table_doc(rows, ['m', which, 'note'], _params_meta(cfg, table=which))
    _write(doc, cfg, f"table_{which}")
    for row in rows:
        if row['note']:
            print(f"❌ m={row['m']}: {row['note']}")
        else:
            print(f"✅ m={row['m']}: {which}={row[which]:.9g}")
    return 0


def _flow_source(args, cfg: SolverConfig):
    if args.preset:
        return preset_problem(args.preset, args.a, args.nu), args.preset
    m = MValue.parse(args.m)
    if args.b is not None:
        sol = solve_ibvp(m, args.b, cfg)
        return SimilarityFlow.from_ibvp(sol, args.nu, args.reflect), f"flow_m{m.label()}"
    evaluator = bvp_evaluator(m, args.a, cfg)
    return SimilarityFlow(m, args.nu, evaluator, args.a, reflect=args.reflect), f"flow_m{m.label()}"


def cmd_flow(args, cfg: SolverConfig) -> int:
    source, name = _flow_source(args, cfg)
    stem = FIGURE_STEMS[PresetName.parse(name)] if args.preset else name
    if len(args.x_range) != 2 or len(args.y_range) != 2:
        raise DomainError("--x-range and --y-range take 'min,max'")
    spec = FlowGridSpec(source, args.x_range[0], args.x_range[1], args.nx,
                        args.y_range[0], args.y_range[1], args.ny)
    flow = evaluate_field(spec, workers=cfg.workers)
    _write(OutputDoc(DocKind.FIELD, flow.columns(), flow.metadata), cfg, f"{stem}_field")

    x_end = args.x_range[1] if args.x_end is None else args.x_end
    lines = []
    for seed in args.seed:
        line = trace_streamline(source, seed, x_end, y_bounds=tuple(args.y_range), cfg=cfg)
        lines.append(line)
        print(f"〰️  streamline from ({seed[0]:g}, {seed[1]:g}): psi={line.psi:.6g}, end x={line.x[-1]:.4g} ({line.reason})")
    if lines:
        cols = {
            'line': np.concatenate([np.full(len(l), i, dtype=float) for i, l in enumerate(lines)]),
            'x': np.concatenate([l.x for l in lines]),
            'y': np.concatenate([l.y for l in lines]),
            'psi': np.concatenate([np.full(len(l), l.psi) for l in lines]),
        }
        _write(OutputDoc(DocKind.STREAMLINES, cols, flow.metadata), cfg, f"{stem}_streamlines")

    ys = np.linspace(args.y_range[0], args.y_range[1], args.ny)
    profile_x = [x for x in args.profiles if x > 0]
    cols, meta = velocity_profiles(source, profile_x, ys)
    _write(OutputDoc(DocKind.TABLE, cols, meta), cfg, f"{stem}_profiles")

    if args.preset == PresetName.FLOODED_JET.value:
        rows = flooded_jet_table(TABLE1_X, args.a, args.nu)
        _write(table_doc(rows, ['x', 'y0', 'y_max', 'v_max', 'v_lim', 'v_far'], source.metadata()),
               cfg, "table1")
        for row in rows:
            print(f"   x={row['x']:g}: y0={row['y0']:.6g} y_max={row['y_max']:.6g} "
                  f"v_max={row['v_max']:.6g} v_lim={row['v_lim']:.6g}")
    if isinstance(source, SimilarityFlow):
        overlays = singular_overlay_lines(source, flow.x)
        for kind, (xs, ys_line) in overlays.items():
            _write(OutputDoc(DocKind.STREAMLINES, {'x': xs, 'y': ys_line}, flow.metadata),
                   cfg, f"{stem}_{kind}_line")
    print(f"✅ flow {name}: {flow.u.shape[1]}x{flow.u.shape[0]} grid, {len(lines)} streamline(s)")
    return 0


def cmd_phase(args, cfg: SolverConfig) -> int:
    m = MValue.parse(args.m)
    a = args.a
    phi_max = 20.0 * a if args.phi_max is None else args.phi_max
    phase = solve_phase_cp(m, a, phi_max, cfg)
    label = m.label()
    meta = _params_meta(cfg, m=label, a=a)
    _write(OutputDoc(DocKind.PROFILE, {'phi': phase.phi, 'f': phase.f, 'df': phase.df,
                                       'integral': phase.integral},
                     meta, footer=phase.termination.describe()), cfg, f"phase_m{label}")

    report = dict(phase.to_dict())
    relation = integral_relation_check(phase)
    report['integral_relation_residual'] = relation['max_residual']
    if m.is_infinite or m.value == 0.5:
        exact = f_exact(m, a, phase.phi)
        report['exact_max_deviation'] = float(np.max(np.abs(phase.f - exact)))
        print(f"✅ m={label}: closed-form curve, max deviation {report['exact_max_deviation']:.3e}")
    elif phase.termination.kind is PhaseTerminationKind.BRANCH_POINT:
        print(f"⚠️  m={label}: branch point at Phi={phase.termination.phi_zero:.9g}")
    if classify_regime(m) is Regime.GLOBAL_IBVP:
        bounds = phase_bounds_check(phase)
        report['bounds_violations'] = bounds['violations']
        fit, _ = converged_fit_B(m, a, cfg, phi_max)
        report.update({f"fit_{k}": v for k, v in fit.items()})
        b = base_b(m, cfg) * a ** (m.value + 1.0)
        B_expected = m.value * b ** (1.0 / m.value)
        report['B_expected'] = B_expected
        consistency = phase_consistency_check(base_solution(m, a, cfg).shoot, phase)
        report['consistency_max_deviation'] = consistency['max_deviation']
        if fit['success']:
            print(f"✅ m={label}: B={fit['B']:.9g} vs m*b^(1/m)={B_expected:.9g}")
        else:
            print(f"❌ m={label}: {fit['message']}")
        print(f"   {consistency['message']}")
    _write(report_doc(report, meta), cfg, f"phase_m{label}_report")
    print(f"   {phase.termination.describe()}, {relation['message']}")
    return 0


def cmd_blowup(args, cfg: SolverConfig) -> int:
    m = MValue.parse(args.m)
    form = pole_local_form(m.value)
    label = m.label()
    meta = _params_meta(cfg, m=label)
    _write(report_doc(form.to_dict(), meta), cfg, f"blowup_m{label}")
    if form.beta is not None:
        print(f"✅ m={label}: {form.regime.value}, lambda = {form.alpha:.9g} ± {form.beta:.9g} i")
    else:
        print(f"✅ m={label}: {form.regime.value}, lambda1={form.lambda1:.9g} lambda2={form.lambda2:.9g}"
              + (" (resonant)" if form.resonant else ""))

    if args.taus:
        if args.tau_p is None:
            raise DomainError("--taus needs --tau-p")
        radius = default_local_radius(m.value, cfg.local_radius_factor)
        states = [blowup_local_state(m.value, args.tau_p, args.c1, args.c2, t, radius) for t in args.taus]
        cols = {'tau': np.array(args.taus),
                'phi': np.array([s[0] for s in states]),
                'dphi': np.array([s[1] for s in states]),
                'ddphi': np.array([s[2] for s in states])}
        _write(OutputDoc(DocKind.PROFILE, cols, meta), cfg, f"blowup_m{label}_local")
    return 0


COMMANDS = {
    'solve': cmd_solve,
    'table': cmd_table,
    'flow': cmd_flow,
    'phase': cmd_phase,
    'blowup': cmd_blowup,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format=LOG_FORMAT, force=True)
    try:
        cfg = _config_from(args)
        return COMMANDS[args.command](args, cfg)
    except MixlayerError as e:
        logger.error("%s", e)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
