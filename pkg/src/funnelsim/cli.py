"""Command-line front end: run scenarios and operator probes.

    funnelsim run paper-sec4 --out results --svg
    funnelsim run my_scenario.cfg --dt 0.002
    funnelsim probe delay causality --seed 7

Targets are preset names (paper-sec4, dirac0, delay, bi-form-demo) or paths
to INI-style config files with sections [plant], [operator], [controller],
[reference], [sim].  Unknown sections or keys are errors.  Runs write
``trace.csv`` (fixed column schema, 17 significant digits) and
``report.txt`` (flat key=value lines) plus an optional ``plot.svg``.

Exit codes: 0 success, 2 config error, 3 inadmissible initial condition,
4 step collapse, 5 verification failure, 6 causality counterexample.
"""

import argparse
import configparser
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import svgfig
from .controller import ControllerConfig, ConstReference, CosReference, PolyReference
from .funnel import ConstFunnel, ExpShiftFunnel, FunnelStack
from .operators import (
    ComposedOperator,
    ConvolutionOperator,
    LinearObservation,
    LTIInternal,
    Measure,
    TransportPDE,
    causality_suite,
    expsqrt_density,
    load_density,
    probe_bibo,
    probe_lipschitz,
)
from .presets import PRESETS, build_preset
from .sim import (
    AffineDrift,
    ConstantGain,
    InadmissibleInitialCondition,
    Plant,
    Scenario,
    SinDisturbance,
    StepCollapse,
    StepDisturbance,
    ZeroDisturbance,
    simulate,
    verify_run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INADMISSIBLE = 3
EXIT_COLLAPSE = 4
EXIT_VERIFY = 5
EXIT_CAUSALITY = 6


class ConfigError(ValueError):
    pass


_SECTION_KEYS = {
    "plant": {"f", "gamma", "h", "y0", "disturbance"},
    "operator": {"kind", "atoms", "density", "c", "b", "n", "panels",
                 "q", "r", "s", "eta0", "passthrough", "w1", "w2"},
    "controller": {"r", "eps"} | {f"phi_{i}" for i in range(8)},
    "reference": {"kind", "amp", "omega", "phase", "value", "coeffs"},
    "sim": {"dt", "horizon", "integrator", "decimation", "max_halvings"},
}


def _parse_matrix(text):
    rows = [r for r in text.strip().split(";") if r.strip()]
    return np.array(
        [[float(v) for v in r.replace(",", " ").split()] for r in rows]
    )


def _parse_vector(text):
    return np.array([float(v) for v in text.replace(",", " ").split()])


def _parse_atoms(text):
    atoms = []
    for chunk in text.strip().strip('"').split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        loc, _, wgt = chunk.partition(":")
        atoms.append((float(loc), float(wgt)))
    return tuple(atoms)


def read_config(path):
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#",))
    found = parser.read(path)
    if not found:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        allowed = _SECTION_KEYS[section]
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    return parser


def _build_measure(sec):
    atoms = _parse_atoms(sec.get("atoms", "")) if "atoms" in sec else ()
    density_spec = sec.get("density", "none").strip()
    panels = int(sec.get("panels", "64"))
    if density_spec in ("none", ""):
        density = None
    elif density_spec == "expsqrt":
        density = expsqrt_density()
    elif density_spec.startswith("file:"):
        density = load_density(density_spec[5:])
    else:
        raise ConfigError(f"unknown density spec '{density_spec}'")
    try:
        return Measure(atoms=atoms, density=density, panels_per_unit=panels)
    except ValueError as exc:
        raise ConfigError(f"invalid measure: {exc}") from exc


def build_operator(parser, dt, horizon, input_dim=1):
    sec = parser["operator"] if parser.has_section("operator") else {}
    kind = sec.get("kind", "convolution").strip()
    if kind == "convolution":
        measure = _build_measure(sec)
        return ConvolutionOperator(measure, input_dim=input_dim,
                                   panels_per_unit=int(sec.get("panels", "64")))
    if kind == "transport":
        measure = _build_measure(sec)
        speed = float(sec.get("c", "1.0"))
        # default domain wide enough that nothing reaches the boundary cut
        width = float(sec.get("b", str(speed * horizon)))
        if "n" in sec:
            cell = width / int(sec["n"])
        else:
            cell = speed * dt  # Courant number exactly 1
        try:
            return TransportPDE(measure, speed=speed, width=width, cell=cell,
                                dt_max=dt, input_dim=input_dim)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "lti":
        try:
            Q = _parse_matrix(sec["q"])
            R = _parse_matrix(sec["r"])
            S = _parse_matrix(sec["s"])
        except KeyError as exc:
            raise ConfigError(f"lti operator needs key {exc}") from exc
        eta0 = _parse_vector(sec["eta0"]) if "eta0" in sec else None
        if R.shape[1] != input_dim:
            raise ConfigError(
                f"lti R has {R.shape[1]} input columns, plant provides {input_dim}"
            )
        return LTIInternal(Q, R, S, eta0)
    if kind == "composed":
        measure = _build_measure(sec)
        inner = ConvolutionOperator(measure, input_dim=input_dim)
        pt_spec = sec.get("passthrough", "identity").strip()
        if pt_spec == "identity":
            passthrough = "identity"
        elif pt_spec.startswith("delay:"):
            passthrough = ("delay", float(pt_spec[6:]))
        else:
            raise ConfigError(f"unknown passthrough '{pt_spec}'")
        W1 = _parse_matrix(sec["w1"]) if "w1" in sec else np.zeros((1, input_dim))
        W2 = _parse_matrix(sec["w2"]) if "w2" in sec else np.ones((1, 1))
        return ComposedOperator(passthrough, inner, LinearObservation(W1, W2))
    raise ConfigError(f"unknown operator kind '{kind}'")


def _build_funnel(spec):
    family, _, params = spec.strip().partition(":")
    vals = [float(v) for v in params.split(",")] if params else []
    if family == "expshift":
        if len(vals) != 3:
            raise ConfigError("expshift funnel needs three parameters a,b,c")
        return ExpShiftFunnel(*vals)
    if family == "const":
        if len(vals) != 1:
            raise ConfigError("const funnel needs one parameter lam")
        return ConstFunnel(vals[0])
    raise ConfigError(f"unknown funnel family '{family}'")


def _build_reference(parser):
    sec = parser["reference"] if parser.has_section("reference") else {}
    kind = sec.get("kind", "cos").strip()
    if kind == "cos":
        return CosReference(
            float(sec.get("amp", "1.0")),
            float(sec.get("omega", "1.0")),
            float(sec.get("phase", "0.0")),
        )
    if kind == "const":
        return ConstReference(float(sec.get("value", "0.0")))
    if kind == "poly":
        return PolyReference(_parse_vector(sec.get("coeffs", "0")))
    raise ConfigError(f"unknown reference kind '{kind}'")


def _build_disturbance(spec):
    family, _, params = spec.strip().partition(":")
    vals = [float(v) for v in params.split(",")] if params else []
    if family == "zero":
        return ZeroDisturbance(1)
    if family == "sin":
        return SinDisturbance(*vals)
    if family == "step":
        return StepDisturbance(*vals)
    raise ConfigError(f"unknown disturbance '{spec}'")


def scenario_from_config(parser, dt_override=None, horizon_override=None,
                         integrator_override=None):
    """Assemble a Scenario from a parsed config (single-output plants)."""
    sim_sec = parser["sim"] if parser.has_section("sim") else {}
    dt = dt_override if dt_override is not None else float(sim_sec.get("dt", "0.005"))
    horizon = (horizon_override if horizon_override is not None
               else float(sim_sec.get("horizon", "10.0")))
    integrator = (integrator_override if integrator_override is not None
                  else sim_sec.get("integrator", "rk4").strip())

    ctl_sec = parser["controller"] if parser.has_section("controller") else {}
    r = int(ctl_sec.get("r", "1"))
    funnels = []
    for i in range(r):
        key = f"phi_{i}"
        if key not in ctl_sec:
            raise ConfigError(f"[controller] is missing {key} for r={r}")
        funnels.append(_build_funnel(ctl_sec[key]))
    try:
        stack = FunnelStack(funnels)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    guard = float(ctl_sec.get("eps", "1e-12"))

    operator = build_operator(parser, dt, horizon, input_dim=r)

    plant_sec = parser["plant"] if parser.has_section("plant") else {}
    f_spec = plant_sec.get("f", "affine:0,0,1").strip()
    if not f_spec.startswith("affine:"):
        raise ConfigError("plant drift must be 'affine:F0,D,W'")
    try:
        f0, d_coef, w_coef = (float(v) for v in f_spec[7:].split(","))
    except ValueError as exc:
        raise ConfigError(f"bad affine drift spec '{f_spec}'") from exc
    drift = AffineDrift([f0], [[d_coef]], [[w_coef]])
    gamma = float(plant_sec.get("gamma", "1.0"))
    y0 = _parse_vector(plant_sec.get("y0", " ".join(["0"] * r)))
    if y0.shape[0] != r:
        raise ConfigError(f"y0 needs {r} entries (one per derivative order)")
    if operator.output_dim != 1:
        raise ConfigError("config-built plants require a scalar operator output")
    try:
        plant = Plant(
            r=r,
            m=1,
            drift=drift,
            gain_map=ConstantGain([[gamma]]),
            disturbance=_build_disturbance(plant_sec.get("disturbance", "zero")),
            operator=operator,
            initial_state=y0.reshape(r, 1),
            h=float(plant_sec.get("h", "0.0")),
        )
        return Scenario(
            plant=plant,
            controller=ControllerConfig(stack, guard=guard),
            reference=_build_reference(parser),
            t_end=horizon,
            dt=dt,
            integrator=integrator,
            decimation=int(sim_sec.get("decimation", "1")),
            max_halvings=int(sim_sec.get("max_halvings", "20")),
        )
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(target, dt=None, horizon=None, integrator=None):
    if target in PRESETS:
        return build_preset(target, dt=dt, horizon=horizon, integrator=integrator)
    return scenario_from_config(read_config(target), dt, horizon, integrator)


# --------------------------------------------------------------------------
# outputs
# --------------------------------------------------------------------------

def _g17(x):
    return f"{x:.17g}"


def trace_header(m, q, r):
    cols = ["t"]
    cols += [f"y_{j + 1}" for j in range(m)]
    cols += [f"yref_{j + 1}" for j in range(m)]
    cols += [f"u_{j + 1}" for j in range(m)]
    cols += [f"w_{j + 1}" for j in range(q)]
    cols += [f"e{i}norm" for i in range(r)]
    cols += [f"k{i}" for i in range(r)]
    cols += [f"rad{i}" for i in range(r)]
    return ",".join(cols)


def write_trace_csv(path, trace, m, q, r):
    with open(path, "w", newline="\n") as fh:
        fh.write(trace_header(m, q, r) + "\n")
        for row in trace:
            vals = [row.t]
            vals += list(row.y) + list(row.y_ref) + list(row.u) + list(row.w)
            vals += list(row.e_norms) + list(row.gains) + list(row.radii)
            fh.write(",".join(_g17(v) for v in vals) + "\n")


def write_plot_svg(path, trace):
    ts = [row.t for row in trace]
    err = [float(np.linalg.norm(row.y - row.y_ref)) for row in trace]
    rad = [row.radii[0] for row in trace]
    u = [float(row.u[0]) for row in trace]
    panels = [
        svgfig.Panel(
            [
                svgfig.Series(ts, rad, color="#d62728", dash="6,3",
                              label="funnel boundary"),
                svgfig.Series(ts, err, color="#1f77b4", label="|e|"),
            ],
            title="tracking error inside the performance funnel",
        ),
        svgfig.Panel(
            [svgfig.Series(ts, u, color="#2ca02c", label="u")],
            title="control input",
        ),
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write(svgfig.render_panels(panels))


def default_out_dir(args_out):
    if args_out:
        return args_out
    return os.environ.get("FUNNELSIM_OUT", "out")


def run_one(target, out_dir, dt=None, horizon=None, integrator=None,
            svg=False):
    """Run a single target; returns the exit code."""
    try:
        sc = load_scenario(target, dt, horizon, integrator)
    except (ConfigError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(out_dir, exist_ok=True)
    trace_path = os.path.join(out_dir, "trace.csv")
    report_path = os.path.join(out_dir, "report.txt")
    m, q, r = sc.plant.m, sc.plant.operator.output_dim, sc.plant.r
    try:
        trace, report = simulate(sc)
    except InadmissibleInitialCondition as exc:
        print(f"inadmissible initial condition: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except StepCollapse as exc:
        write_trace_csv(trace_path, exc.trace, m, q, r)
        with open(report_path, "w", newline="\n") as fh:
            fh.write(exc.report.as_text())
            fh.write("step_collapse=true\n")
        print(f"step collapse: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    verdict = verify_run(trace, report)
    write_trace_csv(trace_path, trace, m, q, r)
    with open(report_path, "w", newline="\n") as fh:
        fh.write(report.as_text())
        fh.write(verdict.as_text())
    if svg:
        write_plot_svg(os.path.join(out_dir, "plot.svg"), trace)
    print(f"{target}: steps={report.steps} sup|u|={report.sup_u:.4g} "
          f"min_margin={np.min(report.min_margins):.4g} "
          f"verified={verdict.passed}")
    return EXIT_OK if verdict.passed else EXIT_VERIFY


def _run_one_star(packed):
    return run_one(*packed)


def probe_one(target, probe, seed, out=None):
    """Run an operator probe for a target; prints key=value lines."""
    try:
        if target in PRESETS:
            sc = build_preset(target)
            op = sc.plant.operator
        else:
            parser = read_config(target)
            sim_sec = parser["sim"] if parser.has_section("sim") else {}
            dt = float(sim_sec.get("dt", "0.005"))
            horizon = float(sim_sec.get("horizon", "10.0"))
            op = build_operator(parser, dt, horizon)
    except (ConfigError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    lines = [f"probe={probe}", f"target={target}", f"seed={seed}"]
    code = EXIT_OK
    if probe == "causality":
        rep = causality_suite(op, trials=100, seed=seed)
        lines += [
            f"trials={rep.trials}",
            f"passes={rep.passes}",
            f"max_prefix_deviation={rep.max_prefix_deviation:.3e}",
            f"verdict={'pass' if rep.ok else 'fail'}",
        ]
        if not rep.ok:
            lines.append(f"counterexample_trial={rep.counterexample_seed}")
            code = EXIT_CAUSALITY
    elif probe == "bibo":
        rep = probe_bibo(op, c1=1.0, trials=40, seed=seed)
        lines += [
            f"c1={rep.c1:.17g}",
            f"trials={rep.trials}",
            f"c2_estimate={rep.c2_estimate:.17g}",
            f"worst_family={rep.worst_family}",
        ]
    elif probe == "lipschitz":
        rep = probe_lipschitz(op, t=1.0, tau=1.0, delta=0.5, trials=30, seed=seed)
        lines += [
            f"estimate={rep.estimate:.17g}",
            f"pairs_used={rep.pairs_used}",
            f"trials={rep.trials}",
        ]
    else:
        print(f"config error: unknown probe '{probe}'", file=sys.stderr)
        return EXIT_CONFIG
    text = "\n".join(lines)
    print(text)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, f"probe_{probe}.txt"), "w", newline="\n") as fh:
            fh.write(text + "\n")
    return code


def main(argv=None):
    ap = argparse.ArgumentParser(prog="funnelsim", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="simulate one or more targets")
    runp.add_argument("targets", nargs="+",
                      help=f"preset ({', '.join(sorted(PRESETS))}) or config path")
    runp.add_argument("--out", default=None, help="output directory "
                      "(default $FUNNELSIM_OUT or ./out)")
    runp.add_argument("--dt", type=float, default=None)
    runp.add_argument("--horizon", type=float, default=None)
    runp.add_argument("--integrator", choices=("euler", "rk4"), default=None)
    runp.add_argument("--svg", action="store_true", help="also write plot.svg")
    runp.add_argument("--jobs", type=int, default=1,
                      help="parallel workers for multiple targets")
    runp.add_argument("--seed", type=int, default=0, help="accepted for "
                      "interface symmetry; runs are deterministic")

    probep = sub.add_parser("probe", help="run an operator probe")
    probep.add_argument("target", help="preset name or config path")
    probep.add_argument("probe", choices=("causality", "bibo", "lipschitz"))
    probep.add_argument("--seed", type=int, default=0)
    probep.add_argument("--out", default=None)

    args = ap.parse_args(argv)

    if args.command == "probe":
        return probe_one(args.target, args.probe, args.seed, args.out)

    base_out = default_out_dir(args.out)
    multi = len(args.targets) > 1
    jobs = []
    for target in args.targets:
        stem = os.path.splitext(os.path.basename(target))[0]
        out_dir = os.path.join(base_out, stem) if multi else base_out
        jobs.append((target, out_dir, args.dt, args.horizon, args.integrator,
                     args.svg))
    if args.jobs > 1 and multi:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_one_star, jobs))
    else:
        codes = [_run_one_star(j) for j in jobs]
    return max(codes)


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
