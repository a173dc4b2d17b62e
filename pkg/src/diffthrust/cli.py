"""Command-line entry point: ``diffthrust <subcommand> [options]``.

Every subcommand writes its CSV/text outputs plus ``manifest.json`` into
``--output-dir``. Failures print one JSON object ``{"error": category,
"message": ...}`` on stderr and exit with the category's status code.
"""

import argparse
import hashlib
import json
import math
import subprocess
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .aircraft import (
    StateSpaceModel, canonical_models, damaged_model, dimensionalize,
    format_modal_table, modal_analysis,
)
from .config import ConfigError, load_config, parse_config
from .controllers import design_lqr, mrac_config
from .integrate import SimulationError
from .numerics import NumericsError
from .propulsion import step_response
from .robustness import UncertaintySpec, run_monte_carlo
from .simulator import CSV_UNITS, Scenario, ScenarioKind, run_lqr, run_mrac, run_open_loop, settle_time

EXIT_CODES = {
    "config": 3,
    "io": 4,
    "precondition": 5,
    "numerics": 6,
    "simulation": 7,
}

ENGINE_CSV_UNITS = {"time_s": "s", "command_lbf": "lbf", "available_lbf": "lbf"}


class CliError(Exception):
    def __init__(self, category, message):
        super().__init__(message)
        self.category = category


def version_string():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt_matrix(m, name):
    m = np.atleast_2d(m)
    rows = [" ".join(f"{x:>12.5g}" for x in row) for row in m]
    return f"{name} =\n" + "\n".join("  " + r for r in rows)


def _poles_text(poles):
    return ", ".join(f"{p.real:.5g}{p.imag:+.5g}j" if p.imag else f"{p.real:.5g}" for p in poles)


class Run:
    """Shared state for one invocation: config, plant, output bookkeeping."""

    def __init__(self, args):
        self.args = args
        self.config = load_config(args.config)
        self.out = Path(args.output_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
            probe = self.out / ".write-test"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise CliError("io", f"output directory {self.out} is not writable: {exc}") from None
        self.outputs = []
        self.manifest = {
            "subcommand": args.subcommand,
            "argv": sys.argv[1:] if args.argv is None else list(args.argv),
            "version": version_string(),
            "config_path": self.config.source,
        }
        raw = Path(self.config.source).read_bytes()
        self.manifest["config_sha256"] = hashlib.sha256(raw).hexdigest()
        self.manifest["config_values"] = parse_config(raw.decode(), self.config.source)

    def plant(self):
        if self.args.plant == "published":
            return canonical_models()[1]
        c = self.config
        return damaged_model(c.nominal_derivs, c.damaged_inertia, c.geometry, c.trim,
                             thrust_scale=c.factor)

    def path(self, name):
        p = self.out / name
        self.outputs.append(name)
        return p

    def figure(self, fn, name, *a, **kw):
        if not self.args.no_plots:
            fn(*a, path=self.path(name), **kw)

    def finish(self, **extra):
        self.manifest.update(extra)
        self.manifest["outputs"] = self.outputs
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, ScenarioKind):
        return o.value
    raise TypeError(type(o).__name__)


def _scenario(args, kind):
    try:
        return Scenario(kind=kind, duration=args.duration, dt=args.dt,
                        aileron_step=math.radians(args.aileron_step),
                        rudder_step=math.radians(args.rudder_step),
                        engine_in_loop=getattr(args, "engine_in_loop", False))
    except ValueError as exc:
        raise CliError("precondition", str(exc)) from None


def _trace_summary(trace):
    en = trace.error_norm
    lines = [
        f"final time        {trace.t[-1]:.4g} s" + ("  (diverged)" if trace.diverged else ""),
        f"peak |e|          {np.nanmax(en):.6g}",
        f"final |e|         {en[-1]:.6g}",
        f"settle (1% peak)  {settle_time(trace.t, en):.4g} s",
        f"aileron peak      {math.degrees(trace.aileron_cmd[np.nanargmax(np.abs(trace.aileron_cmd))]):.4g} deg",
        f"aileron final     {math.degrees(trace.aileron_cmd[-1]):.4g} deg",
        f"dT peak           {trace.dT_effort[np.nanargmax(np.abs(trace.dT_effort))]:.6g} lbf",
        f"dT final          {trace.dT_effort[-1]:.6g} lbf",
    ]
    return "\n".join(lines)


def _trace_outputs(run, trace, stem, reference=True):
    from . import plotting
    trace.to_csv(run.path(f"{stem}.csv"))
    run.figure(plotting.state_history, f"{stem}_states.png", trace, reference=reference)
    if reference:
        run.figure(plotting.tracking_error, f"{stem}_error.png", trace)
    run.figure(plotting.control_effort, f"{stem}_effort.png", trace)


def cmd_analyze(run):
    from . import plotting
    c = run.config
    nominal, damaged = canonical_models()
    text = [
        _fmt_matrix(nominal.a, "A (nominal)"), _fmt_matrix(nominal.b, "B (nominal)"),
        _fmt_matrix(damaged.a, "A (damaged)"), _fmt_matrix(damaged.b, "B (damaged)"),
        "", "modes, nominal", format_modal_table(modal_analysis(nominal)),
        "", "modes, damaged", format_modal_table(modal_analysis(damaged)),
    ]
    derived = dimensionalize(c.nominal_derivs, c.inertia, c.geometry, c.trim)
    derived_d = damaged_model(c.nominal_derivs, c.damaged_inertia, c.geometry, c.trim,
                              thrust_scale=c.factor)
    text += [
        "", "modes, nominal (built from configuration derivatives)",
        format_modal_table(modal_analysis(derived)),
        "", "modes, damaged (built from configuration derivatives)",
        format_modal_table(modal_analysis(derived_d)),
        "",
        f"dynamic pressure     {c.trim.q_bar:.6g} lbf/ft^2",
        f"conversion factor    {c.factor:.6g} lbf/rad",
        f"1 deg rudder         {c.factor * math.pi / 180:.6g} lbf",
    ]
    report = "\n".join(text) + "\n"
    print(report, end="")
    run.path("analysis.txt").write_text(report)
    run.figure(plotting.pole_map, "poles.png",
               {"nominal": modal_analysis(nominal), "damaged": modal_analysis(damaged)})
    run.finish(conversion_factor_lbf_per_rad=c.factor, q_bar_psf=c.trim.q_bar)


def cmd_engine_step(run):
    from . import plotting
    a = run.args
    eng = run.config.engine
    command = eng.T_max if a.command is None else a.command
    try:
        tr = step_response(eng, command, a.duration, a.dt, rate_limited=a.rate_limited)
    except ValueError as exc:
        raise CliError("precondition", str(exc)) from None
    with open(run.path("engine_step.csv"), "w") as fh:
        fh.write("time_s,command_lbf,available_lbf\n")
        for t, cm, av in tr.rows():
            fh.write(f"{float(t)!r},{float(cm)!r},{float(av)!r}\n")
    print(f"final thrust {tr.available[-1]:.6g} lbf of {eng.T_max:.6g} lbf "
          f"({tr.available[-1] / eng.T_max:.4%}); peak slope {eng.peak_slope:.6g} lbf/s")
    run.figure(plotting.engine_response, "engine_step.png", tr)
    run.finish(engine=asdict(eng), command_lbf=command, duration_s=a.duration, dt_s=a.dt,
               rate_limited=a.rate_limited, csv_units=ENGINE_CSV_UNITS)


def cmd_openloop(run):
    sc = _scenario(run.args, ScenarioKind.OPEN_LOOP)
    trace = run_open_loop(run.plant(), sc, factor=run.config.factor)
    x = np.abs(trace.damaged_state[-1])
    print(f"final |state| {', '.join(f'{v:.4g}' for v in x)}"
          + ("  (diverged)" if trace.diverged else ""))
    _trace_outputs(run, trace, "openloop", reference=False)
    run.finish(scenario=asdict(sc), plant=run.args.plant, csv_units=CSV_UNITS)


def _design(run):
    try:
        design = design_lqr(run.plant())
        return design, mrac_config(design)
    except NumericsError as exc:
        raise CliError("numerics", str(exc)) from None


def cmd_lqr(run):
    sc = _scenario(run.args, ScenarioKind.LQR_CLOSED_LOOP)
    design, cfg = _design(run)
    print(_fmt_matrix(design.k, "K"))
    print(_fmt_matrix(design.a_m, "A_m"))
    print("closed-loop poles", _poles_text(modal_analysis(design.a_m).poles))
    trace = run_lqr(sc, design, cfg, run.config.factor, run.config.engine, run.config.limiter)
    print(_trace_summary(trace))
    _trace_outputs(run, trace, "lqr")
    run.finish(scenario=asdict(sc), plant=run.args.plant, K=design.k, A_m=design.a_m,
               csv_units=CSV_UNITS)


def cmd_mrac(run):
    a = run.args
    kind = ScenarioKind.MRAC_IDEAL if a.mode == "ideal" else ScenarioKind.MRAC_ENGINE_LAG
    sc = _scenario(a, kind)
    design, cfg = _design(run)
    l0 = np.zeros((2, 4)) if a.initial_gain == "zero" else None
    trace = run_mrac(sc, design, cfg, run.config.factor, run.config.engine,
                     run.config.limiter, l0=l0)
    print(_trace_summary(trace))
    _trace_outputs(run, trace, "mrac")
    run.finish(scenario=asdict(sc), plant=run.args.plant, initial_gain=a.initial_gain,
               L0=cfg.l_initial if l0 is None else l0, csv_units=CSV_UNITS)


def cmd_montecarlo(run):
    from . import plotting
    a = run.args
    sc = _scenario(a, ScenarioKind.MRAC_ENGINE_LAG)
    design, cfg = _design(run)
    try:
        spec = UncertaintySpec(fraction=a.fraction, runs=a.runs, seed=a.seed,
                               mode=a.uncertainty_mode)
    except ValueError as exc:
        raise CliError("precondition", str(exc)) from None
    report = run_monte_carlo(spec, sc, design, cfg, run.config.factor,
                             engine=run.config.engine, limiter=run.config.limiter,
                             settle_by=a.settle_by, tolerance=a.tolerance)
    text = report.summary_text()
    print(text, end="")
    run.path("montecarlo_summary.txt").write_text(text)
    if a.per_run_csv:
        report.write_runs_csv(run.path("montecarlo_runs.csv"))
    run.figure(plotting.monte_carlo, "montecarlo.png", report)
    run.finish(scenario=asdict(sc), plant=run.args.plant, uncertainty=asdict(spec), seed=a.seed,
               tolerances={"settle_fraction_of_peak": a.tolerance, "settle_by_s": a.settle_by})


COMMANDS = {
    "analyze": cmd_analyze,
    "engine-step": cmd_engine_step,
    "openloop": cmd_openloop,
    "lqr": cmd_lqr,
    "mrac": cmd_mrac,
    "montecarlo": cmd_montecarlo,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="aircraft configuration file (default: shipped 747-100)")
    common.add_argument("--output-dir", default="out", help="directory for CSV, figures, manifest")
    common.add_argument("--no-plots", action="store_true", help="skip PNG figures")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--duration", type=float, default=60.0, help="simulated time [s]")
    sim.add_argument("--dt", type=float, default=0.005, help="integration step [s]")
    sim.add_argument("--aileron-step", type=float, default=1.0, help="aileron command step [deg]")
    sim.add_argument("--rudder-step", type=float, default=1.0,
                     help="rudder-equivalent command step [deg]")
    sim.add_argument("--plant", choices=("published", "derived"), default="published",
                     help="damaged matrices: published fixture or built from the configuration")

    p = argparse.ArgumentParser(prog="diffthrust", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("analyze", parents=[common], help="matrices, modal tables, conversion factor")

    e = sub.add_parser("engine-step", parents=[common], help="engine thrust step response")
    e.add_argument("--command", type=float, help="throttle command [lbf] (default: T_max)")
    e.add_argument("--duration", type=float, default=20.0, help="simulated time [s]")
    e.add_argument("--dt", type=float, default=0.005, help="integration step [s]")
    e.add_argument("--rate-limited", action="store_true", help="rate limit the command")

    sub.add_parser("openloop", parents=[common, sim], help="uncontrolled damaged aircraft")
    sub.add_parser("lqr", parents=[common, sim], help="LQR design and closed-loop run")

    m = sub.add_parser("mrac", parents=[common, sim], help="adaptive controller run")
    m.add_argument("--mode", choices=("ideal", "engine-lag"), default="engine-lag")
    m.add_argument("--initial-gain", choices=("lqr", "zero"), default="lqr",
                   help="starting value of the adaptive gain")
    m.add_argument("--engine-in-loop", action="store_true",
                   help="route the feedback thrust demand through the engine as well")

    mc = sub.add_parser("montecarlo", parents=[common, sim], help="robustness under plant uncertainty")
    mc.add_argument("--runs", type=int, default=1000)
    mc.add_argument("--fraction", type=float, default=0.30, help="relative uncertainty bound")
    mc.add_argument("--seed", type=int, default=20170101)
    mc.add_argument("--uncertainty-mode", choices=("entrywise", "spectral"), default="entrywise")
    mc.add_argument("--settle-by", type=float, default=25.0, help="convergence deadline [s]")
    mc.add_argument("--tolerance", type=float, default=0.01,
                    help="convergence band as a fraction of the peak error")
    mc.add_argument("--per-run-csv", action="store_true", help="also write one row per run")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        run = Run(args)
        COMMANDS[args.subcommand](run)
    except CliError as exc:
        return _fail(exc.category, str(exc))
    except ConfigError as exc:
        return _fail("config", str(exc))
    except NumericsError as exc:
        return _fail("numerics", str(exc))
    except SimulationError as exc:
        return _fail("simulation", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    except ValueError as exc:
        return _fail("precondition", str(exc))
    return 0


def _fail(category, message):
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
