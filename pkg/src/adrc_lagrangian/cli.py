"""``adrc-lag`` command-line front end.

Subcommands: ``reference``, ``gains``, ``freq``, ``simulate``, ``sweep``,
``toy-cmdp`` and ``selftest``. Every command reads an optional scenario file
(``-c``) plus ``--set key=value`` overrides, writes CSV to stdout or to
``-o FILE`` (relative paths land in ``$ADRC_LAG_OUTPUT_DIR`` or
``output.dir``), and starts with a ``#`` timestamp line unless
``--no-timestamp`` is given.

Exit codes: 0 success, 1 usage, 2 configuration, 3 numeric failure,
4 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .acceptance import check_determinism, render_report, run_all
from .config import SCHEMA, Scenario
from .controller import ControllerMode, PidGains
from .errors import (
    ConfigError,
    DisturbanceBoundError,
    EstimationError,
    NumericError,
    ParameterError,
)
from .freq import ratio_and_phase_check
from .gains import max_real_root, real_roots, solve_adrc_from_pid
from .metrics import summarize
from .reference import make_reference
from .surrogate import avg_violation_check, iss_tube_check, simulate, tube_radius
from .toycmdp import SoftmaxPolicy, load_cmdp, reference_instance, train

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3, 4
OUTPUT_DIR_ENV = "ADRC_LAG_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# output helpers


class Table:
    """Rows of mixed values rendered with a fixed float precision."""

    def __init__(self, header: Sequence[str], precision: int = 17) -> None:
        self.header = list(header)
        self.rows: list[list[Any]] = []
        self.precision = precision

    def add(self, *row: Any) -> None:
        self.rows.append(list(row))

    def _fmt(self, v: Any) -> str:
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return f"%.{self.precision}g" % v
        return str(v)

    def render(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([self._fmt(v) for v in row])
        return buf.getvalue()


def _output_dir(sc: Scenario) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or sc["output.dir"])


def _resolve(sc: Scenario, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else _output_dir(sc) / p


def _header(command: str, args: argparse.Namespace) -> str:
    if args.no_timestamp:
        return ""
    stamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return f"# adrc-lag {__version__} {command} generated {stamp}\n"


def _emit(sc: Scenario, args: argparse.Namespace, text: str, out: io.TextIOBase) -> None:
    body = _header(args.command, args) + text
    if args.output:
        path = _resolve(sc, args.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body)
    else:
        out.write(body)


def _write_aux(sc: Scenario, args: argparse.Namespace, name: str, text: str) -> None:
    path = _resolve(sc, name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_header(args.command, args) + text)


# --------------------------------------------------------------------------
# subcommands


def cmd_reference(sc: Scenario, args) -> str:
    traj = make_reference(sc.reference_params())
    t = np.linspace(0.0, sc["reference.t_max"], sc["reference.samples"])
    r, rd, rdd = traj.eval(t)
    tab = Table(("t", "r", "r_dot", "r_ddot"), sc["output.precision"])
    for row in zip(t, r, rd, rdd):
        tab.add(*(float(v) for v in row))
    return tab.render()


def cmd_gains(sc: Scenario, args) -> str:
    tab = Table(("quantity", "value"), sc["output.precision"])
    bounds = sc.bounds()
    tab.add("k_ap", sc["controller.k_ap"])
    tab.add("k_ad", sc["controller.k_ad"])
    tab.add("L1", bounds.L1)
    tab.add("L2", bounds.L2)
    manifold = sc.manifold()
    if manifold is not None:
        for i, root in enumerate(real_roots(manifold.as_tuple())):
            tab.add(f"manifold_root_{i}", root)
        top = max_real_root(manifold)
        tab.add("omega_bar", 0.0 if top is None else top)
    tab.add("omega_star", sc.omega_star())
    w = sc.omega_o()
    tab.add("omega_o", w)
    pid = sc.gains(ControllerMode.ADRC_ALGORITHM1, w).pid_equivalent(sc["controller.strict_kd"])
    tab.add("K_p", pid.K_p)
    tab.add("K_i", pid.K_i)
    tab.add("K_d", pid.K_d)
    configured = PidGains(sc["controller.K_p"], sc["controller.K_i"], sc["controller.K_d"])
    inv = solve_adrc_from_pid(configured)
    if inv is None:
        tab.add("inverse_from_pid", "none")
    else:
        tab.add("inverse_k_ap", inv.k_ap)
        tab.add("inverse_k_ad", inv.k_ad)
        tab.add("inverse_omega_o", inv.omega_o)
    return tab.render()


def cmd_freq(sc: Scenario, args) -> str:
    g = sc.gains(ControllerMode.ADRC_ALGORITHM1)
    grid = np.logspace(np.log10(sc["freq.lo"]), np.log10(sc["freq.hi"]), sc["freq.n"])
    w_star = sc.omega_star() if sc._has_bounds() else None
    rep = ratio_and_phase_check(grid, g, g.pid_equivalent(sc["controller.strict_kd"]), w_star)
    tab = Table(rep.columns, sc["output.precision"])
    for row in rep.rows():
        tab.add(*row)
    return tab.render()


def _simulate(sc: Scenario):
    ctrl = sc.controller_config(dt=sc["simulation.dt_update"])
    dist = sc.disturbance_spec()
    tr = simulate(
        sc.plant0(), dist, ctrl, sc.reference_params(), sc.observer_config(), sc["simulation.horizon"], sc["simulation.dt"]
    )
    return ctrl, dist, tr


_TUBE_KEYS = (
    "tail_start",
    "tail_max_abs_e",
    "tube_pass",
    "tail_avg_violation",
    "avg_violation_pass",
    "violation_free_from",
    "violation_free_fraction",
)


def _simulate_summary(sc: Scenario) -> tuple[list[tuple[str, Any]], Any]:
    ctrl, dist, tr = _simulate(sc)
    rows: list[tuple[str, Any]] = [("mode", ctrl.mode.value), ("steps", tr.t.size - 1)]
    rows.append(("peak_overshoot", tr.peak_overshoot(sc["reference.d"])))
    rows.append(("saturated_steps", int(tr.saturated.sum())))
    if ctrl.mode.is_adrc:
        g = ctrl.gains
        radius = tube_radius(g, dist.L_f)
        rows.append(("tube_radius", radius))
        try:
            tube = iss_tube_check(tr, g, dist.L_f)
        except ParameterError as exc:
            # horizon shorter than the settling time: the tube is not assessable
            rows += [(k, "none") for k in _TUBE_KEYS]
            rows.append(("tube_note", str(exc)))
            return rows, tr
        avg = avg_violation_check(tr, sc["reference.d"], radius)
        rows += [
            ("tail_start", tube.tail_start),
            ("tail_max_abs_e", tube.tail_max),
            ("tube_pass", tube.passed),
            ("tail_avg_violation", avg.tail_average),
            ("avg_violation_pass", avg.passed),
            ("violation_free_from", "none" if avg.violation_free_from is None else avg.violation_free_from),
            ("violation_free_fraction", avg.suffix_fraction),
        ]
    return rows, tr


def cmd_simulate(sc: Scenario, args) -> str:
    rows, tr = _simulate_summary(sc)
    if args.trace:
        _write_aux(sc, args, args.trace, tr.to_csv(precision=sc["output.precision"]))
    tab = Table(("quantity", "value"), sc["output.precision"])
    for k, v in rows:
        tab.add(k, v)
    return tab.render()


def _cmdp(sc: Scenario):
    name = sc["toy.instance"]
    if name.endswith(".cmdp") or os.sep in name:
        return load_cmdp(name)
    return reference_instance(name)


def _toy_runs(sc: Scenario, mode: ControllerMode):
    cmdp = _cmdp(sc)
    ctrl = sc.controller_config(mode=mode)
    ctrl = dataclasses.replace(ctrl, cost_limit=cmdp.d)
    ref = dataclasses.replace(sc.reference_params(), d=cmdp.d, x1_0=cmdp.d)
    logs = []
    for seed in sc["toy.seeds"]:
        policy = SoftmaxPolicy.uniform(cmdp, sc["toy.step_size"], seed)
        logs.append(train(cmdp, policy, ctrl, ref, sc["toy.epochs"], sc["toy.episodes"], seed))
    return logs


_TOY_COLUMNS = ("mode", "seeds", "vio_rate_pct", "magnitude", "avg_cost", "final_Jc_exact", "final_J_exact", "final_lambda")


def _toy_row(mode: ControllerMode, logs) -> list[Any]:
    per = [summarize(log.all_episode_costs()) for log in logs]
    return [
        mode.value,
        len(logs),
        float(np.mean([100.0 * s.violation_rate for s in per])),
        float(np.mean([s.magnitude for s in per])),
        float(np.mean([s.average_cost for s in per])),
        float(np.mean([log.Jc_exact[-1] for log in logs])),
        float(np.mean([log.J_exact[-1] for log in logs])),
        float(np.mean([log.lam[-1] for log in logs])),
    ]


def cmd_toy(sc: Scenario, args) -> str:
    tab = Table(_TOY_COLUMNS, sc["output.precision"])
    for name in sc["toy.modes"]:
        mode = ControllerMode(name)
        logs = _toy_runs(sc, mode)
        tab.add(*_toy_row(mode, logs))
        if args.logs:
            for log in logs:
                _write_aux(sc, args, str(Path(args.logs) / f"{mode.value}_seed{log.seed}.csv"),
                           log.to_csv(precision=sc["output.precision"]))
    return tab.render()


def _coerce(key: str, value: float) -> Any:
    parser, default = SCHEMA[key]
    if parser is int:
        if value != int(value):
            raise ConfigError(f"sweep value {value} is not an integer for {key}")
        return int(value)
    if parser is float or isinstance(default, float) or default is None:
        return float(value)
    raise ConfigError(f"sweep.param {key} is not numeric")


def _sweep_point(values: dict, key: str, value: float) -> list[Any]:
    sc = Scenario(values).with_value(key, _coerce(key, value))
    sc.validate()
    if sc["sweep.target"] == "simulate":
        rows, _ = _simulate_summary(sc)
        d = dict(rows)
        return [key, value, d["peak_overshoot"], d.get("tube_radius", "nan"), d.get("tail_max_abs_e", "nan"),
                d.get("tube_pass", "nan"), d.get("tail_avg_violation", "nan")]
    mode = ControllerMode(sc["controller.mode"])
    return [key, value] + _toy_row(mode, _toy_runs(sc, mode))


def cmd_sweep(sc: Scenario, args) -> str:
    key = sc["sweep.param"]
    values = list(sc["sweep.values"])
    if not values:
        raise ConfigError("sweep.values is empty")
    if sc["sweep.target"] == "simulate":
        header = ("param", "value", "peak_overshoot", "tube_radius", "tail_max_abs_e", "tube_pass", "tail_avg_violation")
    else:
        header = ("param", "value") + _TOY_COLUMNS
    base = dict(sc.values)
    workers = sc["sweep.workers"]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, [base] * len(values), [key] * len(values), values))
    else:
        rows = [_sweep_point(base, key, v) for v in values]
    tab = Table(header, sc["output.precision"])
    for row in rows:
        tab.add(*row)
    return tab.render()


def cmd_selftest(sc: Scenario, args) -> str:
    results = run_all(enforce_budget=not args.no_budget)
    results.append(check_determinism(results, enforce_budget=not args.no_budget))
    args._failed = not all(r.passed for r in results)
    return render_report(results)


COMMANDS = {
    "reference": (cmd_reference, "closed-form reference trajectory as CSV"),
    "gains": (cmd_gains, "observer-gain lower bound and PID/ADRC gain maps"),
    "freq": (cmd_freq, "frequency sweep of the estimation-error transfer functions"),
    "simulate": (cmd_simulate, "surrogate closed-loop run with tube and violation reports"),
    "sweep": (cmd_sweep, "one summary row per value of a swept parameter"),
    "toy-cmdp": (cmd_toy, "train on the tabular CMDP and report safety metrics"),
    "selftest": (cmd_selftest, "run the acceptance suite"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-c", "--config", help="scenario file (flat key = value)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-o", "--output", help="write the main CSV here instead of stdout")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp header line")
    parser = _Parser(prog="adrc-lag", description="ADRC Lagrangian multiplier toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "simulate":
            p.add_argument("--trace", help="also write the full trace CSV to this file")
        if name == "toy-cmdp":
            p.add_argument("--logs", help="directory for per-seed training logs")
        if name == "selftest":
            p.add_argument("--no-budget", action="store_true", help="do not fail criteria on wall-clock budgets")
    return parser


def main(argv: Iterable[str] | None = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
        if not args.command:
            raise UsageError("adrc-lag: a subcommand is required (see --help)")
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    args._failed = False
    try:
        sc = Scenario.from_sources(args.config, args.overrides)
        fn, _ = COMMANDS[args.command]
        text = fn(sc, args)
        _emit(sc, args, text, out)
    except (ConfigError, ParameterError) as exc:
        err.write(f"adrc-lag: config error: {exc}\n")
        return EXIT_CONFIG
    except (NumericError, DisturbanceBoundError, EstimationError) as exc:
        err.write(f"adrc-lag: numeric error ({type(exc).__name__}): {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        err.write(f"adrc-lag: i/o error: {exc}\n")
        return EXIT_CONFIG
    return EXIT_ACCEPTANCE if args._failed else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
