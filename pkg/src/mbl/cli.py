"""Command-line entry point (``mbl``).

Errors are reported on stderr as one JSON object and mapped to exit codes:
2 for configuration errors, 3 for analysis or domain errors, 4 for
integration or mesh failures, 1 for anything else raised by the package.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import ConfigError, MBLError
from .model import ModelSpec, Variant
from .travelling_wave import bifurcation_diagram, tau_for_plateau

log = logging.getLogger("mbl")

_MODEL_FLAGS = {"vt": "vT", "M": "M", "eps": "eps", "C": "C"}


class _Parser(argparse.ArgumentParser):
    """Raise usage errors instead of exiting so they get the JSON treatment."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mbl", description="MBL equation travelling waves and moving-mesh runs")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a preset or a configuration file")
    run.add_argument("target", help="preset name or path to a configuration file")
    run.add_argument("overrides", nargs="*", metavar="section.key=value")
    run.add_argument("--out", help="output root (default $MBL_OUT_DIR or ./out)")
    run.add_argument("--force", action="store_true", help="overwrite an existing output directory")
    run.add_argument("--dump-config", action="store_true",
                     help="print the resolved configuration and exit")

    tab = sub.add_parser("table", help="recompute a travelling-wave table")
    tab.add_argument("table_id", choices=sorted(harness.REFERENCE_TABLES))
    tab.add_argument("--out", help="also write table.csv and diff.txt under this root")

    for name, hlp in (("bifurcation", "sample tau(u_bar) and u_under"),
                      ("tau-for-plateau", "shoot for the tau giving a plateau height")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--model", required=True, choices=[v.value for v in Variant])
        for flag, key in _MODEL_FLAGS.items():
            sp.add_argument(f"--{flag}", type=float, dest=f"param_{key}")
        sp.add_argument("--param", action="append", default=[], metavar="key=value")
        sp.add_argument("--u0", type=float, required=True)
        if name == "bifurcation":
            sp.add_argument("--ubar-min", type=float, required=True)
            sp.add_argument("--ubar-max", type=float, required=True)
            sp.add_argument("--n", type=int, default=20)
        else:
            sp.add_argument("--ubar", type=float, required=True)
            sp.add_argument("--guess", type=float, default=1.0)

    sub.add_parser("list-presets", help="list the preset registry")
    return p


def _model(args):
    params = {key: getattr(args, f"param_{key}") for key in _MODEL_FLAGS.values()
              if getattr(args, f"param_{key}") is not None}
    for item in args.param:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"--param {key}: expected a number, got {val!r}") from None
    return ModelSpec(args.model, params).build()


def _load(target, overrides):
    if target in harness.PRESETS:
        return harness.preset_config(target, overrides)
    path = Path(target)
    if not path.is_file():
        raise ConfigError(f"{target!r} is neither a preset nor a configuration file")
    return harness.parse_config(path.read_text(), overrides)


def _cmd_run(args, out):
    cfg = _load(args.target, args.overrides)
    if args.dump_config:
        out.write(harness.dump_config(cfg))
        return
    log.info("running %s (%s, N=%d)", cfg.name, cfg.method, cfg.mmpde.N)
    res = harness.run_experiment(cfg)
    path = harness.write_outputs(res, args.out, force=args.force)
    out.write(harness.comparison_text(res))
    out.write(f"outputs written to {path}\n")


def _cmd_table(args, out):
    rep = harness.reproduce_table(args.table_id)
    csv_text, diff = rep.to_csv(), rep.to_text()
    out.write(csv_text + "\n" + diff)
    if args.out:
        d = Path(args.out) / f"table{args.table_id}"
        d.mkdir(parents=True, exist_ok=True)
        (d / "table.csv").write_text(csv_text)
        (d / "diff.txt").write_text(diff)


def _cmd_bifurcation(args, out):
    if args.n < 1:
        raise ConfigError("--n must be positive")
    grid = np.linspace(args.ubar_min, args.ubar_max, args.n)
    diag = bifurcation_diagram(_model(args), args.u0, grid)
    out.write(f"# u_alpha={diag.u_alpha:.6g} tau_star={diag.tau_star:.6g}\n")
    out.write("u_bar,tau,u_under\n")
    for (ub, tau), (_, uu) in zip(diag.samples, diag.u_under_of_tau):
        out.write(f"{ub:.6g},{tau:.6g},{uu:.6g}\n")


def _cmd_tau(args, out):
    tau = tau_for_plateau(_model(args), args.u0, args.ubar, guess=args.guess)
    out.write(f"{tau:.6g}\n")


def _cmd_list(args, out):
    for name, long_running in harness.list_presets():
        out.write(f"{name}{'  (long-running)' if long_running else ''}\n")


_COMMANDS = {"run": _cmd_run, "table": _cmd_table, "bifurcation": _cmd_bifurcation,
             "tau-for-plateau": _cmd_tau, "list-presets": _cmd_list}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        _COMMANDS[args.command](args, out)
    except MBLError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        if getattr(exc, "line", None) is not None:
            record["line"] = exc.line
        err.write(json.dumps(record) + "\n")
        return exc.exit_code
    return 0


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
