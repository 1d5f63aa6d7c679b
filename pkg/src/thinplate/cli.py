"""Command-line entry point: ``thinplate {solve,sweep,inertia}``.

Exit codes: 0 ok, 1 acceptance failure, 2 usage or config error,
3 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .fem3d import stationarity_residual, total_energy
from .harness import run_sweep, solve_at
from .inertia import inertia_table
from .scaling import beta_rescale
from .solvers import SolverError

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("thinplate")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config (defaults if omitted)")
    common.add_argument("--epsilon", type=float, help="thickness parameter, overrides the config")
    common.add_argument("--kappa", type=float, help="kappa, overrides the config")
    common.add_argument("--out", help="output directory, overrides the config")
    common.add_argument("--quiet", action="store_true", help="only report errors")
    p = _Parser(prog="thinplate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve the 3D problem at one epsilon")
    sub.add_parser("sweep", parents=[common], help="run the epsilon ladder and write a report")
    sub.add_parser("inertia", parents=[common], help="tabulate the inertial workings")
    return p


def _write_echo(cfg, out):
    with open(out / "config.resolved.json", "w") as fh:
        json.dump(cfg.echo(), fh, indent=2, sort_keys=True)


def cmd_solve(cfg, out):
    system, field = solve_at(cfg.sweep_config(), cfg.epsilon)
    field.to_csv(out / "field.csv")
    energy = total_energy(system, field)
    summary = {
        "epsilon": cfg.epsilon,
        "kappa": cfg.kappa,
        "energy": energy,
        "energy_reported": energy * cfg.family.eps_r / cfg.epsilon,
        "residual": stationarity_residual(system, field),
        "dofs": int(system.free.sum()),
    }
    if cfg.beta != 0.0:
        # minimizer of the beta-premultiplied problem
        u_beta, _ = beta_rescale(field, None, cfg.epsilon, cfg.beta)
        u_beta.to_csv(out / "field_beta.csv")
        summary["energy_beta"] = energy / cfg.epsilon ** (2.0 * cfg.beta)
    with open(out / "energy.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    log.info("energy %.6e, residual %.2e", energy, summary["residual"])
    return EXIT_OK


def cmd_sweep(cfg, out):
    report = run_sweep(cfg.sweep_config())
    report.meta["config_echo"] = cfg.echo()
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    for name, item in report.checklist.items():
        state = {True: "PASS", False: "FAIL", None: "skip"}[item["pass"]]
        log.info("%-32s %s  %s", name, state, item["value"])
    if report.failed_rows:
        return EXIT_NUMERICAL
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


def cmd_inertia(cfg, out):
    rows = inertia_table(cfg.acceleration_profile(), cfg.inertia.ladder)
    with open(out / "inertia.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "classical_total", "classical_inplane", "modified_total", "modified_inplane"])
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "inertia": cmd_inertia}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", force=True)
    overrides = {"epsilon": args.epsilon, "kappa": args.kappa, "out": args.out}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_echo(cfg, out)
    try:
        return COMMANDS[args.command](cfg, out)
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
