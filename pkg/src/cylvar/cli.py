"""Command line: ``cylvar solve | verify | sweep | lift``.

Exit codes: 0 ok, 1 suite or sweep failure, 2 usage or config error, 3 unconverged.
``CYLVAR_THREADS`` caps worker threads (and the BLAS pools, when set before start-up);
``CYLVAR_DETERMINISTIC=1`` forces order-fixed reductions.
"""
import argparse
import os
import sys

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNCONVERGED = 0, 1, 2, 3
_BLAS_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _cap_blas_threads():
    threads = os.environ.get("CYLVAR_THREADS", "").strip()
    if threads.isdigit() and int(threads) > 0:
        for var in _BLAS_VARS:
            os.environ.setdefault(var, threads)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="cylvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one configured solve")
    p.add_argument("--config", required=True, help="flat 'section.key = value' config file")
    p.add_argument("--out", help="output directory (default: output.dir from the config)")

    p = sub.add_parser("verify", help="run an invariant suite and write a CSV defect report")
    p.add_argument("--suite", required=True, help="identities, conformal, symmetry or nonlinearity")
    p.add_argument("--resolution", type=int, help="3D node count per axis (odd)")
    p.add_argument("--out", default=".", help="directory for verify_<suite>.csv")

    p = sub.add_parser("sweep", help="repeat a solve over parameter values")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="a, p or resolution")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="output directory (default: output.dir from the config)")

    p = sub.add_parser("lift", help="lift a scalar field dump to a vector field dump")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", dest="dst", required=True)
    p.add_argument("--n3", type=int, default=33, help="3D nodes per axis")
    p.add_argument("--L3", type=float, help="box half-width (default: zmax of the input grid)")
    return parser


def _err(msg):
    print(f"cylvar: {msg}", file=sys.stderr)


def cmd_solve(args):
    from .config import ConfigError, load
    from .pipeline import run_solve
    from .solvers import SolverError

    try:
        cfg = load(args.config)
        outcome = run_solve(cfg, args.out)
    except (ConfigError, SolverError) as exc:
        _err(exc)
        return EXIT_USAGE
    m = outcome.manifest
    print(f"{m['label']}: J = {m['energies']['J']:.12g}, dual residual = {m['dual_residual']:.3e}, "
          f"converged = {m['converged']} -> {outcome.out_dir}")
    return outcome.exit_code


def cmd_verify(args):
    from pathlib import Path

    from .fieldio import atomic_write_text
    from .verify import SUITES, report_csv, run_suite

    if args.suite not in SUITES:
        _err(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
        return EXIT_USAGE
    try:
        checks = run_suite(args.suite, args.resolution)
    except ValueError as exc:
        _err(exc)
        return EXIT_USAGE
    text = report_csv(args.suite, checks)
    atomic_write_text(Path(args.out) / f"verify_{args.suite}.csv", text)
    sys.stdout.write(text)
    return EXIT_OK if all(c.ok for c in checks) else EXIT_FAIL


def cmd_sweep(args):
    from .config import ConfigError, load
    from .pipeline import parse_values, run_sweep

    try:
        cfg = load(args.config)
        values = parse_values(args.values)
        rows, code = run_sweep(cfg, args.param, values, args.out)
    except ConfigError as exc:
        _err(exc)
        return EXIT_USAGE
    for row in rows:
        print(f"{args.param}={row['param']:g}: J={row['J']} status={row['status']}")
    return code


def cmd_lift(args):
    from .fieldio import DumpFormatError
    from .pipeline import lift_file

    try:
        lift_file(args.src, args.dst, args.n3, args.L3)
    except (OSError, DumpFormatError, ValueError) as exc:
        _err(exc)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None):
    _cap_blas_threads()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "lift": cmd_lift}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
