"""Command-line interface: ``qfi-bandlimit <command> [options]``.

Commands write CSV to ``--out`` (or stdout) and, with ``--out``, a JSON
sidecar ``<stem>.json`` recording version, command line, effective
configuration and convergence. Exit status is 0 on success, 1 on a usage
or input error and 2 when any point failed its convergence check.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import DomainError, UsageError
from .sweep import EXIT_USAGE, SweepSpec, load_config, parse_values, run_sweep

__all__ = ["build_parser", "main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with K, N, N_q, cutoff, method, freq_rule")
    p.add_argument("--K", help="PSWF sampling grid size")
    p.add_argument("--N", help="PSWF truncation order or 'auto'")
    p.add_argument("--N-q", dest="N_q", help="frequency quadrature points")
    p.add_argument("--cutoff", help="relative eigenvalue retention cutoff")
    p.add_argument("--method", help="PSWF construction: legendre or dpss")
    p.add_argument("--freq-rule", dest="freq_rule", help="frequency rule: gauss or riemann")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="CSV output path; a JSON sidecar is written next to it")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qfi-bandlimit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("qfi", help="quantum Fisher information over a (B, l) grid")
    q.add_argument("--problem", choices=("loc", "pair"), required=True)
    q.add_argument("--B", required=True, help="bandwidths: list or start:step:stop")
    q.add_argument("--l", required=True, help="source distances: list or start:step:stop")
    _add_solver(q)
    _add_out(q)

    c = sub.add_parser("cfi", help="classical Fisher information of Zernike mode sorting")
    c.add_argument("--B", required=True)
    c.add_argument("--l", required=True)
    c.add_argument("--phi-l", dest="phi_l", type=float, default=0.0, help="orientation angle (rad)")
    c.add_argument("--modes", default="2,3", help="Zernike modes for CFI_selected, e.g. z2,z3 or 1,2,3,4")
    c.add_argument("--bucket", action="store_true", help="add the unsorted-remainder term to CFI_selected")
    _add_out(c)

    e = sub.add_parser("eig", help="density-operator eigenvalues")
    e.add_argument("--problem", choices=("loc", "pair"), required=True)
    e.add_argument("--B", required=True)
    e.add_argument("--l", required=True)
    e.add_argument("--dump-eigenfunctions", action="store_true",
                   help="also write <stem>_eigenfunctions.csv with d_0, d_1, d_2; "
                   "without --out the eigenfunction table goes to stdout instead")
    _add_solver(e)
    _add_out(e)

    g = sub.add_parser("genspec", help="eigenvalues or QFI for a non-flat spectrum")
    g.add_argument("--profile", choices=("flat-top", "gaussian", "lorentzian", "tabulated"), required=True)
    g.add_argument("--width", help="bandwidth B (flat-top) or FWHM (gaussian, lorentzian)")
    g.add_argument("--spectrum-csv", dest="spectrum_csv", help="two-column f,W file for the tabulated profile")
    g.add_argument("--l", required=True)
    g.add_argument("--qfi", action="store_true", help="write QFI rows instead of eigenvalues")
    _add_solver(g)
    _add_out(g)

    d = sub.add_parser("pswf-dump", help="tabulate PSWFs on the sampling grid")
    d.add_argument("--C", type=float, required=True, help="bandwidth parameter c")
    _add_solver(d)
    _add_out(d)
    return ap


def _spec_from_args(args, argv) -> SweepSpec:
    overrides = {k: getattr(args, k, None) for k in ("K", "N", "N_q", "cutoff", "method", "freq_rule")}
    cfg = load_config(getattr(args, "config", None), overrides)
    spec = SweepSpec(problem="", config=cfg, out=args.out, command=["qfi-bandlimit", *argv])
    cmd = args.command
    if cmd == "qfi":
        spec.problem = args.problem
    elif cmd == "cfi":
        spec.problem = "cfi"
        spec.phi_l = args.phi_l
        try:
            modes = tuple(int(m.strip().lower().removeprefix("z")) for m in args.modes.split(","))
        except ValueError:
            raise UsageError(f"--modes: expected comma-separated integers, got {args.modes!r}") from None
        if not modes or any(m not in (1, 2, 3, 4) for m in modes) or len(set(modes)) != len(modes):
            raise UsageError("--modes: expected distinct modes from 1..4")
        spec.modes = modes
        spec.bucket = args.bucket
    elif cmd == "eig":
        spec.problem = "eig-" + args.problem
        spec.dump_eigenfunctions = args.dump_eigenfunctions
    elif cmd == "genspec":
        spec.problem = "genspec"
        spec.profile = args.profile
        spec.spectrum_csv = args.spectrum_csv
        spec.with_qfi = args.qfi
        if args.profile != "tabulated":
            if args.width is None:
                raise UsageError("--width: required for this profile")
            spec.B_values = parse_values(args.width, "--width")
            if any(not w > 0 for w in spec.B_values):
                raise UsageError("--width: values must be positive")
    else:
        spec.problem = "pswf"
        spec.C = args.C
    if cmd in ("qfi", "cfi", "eig"):
        spec.B_values = parse_values(args.B, "--B")
    if cmd != "pswf-dump":
        spec.l_values = parse_values(args.l, "--l")
    return spec


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return run_sweep(_spec_from_args(args, argv))
    except (UsageError, DomainError, OSError) as exc:
        print(f"qfi-bandlimit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
