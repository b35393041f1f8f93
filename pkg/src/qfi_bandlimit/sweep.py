"""Parameter sweeps over (B, l) grids with deterministic CSV and JSON output."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import UsageError
from .fisher import qfi_point
from .genspec import SpectrumProfile, qfi_genspec, solve_genspec
from .pswf import build_basis
from .spdo_loc import SolverOptions, solve_loc
from .spdo_pair import solve_pair
from .zernike_cfi import cfi, mode_probabilities

__all__ = [
    "CONFIG_DEFAULTS",
    "EXIT_OK",
    "EXIT_UNCONVERGED",
    "EXIT_USAGE",
    "SweepSpec",
    "load_config",
    "parse_values",
    "run_sweep",
    "worker_count",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNCONVERGED = 2

THREADS_ENV = "QFI_BANDLIMIT_THREADS"
CONFIG_DEFAULTS = {"K": 4096, "N": None, "N_q": 64, "cutoff": 1e-12, "method": "legendre", "freq_rule": "gauss"}
L_MAX = 8.0


# ---------------------------------------------------------------- parsing


def parse_values(text: str, name: str) -> list[float]:
    """Parse ``a,b,c`` lists and inclusive ``start:step:stop`` ranges.

    A range includes ``stop`` when it lies within half a step of the last
    grid point. Values are rounded to 12 decimals so that grid points
    print as written.
    """
    out: list[float] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            raise UsageError(f"{name}: empty entry in {text!r}")
        try:
            if ":" in part:
                fields = part.split(":")
                if len(fields) != 3:
                    raise ValueError
                start, step, stop = (float(v) for v in fields)
                if not step > 0 or stop < start:
                    raise UsageError(f"{name}: range {part!r} needs step > 0 and stop >= start")
                n = math.floor((stop - start) / step + 0.5)
                out.extend(round(start + k * step, 12) for k in range(n + 1))
            else:
                out.append(float(part))
        except ValueError:
            raise UsageError(f"{name}: cannot parse {part!r} as a number or start:step:stop range") from None
    if not all(math.isfinite(v) for v in out):
        raise UsageError(f"{name}: values must be finite")
    return out


def _coerce(key: str, raw):
    if key == "N":
        if raw is None or str(raw).strip().lower() in ("auto", "none", ""):
            return None
        try:
            v = int(str(raw).strip())
        except ValueError:
            raise UsageError(f"config key N: expected an integer or 'auto', got {raw!r}") from None
        if v < 4:
            raise UsageError("config key N: must be at least 4")
        return v
    if key in ("K", "N_q"):
        try:
            v = int(str(raw).strip())
        except ValueError:
            raise UsageError(f"config key {key}: expected an integer, got {raw!r}") from None
        if v < 2:
            raise UsageError(f"config key {key}: must be at least 2")
        return v
    if key == "cutoff":
        try:
            v = float(str(raw).strip())
        except ValueError:
            raise UsageError(f"config key cutoff: expected a number, got {raw!r}") from None
        if not (0 < v < 1):
            raise UsageError("config key cutoff: must lie in (0, 1)")
        return v
    if key == "method":
        v = str(raw).strip()
        if v not in ("legendre", "dpss"):
            raise UsageError("config key method: expected 'legendre' or 'dpss'")
        return v
    v = str(raw).strip()
    if v not in ("gauss", "riemann"):
        raise UsageError("config key freq_rule: expected 'gauss' or 'riemann'")
    return v


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults overlaid by a ``key = value`` file, then by explicit overrides.

    The file holds bare ``key = value`` lines (``#`` comments allowed); an
    optional ``[qfi]`` section header is accepted.
    """
    cfg = dict(CONFIG_DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file {str(p)!r} does not exist")
        text = p.read_text(encoding="utf-8")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            if text.lstrip().startswith("["):
                parser.read_string(text)
            else:
                parser.read_string("[qfi]\n" + text)
        except configparser.Error as exc:
            raise UsageError(f"config file {str(p)!r} is not key = value: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in CONFIG_DEFAULTS:
                    valid = ", ".join(CONFIG_DEFAULTS)
                    raise UsageError(f"unknown config key {key!r}; valid keys: {valid}")
                cfg[key] = _coerce(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in CONFIG_DEFAULTS:
            raise UsageError(f"unknown config key {key!r}; valid keys: {', '.join(CONFIG_DEFAULTS)}")
        cfg[key] = _coerce(key, raw)
    return cfg


def solver_options(cfg: dict) -> SolverOptions:
    return SolverOptions(
        N=cfg["N"], K=cfg["K"], n_freq=cfg["N_q"], cutoff=cfg["cutoff"],
        method=cfg["method"], freq_rule=cfg["freq_rule"],
    )


# ---------------------------------------------------------------- spec


@dataclass
class SweepSpec:
    """Everything one CLI invocation needs; validated by ``validate``."""

    problem: str
    B_values: list = field(default_factory=list)
    l_values: list = field(default_factory=list)
    phi_l: float = 0.0
    modes: tuple = (2, 3)
    bucket: bool = False
    profile: str = "flat-top"
    spectrum_csv: str | None = None
    with_qfi: bool = False
    C: float | None = None
    config: dict = field(default_factory=lambda: dict(CONFIG_DEFAULTS))
    out: str | None = None
    dump_eigenfunctions: bool = False
    n_funcs: int = 3
    command: list = field(default_factory=list)

    def validate(self) -> None:
        if self.problem not in ("loc", "pair", "cfi", "eig-loc", "eig-pair", "genspec", "pswf"):
            raise UsageError(f"problem: unknown problem {self.problem!r}")
        if self.problem == "pswf":
            if self.C is None or not (self.C > 0):
                raise UsageError("--C: must be positive")
            return
        if not self.l_values:
            raise UsageError("--l: at least one value is required")
        # cfi accepts l = 0 as the l -> 0+ limit
        l_min_ok = (lambda v: v >= 0) if self.problem == "cfi" else (lambda v: v > 0)
        bad = [v for v in self.l_values if not (l_min_ok(v) and v <= L_MAX)]
        if bad:
            lo = "[0" if self.problem == "cfi" else "(0"
            raise UsageError(f"--l: values must lie in {lo}, {L_MAX:g}], got {bad[0]!r}")
        if self.problem == "genspec" and self.profile == "tabulated":
            if not self.spectrum_csv:
                raise UsageError("--spectrum-csv: required for the tabulated profile")
            return
        if not self.B_values:
            raise UsageError("--B: at least one value is required")
        bad = [v for v in self.B_values if not (0.0 <= v <= 0.5)]
        if bad:
            raise UsageError(f"--B: values must lie in [0, 0.5], got {bad[0]!r}")
        if self.problem in ("eig-loc", "eig-pair", "genspec") and 0.0 in self.B_values:
            raise UsageError("--B: this command needs B > 0")
        if self.problem == "cfi" and not self.modes:
            raise UsageError("--modes: at least one mode is required")


# ---------------------------------------------------------------- workers


def worker_count(n_tasks: int) -> int:
    """Worker pool size, capped by QFI_BANDLIMIT_THREADS when set."""
    n = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is not None and raw.strip():
        try:
            cap = int(raw)
        except ValueError:
            raise UsageError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}") from None
        if cap < 1:
            raise UsageError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}")
        n = min(n, cap)
    return max(1, min(n, n_tasks))


def _qfi_task(args):
    problem, B, l, cfg = args
    r = qfi_point(problem, B, l, solver_options(cfg))
    conv = r.convergence
    return {
        "problem": problem,
        "l": l,
        "B": B,
        "qfi": r.value,
        "sd": 1.0 / math.sqrt(r.value),
        "diagonal_sum": r.term_breakdown.get("diagonal", r.value),
        "cross_sum": r.term_breakdown.get("cross", 0.0),
        "cutoff_halving": conv.get("cutoff_halving", 0.0),
        "grid_doubling": conv.get("grid_doubling", 0.0),
        "converged": r.converged,
    }


def _cfi_task(args):
    B, l, phi, modes, bucket = args
    ms = mode_probabilities(B, l, phi)
    row = {"l": l, "B": B, "phi_l": phi}
    for k in range(4):
        row[f"P{k + 1}"] = float(ms.probs[k])
    for k in range(4):
        row[f"dP{k + 1}"] = float(ms.derivs[k])
    tt = cfi(ms, (2, 3))
    row["CFI_tiptilt"] = tt.value
    row["CFI_tiptilt_bucket"] = cfi(ms, (2, 3), True).value
    four = cfi(ms, (1, 2, 3, 4))
    for k in range(4):
        row[f"CFI_z{k + 1}"] = four.term_breakdown[f"Z{k + 1}"]
    row["CFI_total"] = cfi(ms, (1, 2, 3, 4), True).value
    sel = cfi(ms, modes, bucket)
    row["CFI_selected"] = sel.value
    row["converged"] = sel.converged
    return row


def _eig_task(args):
    problem, B, l, cfg, n_funcs = args
    opts = solver_options(cfg)
    rows, funcs = [], []
    if problem == "eig-loc":
        systems = [("loc", solve_loc(B, l, opts))]
    else:
        p, m = solve_pair(B, l, opts)
        systems = [("+", p), ("-", m)]
    for tag, sys_ in systems:
        for k, lam in enumerate(sys_.all_eigs):
            rows.append({
                "l": l, "B": B, "C": math.pi * B * l, "subspace": tag, "index": k,
                "eigenvalue": float(lam),
                "parity": int(sys_.parities[k]) if k < sys_.n_retained else "",
                "retained": k < sys_.n_retained,
            })
        nf = min(n_funcs, sys_.n_retained)
        for j, f in enumerate(sys_.f_grid):
            rec = {"l": l, "B": B, "subspace": tag, "f": float(f)}
            for p_ in range(n_funcs):
                rec[f"d_{p_}"] = float(sys_.coeff_funcs[p_, j]) if p_ < nf else ""
            funcs.append(rec)
    return rows, funcs


def _genspec_task(args):
    profile_kind, width, l, csv_path, with_qfi, n_q = args
    prof = _make_profile(profile_kind, width, csv_path)
    if with_qfi:
        r = qfi_genspec(prof, l, n_freq=n_q)
        return [{"profile": prof.kind, "width": prof.fwhm, "l": l, "C_eff": prof.c_eff(l),
                 "qfi": r.value, "converged": r.converged}]
    plus, minus = solve_genspec(prof, l)
    rows = []
    for sys_ in (plus, minus):
        for k, lam in enumerate(sys_.eigs):
            rows.append({"profile": prof.kind, "width": prof.fwhm, "l": l, "C_eff": prof.c_eff(l),
                         "parity": sys_.parity, "index": k, "eigenvalue": float(lam)})
    return rows


def _make_profile(kind: str, width, csv_path) -> SpectrumProfile:
    if kind == "flat-top":
        return SpectrumProfile.flat_top(width)
    if kind == "gaussian":
        return SpectrumProfile.gaussian(width)
    if kind == "lorentzian":
        return SpectrumProfile.lorentzian(width)
    if kind == "tabulated":
        return SpectrumProfile.from_csv(csv_path)
    raise UsageError(f"--profile: unknown profile {kind!r}")


def _map(fn, tasks: list) -> list:
    n = worker_count(len(tasks))
    if n == 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        # map preserves task order whatever the completion order
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(rows: list[dict], stream) -> None:
    """RFC-4180 CSV, single header row, LF endings, shortest round-trip floats."""
    if not rows:
        return
    w = csv.writer(stream, lineterminator="\n")
    header = list(rows[0].keys())
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r[h]) for h in header])


def _emit(rows: list[dict], out: str | None) -> None:
    if out is None:
        write_csv(rows, sys.stdout)
        return
    with open(out, "w", newline="", encoding="utf-8") as fh:
        write_csv(rows, fh)


def eigenfunction_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + "_eigenfunctions.csv")


def sidecar_path(out: str) -> Path:
    return Path(out).with_suffix(".json")


def _write_sidecar(spec: SweepSpec, n_points: int, unconverged: list, extra: dict | None = None) -> None:
    if spec.out is None:
        return
    meta = {
        "version": __version__,
        "command": spec.command,
        "problem": spec.problem,
        "config": spec.config,
        "points": n_points,
        "unconverged": unconverged,
        "all_converged": not unconverged,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        meta.update(extra)
    with open(sidecar_path(spec.out), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid(spec: SweepSpec) -> list[tuple[float, float]]:
    # rows sorted by l, then B
    return [(B, l) for l in sorted(set(spec.l_values)) for B in sorted(set(spec.B_values))]


def run_sweep(spec: SweepSpec) -> int:
    """Evaluate the sweep, write CSV (and a JSON sidecar with ``out``); return the exit code."""
    spec.validate()
    cfg = spec.config
    if spec.problem in ("loc", "pair"):
        rows = _map(_qfi_task, [(spec.problem, B, l, cfg) for B, l in _grid(spec)])
    elif spec.problem == "cfi":
        rows = _map(_cfi_task, [(B, l, spec.phi_l, spec.modes, spec.bucket) for B, l in _grid(spec)])
    elif spec.problem in ("eig-loc", "eig-pair"):
        parts = _map(_eig_task, [(spec.problem, B, l, cfg, spec.n_funcs) for B, l in _grid(spec)])
        rows = [r for p in parts for r in p[0]]
        if spec.dump_eigenfunctions:
            funcs = [r for p in parts for r in p[1]]
            if spec.out is None:
                _emit(funcs, None)
                return EXIT_OK
            _emit(funcs, str(eigenfunction_path(spec.out)))
    elif spec.problem == "genspec":
        widths = [None] if spec.profile == "tabulated" else sorted(set(spec.B_values))
        tasks = [(spec.profile, w, l, spec.spectrum_csv, spec.with_qfi, cfg["N_q"])
                 for l in sorted(set(spec.l_values)) for w in widths]
        rows = [r for part in _map(_genspec_task, tasks) for r in part]
    else:
        basis = build_basis(spec.C, cfg["N"], cfg["K"], cfg["method"])
        if spec.out is None:
            buf = io.StringIO()
            basis.to_csv_stream(buf)
            sys.stdout.write(buf.getvalue())
        else:
            basis.to_csv(spec.out)
        _write_sidecar(spec, 1, [], {"C": spec.C, "N": basis.N, "K": basis.K,
                                     "concentration_eigenvalues": [float(v) for v in basis.conc_eigs]})
        return EXIT_OK

    _emit(rows, spec.out)
    unconverged = [{"B": r["B"] if "B" in r else r.get("width"), "l": r["l"]}
                   for r in rows if r.get("converged") is False]
    _write_sidecar(spec, len(rows), unconverged)
    return EXIT_UNCONVERGED if unconverged else EXIT_OK
