"""Command-line front end: ``spectrum``, ``perturb`` and ``converge``.

Exit codes: 0 success, 2 a scientific check failed, 64 usage error,
65 infeasible configuration.  Values come from defaults, then ``--config``
(a JSON object keyed by option name), then explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .core import (BoxPotential, CountMismatchError, CriticalConfigurationError,
                   InvalidInputError, UnderResolvedError, kdv_critical_index, nls_critical_index)
from .experiments import (ExperimentConfig, run_creation_probability,
                          run_diffusion_convergence, run_first_order_validation)
from .kdv import kdv_count_formula, kdv_find_eigenvalues
from .nls import nls_count_formula, nls_find_eigenvalues
from .processes import NoiseSpec, PathGrid

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 2, 64, 65

DEFAULTS = {
    "spectrum": {"eq": "nls", "q": 1.0, "R": 2.0, "tol": 1e-10},
    "perturb": {"eq": "nls", "q": 1.0, "R": 3.0, "sigma": 0.01, "alpha": 0.5, "paths": 1000,
                "steps": None, "seed": 0, "mode": "validate", "noise": "real",
                "sigma_ladder": None},
    "converge": {"eq": "nls", "q": 1.0, "R": None, "xi": 0.0, "eta": None, "sigma": 0.3,
                 "alpha": 0.5, "epsilon": "0.4,0.2,0.1", "paths": 2000, "steps": None, "seed": 0,
                 "cell": 0.05, "amplitude": 1.0, "rate": 1.0},
}
COMMON = {"out": "results"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ladder(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        try:
            vals = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"malformed ladder {text!r}") from None
    if not vals:
        raise UsageError("empty ladder")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise UsageError(f"ladder must be strictly decreasing, got {vals}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="soliton-noise", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--eq", choices=["nls", "kdv"])
        sp.add_argument("--q", type=float)
        sp.add_argument("--R", type=float)
        sp.add_argument("--out")
        sp.add_argument("--config", help="JSON file with option values (flags take precedence)")

    def noisy(sp):
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--steps", type=int, help="grid cells on [0, R] for Brownian paths")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("spectrum", help="discrete eigenvalues of the box potential")
    common(sp)
    sp.add_argument("--tol", type=float)

    sp = sub.add_parser("perturb", help="first-order corrections against the direct re-solve")
    common(sp)
    noisy(sp)
    sp.add_argument("--mode", choices=["validate", "creation"])
    sp.add_argument("--noise", choices=["real", "complex"])
    sp.add_argument("--sigma-ladder", dest="sigma_ladder")
    sp.add_argument("--tol", type=float, help="accepted for symmetry; root tolerance is fixed")

    sp = sub.add_parser("converge", help="epsilon systems against the white-noise limit")
    common(sp)
    noisy(sp)
    sp.add_argument("--epsilon", help="comma-separated strictly decreasing ladder")
    sp.add_argument("--xi", type=float)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--cell", type=float, help="telegraph cell in the fast variable")
    sp.add_argument("--amplitude", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--tol", type=float, help="accepted for symmetry")
    return p


def resolve_config(args: argparse.Namespace) -> Dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[args.command])
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(data) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        cfg[key] = val
    return cfg


# -- output -------------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return f"{v:.17g}"


def write_csv(path: Path, columns: Dict[str, np.ndarray]) -> None:
    names = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    with path.open("w", newline="") as fh:
        fh.write("# manifest: manifest.json\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(columns[k][i]) for k in names])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _emit(cfg: Dict, command: str, columns: Dict[str, np.ndarray], summary: Dict,
          started: float) -> Dict:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    stem, k = f"{command}-{stamp}", 1
    while (out / f"{stem}.csv").exists() or (out / f"{stem}.json").exists():
        stem, k = f"{command}-{stamp}-{k}", k + 1
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    write_csv(csv_path, columns)
    manifest = {"command": command, "config": _jsonable(cfg), "seed": cfg.get("seed"),
                "version": __version__,
                "outputs": [str(csv_path), str(json_path)],
                "duration_s": round(time.monotonic() - started, 6)}
    doc = {"manifest": manifest, "summary": _jsonable(summary)}
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {csv_path} and {json_path}")
    return doc


# -- commands -----------------------------------------------------------------------------

def _pot(cfg) -> BoxPotential:
    q, R = cfg["q"], cfg["R"]
    if q is None or R is None or not (math.isfinite(q) and math.isfinite(R)) or R <= 0 or q < 0:
        raise UsageError(f"need finite q >= 0 and R > 0, got q={q}, R={R}")
    return BoxPotential(float(q), float(R))


def cmd_spectrum(cfg: Dict, started: float) -> int:
    pot = _pot(cfg)
    if pot.q <= 0:
        raise UsageError("spectrum needs q > 0")
    tol = float(cfg["tol"])
    if not 0 < tol < 1e-6:
        raise UsageError(f"--tol must lie in (0, 1e-6), got {tol}")
    status = EXIT_OK
    try:
        rep = nls_find_eigenvalues(pot, tol) if cfg["eq"] == "nls" else kdv_find_eigenvalues(pot, tol)
        eig, res = list(rep.eigenvalues), list(rep.residuals)
        summary = {"equation": cfg["eq"], "q": pot.q, "R": pot.R, "count_bisection": rep.count,
                   "count_formula": rep.count_formula, "quiescent": rep.quiescent,
                   "eigenvalues": eig}
        if cfg["eq"] == "nls":
            summary["count_argument_principle"] = rep.count_argument_principle
        counts = [rep.count, rep.count_formula]
        if summary.get("count_argument_principle") is not None:
            counts.append(summary["count_argument_principle"])
        summary["counts_agree"] = len(set(counts)) == 1
        if not summary["counts_agree"]:
            status = EXIT_CHECK
    except CountMismatchError as exc:
        eig, res = list(exc.diagnostics.get("roots", [])), [math.nan] * len(exc.diagnostics.get("roots", []))
        formula = nls_count_formula(pot) if cfg["eq"] == "nls" else kdv_count_formula(pot)
        summary = {"equation": cfg["eq"], "q": pot.q, "R": pot.R, "count_bisection": len(eig),
                   "count_formula": formula, "counts_agree": False, "error": str(exc),
                   "eigenvalues": eig}
        status = EXIT_CHECK
    columns = {"index": np.arange(len(eig)), "eta": np.asarray(eig, float),
               "residual": np.asarray(res, float)}
    _emit(cfg, "spectrum", columns, summary, started)
    return status


def _grid(cfg, R, per_unit=1000) -> PathGrid:
    steps = cfg.get("steps")
    if steps is None:
        steps = max(2, int(math.ceil(per_unit * R)))
    if steps < 2:
        raise UsageError("--steps must be at least 2")
    return PathGrid(R, int(steps))


def cmd_perturb(cfg: Dict, started: float) -> int:
    pot = _pot(cfg)
    sigma = float(cfg["sigma"])
    if sigma <= 0:
        raise UsageError("--sigma must be positive")
    kind = "complex_white" if cfg["noise"] == "complex" else "real_white"
    if kind == "complex_white" and cfg["eq"] != "nls":
        raise UsageError("complex noise is only defined for --eq nls")
    noise = NoiseSpec(sigma, float(cfg["alpha"]), None, kind)
    if cfg["mode"] == "creation":
        crit = nls_critical_index(pot) if cfg["eq"] == "nls" else kdv_critical_index(pot)
        if crit is None:
            msg = ("qR must be an odd multiple of pi/2" if cfg["eq"] == "nls"
                   else "sqrt(q) R must be a multiple of pi (or q = 0)")
            raise CriticalConfigurationError(f"creation mode needs a critical box: {msg}")
        ladder: tuple = ()
    else:
        ladder = tuple(_ladder(cfg["sigma_ladder"])) if cfg["sigma_ladder"] is not None \
            else (2 * sigma, sigma, sigma / 2)
    ecfg = ExperimentConfig(cfg["eq"], pot, noise, int(cfg["paths"]), _grid(cfg, pot.R),
                            int(cfg["seed"]), ladder)
    if cfg["mode"] == "creation":
        rep = run_creation_probability(ecfg)
    else:
        rep = run_first_order_validation(ecfg)
    _emit(cfg, "perturb", rep.records, rep.to_dict(), started)
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_converge(cfg: Dict, started: float) -> int:
    eq = cfg["eq"]
    if cfg["q"] is None:
        cfg["q"] = 1.0
    if cfg["R"] is None:
        cfg["R"] = 2.0 if eq == "nls" else 1.0
    if cfg["eta"] is None:
        cfg["eta"] = 0.5 if eq == "nls" else 0.3
    pot = _pot(cfg)
    ladder = _ladder(cfg["epsilon"])
    if any(not 0 < e <= 1 for e in ladder):
        raise UsageError("epsilon values must lie in (0, 1]")
    xi, eta = float(cfg["xi"]), float(cfg["eta"])
    if eta < 0:
        raise UsageError("--eta must be non-negative")
    if eq == "kdv" and xi != 0:
        raise UsageError("the KdV flow needs --xi 0")
    if cfg["cell"] >= 1.0 / (10.0 * cfg["rate"]):
        raise UnderResolvedError(
            f"telegraph cell {cfg['cell']} does not resolve switching rate {cfg['rate']}: "
            f"need cell < {1 / (10 * cfg['rate']):g}")
    noise = NoiseSpec(float(cfg["sigma"]), float(cfg["alpha"]))
    ecfg = ExperimentConfig(eq, pot, noise, int(cfg["paths"]), _grid(cfg, pot.R), int(cfg["seed"]),
                            (), tuple(ladder), zeta=complex(xi, eta),
                            telegraph_cell=float(cfg["cell"]),
                            telegraph_amplitude=float(cfg["amplitude"]),
                            telegraph_rate=float(cfg["rate"]))
    rep = run_diffusion_convergence(ecfg)
    _emit(cfg, "converge", rep.records, rep.to_dict(), started)
    return EXIT_OK if rep.passed else EXIT_CHECK


COMMANDS = {"spectrum": cmd_spectrum, "perturb": cmd_perturb, "converge": cmd_converge}


def main(argv: Optional[List[str]] = None) -> int:
    started = time.monotonic()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, started)
    except UsageError as exc:
        print(f"soliton-noise {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CriticalConfigurationError, UnderResolvedError) as exc:
        print(f"soliton-noise {args.command}: infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidInputError as exc:
        print(f"soliton-noise {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
