"""Command-line front end: sweeps, spectra, distributions, validation.

Configuration comes from a single declarative YAML file with nested
tables; command-line flags override file values.  CSV output uses a
header row, '.' decimals, 17 significant digits, and an empty field for
an undefined Mandel Q.  All rates are emitted in units of the atomic
decay rate, which itself appears once in the JSON sidecar.

Exit codes: 0 success, 1 usage error, 2 solver failure outside sweep
mode, 3 validation failure.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import argparse
import json
import math
import os
import sys
import time

import numpy as np
import yaml

from . import __version__, ladder, liouville, validation
from .dressed import (FULL_GAP, NO_GAP, GapFlags, SystemParams,
                      dressed_rates, pump_sweep_grid)
from .errors import SimulationError, ThermalPumpLimitError

__all__ = ["main", "RunConfig", "load_config", "parse_config",
           "config_to_dict", "run_sweep", "run_spectrum", "run_dist",
           "run_validate"]

MODES = ("sweep", "spectrum", "dist", "validate")

SWEEP_COLUMNS = ["cos4phi", "gamma_plus", "gamma_minus", "gamma0", "g1",
                 "mean_n", "q_mandel", "N_used", "residual",
                 "gap_config_label"]


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 1."""


@dataclass
class SolverConfig:
    n_override: int | None = None
    tail_tol: float = 1e-12
    rel_tol: float = 1e-14

    def __post_init__(self):
        if self.tail_tol <= 0 or self.rel_tol <= 0:
            raise UsageError("solver tolerances must be positive")


@dataclass
class SweepConfig:
    lo: float = 0.0
    hi: float = 1.0
    points: int = 101


@dataclass
class SpectrumConfig:
    scan: str = "auto"            # auto | doublet | narrow
    horizon: float | None = None
    omega_points: int = 4001
    allow_undecayed: bool = False

    def __post_init__(self):
        if self.scan not in ("auto", "doublet", "narrow"):
            raise UsageError(f"unknown spectrum scan {self.scan!r}")


@dataclass
class OutputConfig:
    path: str = "out/run"
    format: str = "csv"
    emit_plot_script: bool = False

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise UsageError(f"unknown output format {self.format!r}")


@dataclass
class ParamsConfig:
    gamma: float = 1.0
    kappa: float = 1e-3
    g: float = 10.0
    cos4phi: float | None = None
    epsilon: float | None = None
    delta_a: float | None = None
    gap: GapFlags = field(default_factory=lambda: FULL_GAP)


@dataclass
class RunConfig:
    mode: str
    params: ParamsConfig = field(default_factory=ParamsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; expected {MODES}")
        if self.threads < 1:
            raise UsageError("threads must be at least 1")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except yaml.YAMLError as exc:
        raise UsageError(f"malformed config {path}: {exc}")
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must be a mapping")
    return raw


def parse_config(raw: dict) -> RunConfig:
    known = {"mode", "params", "sweep", "solver", "spectrum", "output",
             "threads"}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if "mode" not in raw:
        raise UsageError("config must set 'mode'")

    def section(name, cls, **extra):
        d = dict(raw.get(name) or {})
        d.update(extra)
        try:
            return cls(**d)
        except TypeError as exc:
            raise UsageError(f"bad [{name}] section: {exc}")

    pd = dict(raw.get("params") or {})
    gap = pd.pop("gap", None)
    if gap is not None:
        try:
            gap = GapFlags(**gap)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad [params.gap]: {exc}")
    try:
        params = ParamsConfig(**pd) if gap is None \
            else ParamsConfig(**pd, gap=gap)
    except TypeError as exc:
        raise UsageError(f"bad [params] section: {exc}")
    try:
        return RunConfig(
            mode=raw["mode"],
            params=params,
            sweep=section("sweep", SweepConfig),
            solver=section("solver", SolverConfig),
            spectrum=section("spectrum", SpectrumConfig),
            output=section("output", OutputConfig),
            threads=int(raw.get("threads", 1)),
        )
    except TypeError as exc:
        raise UsageError(f"bad config: {exc}")


def config_to_dict(rc: RunConfig) -> dict:
    d = {
        "mode": rc.mode,
        "params": asdict(rc.params),
        "sweep": asdict(rc.sweep),
        "solver": asdict(rc.solver),
        "spectrum": asdict(rc.spectrum),
        "output": asdict(rc.output),
        "threads": rc.threads,
    }
    return d


def dump_config(rc: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(rc), sort_keys=True)


def _system_params(pc: ParamsConfig, gap: GapFlags | None = None,
                   cos4phi: float | None = None) -> SystemParams:
    kwargs = dict(gamma=pc.gamma, kappa=pc.kappa, g=pc.g,
                  gap=gap if gap is not None else pc.gap)
    if cos4phi is not None:
        kwargs["cos4phi"] = cos4phi
    elif pc.cos4phi is not None:
        kwargs["cos4phi"] = pc.cos4phi
    else:
        kwargs["epsilon"] = pc.epsilon
        kwargs["delta_a"] = pc.delta_a
    try:
        return SystemParams(**kwargs)
    except ValueError as exc:
        raise UsageError(f"bad parameters: {exc}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _prepare_out(path: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)


def _write_rows(path: str, fmt: str, columns: list, rows: list) -> None:
    _prepare_out(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(row[c]) for c in columns) + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([{c: row[c] for c in columns} for row in rows],
                      fh, indent=1)
            fh.write("\n")


def _write_sidecar(path: str, payload: dict) -> None:
    _prepare_out(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, default=float)
        fh.write("\n")


def _gap_label(gap: GapFlags) -> str:
    if gap == NO_GAP:
        return "no_gap"
    if gap == FULL_GAP:
        return "full_gap"
    return f"u{gap.u_l}{gap.u_minus}{gap.u_plus}"


# ---------------------------------------------------------------- sweep

def _sweep_point(index, params, solver_cfg):
    rates = dressed_rates(params)
    gamma = params.gamma
    record = {
        "cos4phi": params.cos4phi,
        "gamma_plus": rates.gamma_plus / gamma,
        "gamma_minus": rates.gamma_minus / gamma,
        "gamma0": rates.gamma0 / gamma,
        "g1": rates.g1 / gamma,
        "mean_n": None, "q_mandel": None, "N_used": None, "residual": None,
        "gap_config_label": _gap_label(params.gap),
    }
    t0 = time.perf_counter()
    error = None
    try:
        lad, n_used = ladder._adaptive_steady_state(
            rates, params.kappa, tail_tol=solver_cfg.tail_tol,
            n_override=solver_cfg.n_override)
        obs = ladder.observables(lad)
        record.update(mean_n=obs.mean_n, q_mandel=obs.q_mandel,
                      N_used=n_used, residual=lad.residual)
    except SimulationError as exc:
        error = f"{type(exc).__name__}: {exc}"
    return index, record, error, time.perf_counter() - t0


def run_sweep(rc: RunConfig) -> int:
    sw = rc.sweep
    grid = pump_sweep_grid(sw.points, (sw.lo, sw.hi), kappa=rc.params.kappa,
                           g=rc.params.g, gamma=rc.params.gamma)
    t0 = time.perf_counter()
    results = [None] * len(grid)
    with ThreadPoolExecutor(max_workers=rc.threads) as pool:
        futures = [pool.submit(_sweep_point, i, p, rc.solver)
                   for i, p in enumerate(grid)]
        for fut in futures:
            index, record, error, wall = fut.result()
            results[index] = (record, error, wall)

    rows = [r[0] for r in results]
    failures = [{"index": i, "cos4phi": rows[i]["cos4phi"],
                 "gap_config_label": rows[i]["gap_config_label"],
                 "error": r[1]}
                for i, r in enumerate(results) if r[1] is not None]
    base = rc.output.path
    data_path = base + (".csv" if rc.output.format == "csv" else ".json")
    try:
        _write_rows(data_path, rc.output.format, SWEEP_COLUMNS, rows)
        _write_sidecar(base + "_meta.json", {
            "mode": "sweep",
            "library_version": __version__,
            "parameters": asdict(rc.params),
            "sweep": asdict(rc.sweep),
            "solver": asdict(rc.solver),
            "threads": rc.threads,
            "rate_unit": "atomic decay rate (gamma)",
            "gamma": rc.params.gamma,
            "n_points": len(grid),
            "n_failed": len(failures),
            "failures": failures,
            "wall_s_total": time.perf_counter() - t0,
            "wall_s_per_point": [r[2] for r in results],
        })
        if rc.output.emit_plot_script:
            _emit_sweep_plot_script(base, data_path)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    print(f"sweep: {len(grid)} points -> {data_path} "
          f"({len(failures)} failed)", file=sys.stderr)
    return 0


# ------------------------------------------------------------- spectrum

def run_spectrum(rc: RunConfig) -> int:
    if rc.params.epsilon is None or rc.params.delta_a is None:
        raise UsageError("spectrum mode requires the (epsilon, delta_a) "
                         "drive form")
    params = _system_params(rc.params)
    rates = dressed_rates(params)
    kappa = params.kappa
    t0 = time.perf_counter()

    scan = rc.spectrum.scan
    if scan == "auto":
        nhat = max(0.0, (rates.gamma_plus - rates.gamma_minus) / (2 * kappa))
        scan = "narrow" if nhat >= 1.0 else "doublet"
    omega = (liouville.narrow_omega_grid(kappa, rc.spectrum.omega_points)
             if scan == "narrow"
             else liouville.doublet_omega_grid(rates.g1,
                                               rc.spectrum.omega_points))
    horizon = rc.spectrum.horizon or liouville.auto_horizon(rates, kappa)
    dtau = liouville.default_tau_step(rates, float(np.abs(omega).max()))
    taus = np.arange(0.0, horizon + dtau, dtau)

    if rc.solver.n_override is not None:
        n_max = rc.solver.n_override
    else:
        nhat = max(0.0, (rates.gamma_plus - rates.gamma_minus) / (2 * kappa))
        n_max = max(12, math.ceil(nhat + 12.0 * math.sqrt(nhat + 1.0)))
    try:
        L = liouville.build_liouvillian(rates, kappa, n_max)
        rho = liouville.steady_state_density(L)
        g_corr = liouville.correlation(L, rho, taus)
        result = liouville.spectrum(
            g_corr, taus, omega, allow_undecayed=rc.spectrum.allow_undecayed)
    except SimulationError as exc:
        hint = ""
        if "horizon" in str(exc) or "decayed" in str(exc):
            hint = " (hint: increase spectrum.horizon)"
        print(f"error: {exc}{hint}", file=sys.stderr)
        return 2

    base = rc.output.path
    data_path = base + (".csv" if rc.output.format == "csv" else ".json")
    rows = [{"omega": float(w), "s": float(sv)}
            for w, sv in zip(result.omega, result.s)]
    try:
        _write_rows(data_path, rc.output.format, ["omega", "s"], rows)
        _write_sidecar(base + "_meta.json", {
            "mode": "spectrum",
            "library_version": __version__,
            "parameters": asdict(rc.params),
            "solver": asdict(rc.solver),
            "scan": scan,
            "horizon": horizon,
            "tau_step": dtau,
            "n_tau": len(taus),
            "fock_levels": n_max,
            "mean_n": float(np.real(g_corr[0])),
            "peak_positions": [float(p) for p in result.peak_positions],
            "peak_heights": [float(h) for h in result.peak_heights],
            "peak_fwhms": [None if w is None else float(w)
                           for w in result.peak_fwhms],
            "fwhm": result.fwhm,
            "raw_peak_scale": result.scale,
            "assumptions": _assumption_flags(params),
            "wall_s_total": time.perf_counter() - t0,
        })
        if rc.output.emit_plot_script:
            _emit_spectrum_plot_script(base, data_path)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    print(f"spectrum ({scan}): {len(omega)} frequencies -> {data_path}",
          file=sys.stderr)
    return 0


def _assumption_flags(params: SystemParams) -> dict:
    return {
        "band_edge": "ideal unit step",
        "secular_time_independent_generator": True,
        "cavity_resonant_with_lasing_transition": True,
        "gap_flags": asdict(params.gap),
        "gap_flags_are_default_full_gap": params.gap == FULL_GAP,
    }


# ----------------------------------------------------------------- dist

def run_dist(rc: RunConfig) -> int:
    params = _system_params(rc.params)
    rates = dressed_rates(params)
    t0 = time.perf_counter()
    try:
        lad, n_used = ladder._adaptive_steady_state(
            rates, params.kappa, tail_tol=rc.solver.tail_tol,
            n_override=rc.solver.n_override)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    obs = ladder.observables(lad)
    analytic = None
    m = alpha = tv = None
    if rates.gamma_plus > 0:
        try:
            m, alpha = ladder.analytic_exponent(rates, params.kappa)
            analytic = ladder.analytic_distribution(rates, params.kappa,
                                                    n_used)
            tv = 0.5 * float(np.abs(lad.p1 - analytic).sum())
        except ThermalPumpLimitError:
            analytic = None

    rows = []
    for n in range(n_used + 1):
        rows.append({"n": n, "p_numeric": float(lad.p1[n]),
                     "p_analytic": None if analytic is None
                     else float(analytic[n])})
    base = rc.output.path
    data_path = base + (".csv" if rc.output.format == "csv" else ".json")
    try:
        _write_rows(data_path, rc.output.format,
                    ["n", "p_numeric", "p_analytic"], rows)
        _write_sidecar(base + "_meta.json", {
            "mode": "dist",
            "library_version": __version__,
            "parameters": asdict(rc.params),
            "solver": asdict(rc.solver),
            "N_used": n_used,
            "residual": lad.residual,
            "mean_n": obs.mean_n,
            "mean_n2": obs.mean_n2,
            "fano": obs.fano,
            "q_mandel": obs.q_mandel,
            "analytic_exponent_m": m,
            "analytic_alpha": alpha,
            "tv_distance_numeric_analytic": tv,
            "wall_s_total": time.perf_counter() - t0,
        })
        if rc.output.emit_plot_script:
            _emit_dist_plot_script(base, data_path)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    print(f"dist: N={n_used} -> {data_path}", file=sys.stderr)
    return 0


# ------------------------------------------------------------- validate

def run_validate(rc: RunConfig) -> int:
    results = validation.run_all(n_override=rc.solver.n_override,
                                 tail_tol=rc.solver.tail_tol)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: measured={r.measured:.3e} "
              f"tolerance={r.tolerance:.3e} ({r.details})")
    n_fail = sum(not r.passed for r in results)
    if rc.output.path:
        try:
            _write_sidecar(rc.output.path + "_validate.json", {
                "mode": "validate",
                "library_version": __version__,
                "solver": asdict(rc.solver),
                "checks": [r.to_dict() for r in results],
                "n_failed": n_fail,
            })
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return 1
    print(f"validate: {len(results) - n_fail}/{len(results)} checks passed",
          file=sys.stderr)
    return 0 if n_fail == 0 else 3


# --------------------------------------------------------- plot scripts

_SWEEP_PLOT = """\
#!/usr/bin/env python3
\"\"\"Two-panel sweep figure: mean photon number and Mandel Q vs pump.\"\"\"
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {default!r}
series = {{}}
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        lab = row["gap_config_label"]
        series.setdefault(lab, {{"x": [], "n": [], "q": []}})
        if row["mean_n"] == "":
            continue
        series[lab]["x"].append(float(row["cos4phi"]))
        series[lab]["n"].append(float(row["mean_n"]))
        series[lab]["q"].append(float(row["q_mandel"])
                                if row["q_mandel"] != "" else float("nan"))

fig, (ax_n, ax_q) = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
styles = {{"no_gap": "-", "full_gap": ":"}}
for lab, d in sorted(series.items()):
    ax_n.plot(d["x"], d["n"], styles.get(lab, "-"), label=lab)
    ax_q.plot(d["x"], d["q"], styles.get(lab, "-"), label=lab)
ax_n.set_ylabel("mean photon number")
ax_q.set_ylabel("Mandel Q")
ax_q.set_xlabel("pump parameter cos^4(phi)")
ax_n.legend()
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=160)
print("wrote", out)
"""

_SPECTRUM_PLOT = """\
#!/usr/bin/env python3
\"\"\"Spectrum panels: pass one or two CSV files (below/above threshold).\"\"\"
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

paths = sys.argv[1:] or [{default!r}]
fig, axes = plt.subplots(1, len(paths), figsize=(6 * len(paths), 4.5))
if len(paths) == 1:
    axes = [axes]
for ax, path in zip(axes, paths):
    omega, s = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            omega.append(float(row["omega"]))
            s.append(float(row["s"]))
    ax.plot(omega, s)
    ax.set_xlabel("detuning from the lasing frequency")
    ax.set_ylabel("spectral density (unit peak)")
    ax.set_title(path)
fig.tight_layout()
out = paths[0].rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=160)
print("wrote", out)
"""

_DIST_PLOT = """\
#!/usr/bin/env python3
\"\"\"Photon-number distribution: stationary solve vs closed form.\"\"\"
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {default!r}
n, pn, pa = [], [], []
with open(path, newline="") as fh:
    for row in csv.DictReader(fh):
        n.append(int(row["n"]))
        pn.append(float(row["p_numeric"]))
        pa.append(float(row["p_analytic"]) if row["p_analytic"] else None)
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot(n, pn, label="stationary solve")
if any(v is not None for v in pa):
    ax.plot(n, pa, "--", label="closed form")
ax.set_xlabel("photon number")
ax.set_ylabel("probability")
ax.legend()
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=160)
print("wrote", out)
"""


def _emit_sweep_plot_script(base, data_path):
    _write_text(base + "_plot.py", _SWEEP_PLOT.format(default=data_path))


def _emit_spectrum_plot_script(base, data_path):
    _write_text(base + "_plot.py", _SPECTRUM_PLOT.format(default=data_path))


def _emit_dist_plot_script(base, data_path):
    _write_text(base + "_plot.py", _DIST_PLOT.format(default=data_path))


def _write_text(path, text):
    _prepare_out(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# ----------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse defaults to exit code 2; usage problems are exit 1 here
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="mode")
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--out", help="output path stem")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--points", type=int, help="sweep grid points")
        p.add_argument("--threads", type=int, help="worker pool size")
        p.add_argument("--emit-plot-script", action="store_true",
                       default=None)
    return parser


def _config_from_args(args) -> RunConfig:
    raw = load_config(args.config) if args.config else {}
    raw = dict(raw)
    raw["mode"] = args.mode if args.mode else raw.get("mode")
    rc = parse_config(raw)
    # flags win over file values
    if args.out is not None:
        rc.output.path = args.out
    if args.format is not None:
        rc.output.format = args.format
    if args.points is not None:
        if args.points < 2:
            raise UsageError("--points must be at least 2")
        rc.sweep.points = args.points
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        rc.threads = args.threads
    if args.emit_plot_script is not None:
        rc.output.emit_plot_script = True
    return rc


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.mode is None:
            raise UsageError("a mode is required: " + "|".join(MODES))
        rc = _config_from_args(args)
        runner = {"sweep": run_sweep, "spectrum": run_spectrum,
                  "dist": run_dist, "validate": run_validate}[rc.mode]
        return runner(rc)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
