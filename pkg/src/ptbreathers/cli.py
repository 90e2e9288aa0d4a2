"""Command-line driver producing plot-ready CSV/JSON tables.

Every run reads one INI file (``--config PATH`` or ``--config preset:NAME``)
whose sections hold the parameters; ``--set section.key=value`` overrides
single entries.  Output is deterministic: independent sweep points are
solved from scratch and reassembled in grid order whatever the thread count.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from .continuation import continue_eps, eps_ladder, solve_breather
from .dimer import (
    classify_branches,
    dimer_jacobian,
    limit_spectrum,
    point_from_amplitude,
    solve_for_E,
)
from .dynamics import (
    PendulaParams,
    integrate_pendula,
    integrate_pt_dnls,
    multiscale_validate,
    orbital_probe,
    random_perturbation,
    synthesize_pendula,
)
from .errors import BrokenSymmetryError, DivergenceError, DomainError, PreconditionError, SingularityError
from .model import ModelParams, UVState, zero_field
from .spectral import IMAG_TOL, KREIN_TOL, ZERO_TOL, band_edges, eigen_spectrum, stability_index

log = logging.getLogger("ptbreathers")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
UNSTABLE = 1e-6
NUMERIC_ERRORS = (DivergenceError, SingularityError, DomainError, PreconditionError, ArithmeticError)

TOLERANCES = {
    "newton_tol": 1e-12,
    "zero_cluster": ZERO_TOL,
    "imag_axis": IMAG_TOL,
    "krein_indeterminate": KREIN_TOL,
    "instability_threshold": UNSTABLE,
}


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


@dataclass
class RunConfig:
    command: str
    sections: dict[str, dict[str, str]]
    source: str
    out: str | None = None
    fmt: str = "csv"
    seed: int = 0
    threads: int = 1

    def raw(self, section: str, key: str):
        return self.sections.get(section, {}).get(key)

    def get(self, section: str, key: str, default=None, kind=float):
        value = self.raw(section, key)
        if value is None:
            if default is None:
                raise UsageError(f"missing config entry [{section}] {key}")
            return default
        try:
            return kind(value)
        except ValueError as exc:
            raise UsageError(f"bad value for [{section}] {key}: {value!r}") from exc

    def floats(self, section: str, key: str, default=None) -> list[float]:
        value = self.raw(section, key)
        if value is None:
            if default is None:
                raise UsageError(f"missing config entry [{section}] {key}")
            return list(default)
        try:
            return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad list for [{section}] {key}: {value!r}") from exc

    def lookup(self, section: str, key: str, default=None, kind=float):
        """Entry from ``section`` falling back to [model]."""
        if self.raw(section, key) is not None:
            return self.get(section, key, kind=kind)
        return self.get("model", key, default, kind)

    def model(self, section: str = "model") -> ModelParams:
        try:
            return ModelParams(
                gamma=self.lookup(section, "gamma"),
                omega=self.lookup(section, "omega"),
                eps=self.lookup(section, "eps", 0.0),
                E=self.get(section, "E", 0.0),
            )
        except DomainError as exc:
            raise UsageError(str(exc)) from exc

    def half_width(self, section: str = "model") -> int:
        hw = self.lookup(section, "half_width", 20, int)
        if hw < 1:
            raise UsageError("half_width must be >= 1")
        return hw

    def grid(self, section: str, name: str) -> list[float]:
        """Grid from ``name_values`` or ``name_start/name_stop/name_step`` (inclusive)."""
        if self.raw(section, f"{name}_values") is not None:
            values = self.floats(section, f"{name}_values")
        elif self.raw(section, f"{name}_start") is not None:
            start = self.get(section, f"{name}_start")
            stop = self.get(section, f"{name}_stop")
            step = self.get(section, f"{name}_step")
            if step <= 0:
                raise UsageError(f"[{section}] {name}_step must be positive")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + k * step, 12) for k in range(max(n, 0))]
        else:
            raise UsageError(f"[{section}] needs {name}_values or {name}_start/_stop/_step")
        if not values:
            raise UsageError(f"[{section}] {name} grid is empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise UsageError(f"[{section}] {name} grid must be strictly increasing")
        return values

    def echo(self) -> dict:
        return {s: dict(sorted(v.items())) for s, v in sorted(self.sections.items())}


def preset_names() -> list[str]:
    files = resources.files("ptbreathers").joinpath("presets")
    return sorted(f.name[:-4] for f in files.iterdir() if f.name.endswith(".ini"))


def load_config(spec: str | None, overrides: list[str]) -> tuple[dict, str]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep case: E, E_start, ...
    source = "<none>"
    if spec:
        if spec.startswith("preset:"):
            name = spec.split(":", 1)[1]
            path = resources.files("ptbreathers").joinpath("presets", f"{name}.ini")
            if not path.is_file():
                raise UsageError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
            parser.read_string(path.read_text(), source=spec)
        else:
            try:
                with open(spec, encoding="utf-8") as fh:
                    parser.read_file(fh)
            except OSError as exc:
                raise UsageError(f"cannot read config {spec}: {exc}") from exc
        source = spec
    sections = {s: dict(parser[s]) for s in parser.sections()}
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot:
            raise UsageError(f"override must look like section.key=value, got {item!r}")
        sections.setdefault(section.strip(), {})[name.strip()] = value.strip()
    return sections, source


@dataclass
class Table:
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def header(cfg: RunConfig) -> dict:
    return {
        "program": "ptbreathers",
        "version": __version__,
        "command": cfg.command,
        "config_source": cfg.source,
        "config": cfg.echo(),
        "seed": cfg.seed,
        "tolerances": TOLERANCES,
    }


def render(table: Table, cfg: RunConfig) -> str:
    head = header(cfg)
    if cfg.fmt == "json":
        doc = {
            "header": head,
            "columns": table.columns,
            "rows": [{c: _json_value(v) for c, v in zip(table.columns, row)} for row in table.rows],
            "summary": {k: _json_value(v) for k, v in table.summary.items()},
        }
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"
    buf = io.StringIO()
    for key, value in head.items():
        text = json.dumps(value, sort_keys=True) if isinstance(value, dict) else value
        buf.write(f"# {key}: {text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    for key, value in table.summary.items():
        buf.write(f"# summary {key}: {_fmt(value)}\n")
    return buf.getvalue()


def _pool_map(cfg: RunConfig, fn, items):
    if cfg.threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


# branches -----------------------------------------------------------------


def cmd_branches(cfg: RunConfig) -> Table:
    p = cfg.model()
    n = cfg.get("branches", "n_points", 100, int)
    span = cfg.get("branches", "amp_sq_span", 2.0)
    e_sign = cfg.get("branches", "e_sign", 1, int)
    if n < 1:
        raise UsageError("empty A^2 grid")
    if e_sign not in (1, -1):
        raise UsageError("e_sign must be +1 or -1")
    try:
        descriptors = classify_branches(p.gamma, p.omega)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    columns = ["branch", "A_sq", "E", "theta", "mu1", "mu2", "mu3",
               "lambda0_im_or_re", "lambda0_is_real", "jacobian_invertible"]
    rows = []
    for desc in descriptors:
        lo, hi = desc.amp_sq_range
        if desc.branch == "c":
            grid = [hi * k / (n + 1) for k in range(1, n + 1)]
        else:
            lo = max(lo, 0.0)
            grid = [lo + span * k / n for k in range(1, n + 1)]
        for a2 in grid:
            pt = point_from_amplitude(a2, e_sign, p, desc.branch)
            q = p.with_(E=pt.E)
            ls = limit_spectrum(pt, q)
            _, inv = dimer_jacobian(pt, q)
            is_real = ls.lambda0.real != 0.0
            lam = ls.lambda0.real if is_real else ls.lambda0.imag
            rows.append([desc.branch, a2, pt.E, pt.theta, ls.mu1, ls.mu2, ls.mu3, lam, is_real, inv])
    return Table(columns, rows, {"branches": "".join(d.branch for d in descriptors)})


# continue -----------------------------------------------------------------


def cmd_continue(cfg: RunConfig) -> Table:
    p = cfg.model()
    branch = cfg.get("continue", "branch", kind=str)
    E = cfg.get("continue", "E")
    hw = cfg.half_width("continue")
    eps_max = cfg.get("continue", "eps_max")
    eps_step = cfg.get("continue", "eps_step", 0.005)
    try:
        pt = solve_for_E(E, p.with_(E=E), branch)
        run = continue_eps(pt, p.with_(E=E), eps_ladder(eps_max, eps_step), hw)
    except NUMERIC_ERRORS as exc:
        raise NumericFailure(f"continuation failed at the first step: {exc}") from exc
    columns = ["eps", "site", "re_U", "im_U", "residual", "newton_iters"]
    rows = []
    for sol in run:
        for i, U in enumerate(sol.field):
            rows.append([sol.params.eps, i - hw, U.real, U.imag, sol.residual_norm, sol.newton_iters])
    summary = {"eps_reached": run.eps_reached, "completed": run.completed}
    if run.failure:
        summary["failure"] = run.failure
    return Table(columns, rows, summary, EXIT_OK if run.completed else EXIT_PARTIAL)


# spectrum -----------------------------------------------------------------

SPECTRUM_COLUMNS = [
    "E", "index", "re", "im", "max_real", "K_HAM", "K_inertia", "krein_sign", "band",
    "band_plus_lo", "band_plus_hi", "band_minus_lo", "band_minus_hi", "status",
]


def _spectrum_point(branch: str, p: ModelParams, hw: int, dE: float):
    try:
        sol = solve_breather(branch, p, hw)
        try:
            report, idx, _ = stability_index(sol, dE)
            status = "ok"
        except (PreconditionError, SingularityError) as exc:
            report = eigen_spectrum(sol)
            status = f"ok; index not evaluated: {exc}"
    except NUMERIC_ERRORS as exc:
        return None, f"failed: {type(exc).__name__}: {exc}"
    try:
        edges = band_edges(p).intervals
        plus, minus = edges["+lambda_plus"], edges["+lambda_minus"]
    except BrokenSymmetryError:
        plus = minus = (math.nan, math.nan)
    return (report, idx, plus, minus), status


def unstable_windows(E_values, max_real, threshold=UNSTABLE):
    """Contiguous runs of grid points with max_real above ``threshold``."""
    runs, current = [], None
    for E, m in zip(E_values, max_real):
        if m is not None and m > threshold:
            current = [E, E] if current is None else [current[0], E]
        else:
            if current is not None:
                runs.append(tuple(current))
            current = None
    if current is not None:
        runs.append(tuple(current))
    return runs


def cmd_spectrum(cfg: RunConfig) -> Table:
    branch = cfg.get("spectrum", "branch", kind=str)
    p = cfg.model("spectrum")
    hw = cfg.half_width("spectrum")
    dE = cfg.get("spectrum", "dE", 1e-5)
    E_grid = cfg.grid("spectrum", "E")

    results = _pool_map(cfg, lambda E: _spectrum_point(branch, p.with_(E=E), hw, dE), E_grid)
    rows, maxes, failures = [], [], 0
    nan = math.nan
    for E, (res, status) in zip(E_grid, results):
        if res is None:
            failures += 1
            maxes.append(None)
            log.warning("spectrum point E=%s %s", E, status)
            rows.append([E, -1, nan, nan, nan, -1, -1, "", "", nan, nan, nan, nan, status])
            continue
        report, idx, plus, minus = res
        maxes.append(report.max_real)
        signs = {k.index: k for k in report.krein}
        K = report.counts["K_HAM"]
        K_in = idx.K_from_inertia if idx is not None else -1
        for i, lam in enumerate(report.eigenvalues):
            entry = signs.get(i)
            sign = "" if entry is None or entry.band else entry.sign
            band = "" if entry is None else entry.band
            rows.append([E, i, lam.real, lam.imag, report.max_real, K, K_in, sign, band,
                         plus[0], plus[1], minus[0], minus[1], status])
    windows = unstable_windows(E_grid, maxes)
    summary = {
        "points": len(E_grid),
        "failed": failures,
        "unstable_windows": json.dumps([[a, b] for a, b in windows]),
    }
    if failures == len(E_grid):
        raise NumericFailure("every sweep point failed", Table(SPECTRUM_COLUMNS, rows, summary))
    return Table(SPECTRUM_COLUMNS, rows, summary, EXIT_PARTIAL if failures else EXIT_OK)


# simulate -----------------------------------------------------------------


def _simulate_breather(cfg: RunConfig) -> Table:
    sec = "simulate"
    p = cfg.model()
    branch = cfg.get(sec, "branch", kind=str)
    p = p.with_(E=cfg.get(sec, "E"), eps=cfg.get(sec, "eps", p.eps))
    hw = cfg.half_width(sec)
    delta = cfg.get(sec, "delta", 0.0)
    T = cfg.get(sec, "T", 10.0)
    dt = cfg.get(sec, "dt", 1e-3)
    every = cfg.get(sec, "sample_every", 100, int)
    try:
        sol = solve_breather(branch, p, hw)
    except NUMERIC_ERRORS as exc:
        raise NumericFailure(f"breather not found: {exc}") from exc
    start = sol.state
    if delta > 0:
        eta = random_perturbation(hw, delta, cfg.seed)
        start = UVState(start.u + eta.u, start.v + eta.v)
    traj = integrate_pt_dnls(start, p, T, dt, every)
    columns = ["t", "site", "re_u", "im_u", "re_v", "im_v", "H", "Q"]
    rows = []
    for s in traj.samples:
        for i in range(s.state.u.size):
            u, v = s.state.u[i], s.state.v[i]
            rows.append([s.t, i - hw, u.real, u.imag, v.real, v.imag, s.H, s.Q])
    table = Table(columns, rows, {"samples": len(traj.samples)})
    if traj.diverged:
        nan = math.nan
        rows.append([traj.blowup_time, "DIVERGED", nan, nan, nan, nan, nan, nan])
        table.summary["blowup_time"] = traj.blowup_time
        table.exit_code = EXIT_NUMERIC
    return table


def _simulate_probe(cfg: RunConfig) -> Table:
    sec = "simulate"
    p = cfg.model()
    branch = cfg.get(sec, "branch", kind=str)
    p = p.with_(E=cfg.get(sec, "E"), eps=cfg.get(sec, "eps", p.eps))
    hw = cfg.half_width(sec)
    delta = cfg.get(sec, "delta", 1e-3)
    T = cfg.get(sec, "T", 100.0)
    dt = cfg.get(sec, "dt", 1e-2)
    every = cfg.get(sec, "sample_every", 10, int)
    try:
        sol = solve_breather(branch, p, hw)
        res = orbital_probe(sol, delta, T, dt, sample_every=every, seed=cfg.seed)
    except NUMERIC_ERRORS as exc:
        raise NumericFailure(f"orbital probe failed: {exc}") from exc
    rows = [["deviation", t, d] for t, d in zip(res.times, res.deviations)]
    rows.append(["max_deviation", res.times[-1] if len(res.times) else 0.0, res.max_deviation])
    table = Table(["kind", "t", "value"], rows, {"max_deviation": res.max_deviation})
    if res.blowup_time is not None:
        rows.append(["DIVERGED", res.blowup_time, math.inf])
        table.summary["blowup_time"] = res.blowup_time
    return table


def _sync_amplitudes(cfg: RunConfig, hw: int):
    amp = cfg.get("simulate", "amplitude", 1.0)
    A = zero_field(hw)
    A[hw] = amp
    return A, A.copy()


def _simulate_multiscale(cfg: RunConfig) -> Table:
    sec = "simulate"
    p = cfg.model()
    hw = cfg.get(sec, "half_width", 5, int)
    T_slow = cfg.get(sec, "T_slow", 1.0)
    mus = cfg.floats(sec, "mu_values", [0.2, 0.1])
    A, B = _sync_amplitudes(cfg, hw)
    try:
        results = _pool_map(
            cfg,
            lambda mu: multiscale_validate((A, B), PendulaParams(mu, p.gamma, p.omega, p.eps), T_slow, half_width=hw),
            mus,
        )
    except (PreconditionError, DomainError) as exc:
        raise UsageError(str(exc)) from exc
    rows = [[r.mu_used, r.error_norm] for r in results]
    summary = {}
    if len(results) >= 2 and results[1].error_norm > 0:
        summary["ratio_first_to_second"] = results[0].error_norm / results[1].error_norm
    return Table(["mu", "error_norm"], rows, summary)


def _simulate_pendula(cfg: RunConfig) -> Table:
    sec = "simulate"
    p = cfg.model()
    hw = cfg.get(sec, "half_width", 5, int)
    mu = cfg.get(sec, "mu", 0.1)
    T = cfg.get(sec, "T", 100.0)
    dt = cfg.get(sec, "dt", 1e-2)
    every = cfg.get(sec, "sample_every", 100, int)
    try:
        pp = PendulaParams(mu, p.gamma, p.omega, p.eps)
    except (PreconditionError, DomainError) as exc:
        raise UsageError(str(exc)) from exc
    A, B = _sync_amplitudes(cfg, hw)
    traj = integrate_pendula(synthesize_pendula(A, B, pp), pp, T, dt, every)
    rows = []
    for t, s, H in zip(traj.times, traj.states, traj.energies):
        for i in range(s.x.size):
            rows.append([t, i - hw, s.x[i], s.y[i], s.xdot[i], s.ydot[i], H])
    table = Table(["t", "site", "x", "y", "xdot", "ydot", "H"], rows)
    if traj.diverged:
        nan = math.nan
        rows.append([traj.blowup_time, "DIVERGED", nan, nan, nan, nan, nan])
        table.summary["blowup_time"] = traj.blowup_time
        table.exit_code = EXIT_NUMERIC
    return table


SIMULATE_MODES = {
    "breather": _simulate_breather,
    "probe": _simulate_probe,
    "multiscale": _simulate_multiscale,
    "pendula": _simulate_pendula,
}


def cmd_simulate(cfg: RunConfig) -> Table:
    mode = cfg.get("simulate", "mode", "breather", str)
    if mode not in SIMULATE_MODES:
        raise UsageError(f"unknown simulate mode {mode!r}; choose from {sorted(SIMULATE_MODES)}")
    return SIMULATE_MODES[mode](cfg)


# table1 -------------------------------------------------------------------


def _continuum(inertia: dict, hw: int) -> str:
    if min(inertia["n_pos"], inertia["n_neg"]) >= 2 * hw:
        return "Sign-indefinite"
    if inertia["n_pos"] <= 3:
        return "Negative"
    return "Unclassified"


def _table1_point(cfg: RunConfig, name: str):
    sec = name
    branch = cfg.get(sec, "branch", kind=str)
    p = cfg.model(sec)
    hw = cfg.half_width(sec)
    row = {"point": name, "branch": branch, "gamma": p.gamma, "omega": p.omega, "eps": p.eps, "E": p.E}
    try:
        sol = solve_breather(branch, p, hw)
        report, idx, _ = stability_index(sol)
    except NUMERIC_ERRORS as exc:
        row.update(converged=False, status=f"failed: {exc}")
        return row
    inertia = report.hessian_inertia
    row.update(converged=True, n_pos=inertia["n_pos"], n_neg=inertia["n_neg"],
               continuum=_continuum(inertia, hw), max_real=report.max_real, K_HAM=idx.K_HAM)

    window = ""
    if cfg.raw(sec, "bubble_E_start") is not None:
        grid = cfg.grid(sec, "bubble_E")

        def probe(E):
            try:
                s = solve_breather(branch, p.with_(E=E), hw)
                return eigen_spectrum(s).max_real
            except NUMERIC_ERRORS:
                return None

        windows = unstable_windows(grid, [probe(E) for E in grid])
        window = json.dumps([[a, b] for a, b in windows])
        bubble = bool(windows)
    else:
        bubble = False

    stable = report.max_real <= UNSTABLE
    spectral = ("Yes (IB)" if bubble else "Yes") if stable else "No"
    outside = abs(p.E) > p.E0 if not math.isnan(p.E0) else True
    if branch == "a" or (branch == "b" and outside):
        orbital = "No"
    elif branch == "b":
        iso = [abs(k.eigenvalue.imag) for k in report.isolated_imaginary()]
        edges = band_edges(p).intervals
        top = max(abs(v) for iv in edges.values() for v in iv)
        orbital = "Yes" if stable and iso and max(iso) > top else "Not established"
    else:
        orbital = "Yes" if stable and idx.K_HAM == 0 and idx.D != 0 else "No"
    row.update(spectral=spectral, bubble_windows=window, orbital=orbital, status="ok")
    return row


TABLE1_COLUMNS = ["point", "branch", "gamma", "omega", "eps", "E", "converged", "continuum",
                  "n_pos", "n_neg", "max_real", "K_HAM", "spectral", "bubble_windows", "orbital", "status"]


def cmd_table1(cfg: RunConfig) -> Table:
    names = [s for s in cfg.sections if s.startswith("point")]
    if not names:
        raise UsageError("table1 needs [point1] ... [point4] sections (try --config preset:table1)")
    results = _pool_map(cfg, lambda n: _table1_point(cfg, n), sorted(names))
    rows = [[r.get(c, "") for c in TABLE1_COLUMNS] for r in results]
    failed = sum(1 for r in results if not r.get("converged"))
    if failed == len(results):
        raise NumericFailure("no Table 1 point converged", Table(TABLE1_COLUMNS, rows))
    return Table(TABLE1_COLUMNS, rows, exit_code=EXIT_PARTIAL if failed else EXIT_OK)


# validate -----------------------------------------------------------------


def _validate_point(cfg: RunConfig, name: str):
    branch = cfg.get(name, "branch", kind=str)
    p = cfg.model(name)
    hw = cfg.half_width(name)
    try:
        sol = solve_breather(branch, p, hw)
        report, idx, kc = stability_index(sol, cfg.get(name, "dE", 1e-5))
    except NUMERIC_ERRORS as exc:
        return [[name, "solve", math.nan, math.nan, False, f"{type(exc).__name__}: {exc}"]]
    checks = [
        ("stationary_residual", sol.residual_norm, 1e-12),
        ("kernel_residual", kc.kernel_residual, 1e-8),
        ("generalized_kernel_residual", kc.gen_kernel_residual, 1e-6),
        ("zero_multiplicity_minus_2", abs(report.zero_multiplicity - 2), 0),
        ("index_mismatch", abs(idx.K_HAM - idx.K_from_inertia), 0),
    ]
    rows = [[name, c, v, tol, bool(v <= tol), ""] for c, v, tol in checks]
    if cfg.raw(name, "expect_K_HAM") is not None:
        want = cfg.get(name, "expect_K_HAM", kind=int)
        rows.append([name, "K_HAM_expected_gap", abs(idx.K_HAM - want), 0, idx.K_HAM == want, f"K_HAM={idx.K_HAM}"])
    return rows


def cmd_validate(cfg: RunConfig) -> Table:
    names = sorted(s for s in cfg.sections if s.startswith("check"))
    if not names:
        raise UsageError("validate needs [check...] sections (try --config preset:validate)")
    chunks = _pool_map(cfg, lambda n: _validate_point(cfg, n), names)
    rows = [r for chunk in chunks for r in chunk]
    failed = sum(1 for r in rows if not r[4])
    table = Table(["point", "check", "value", "tolerance", "passed", "note"], rows,
                  {"checks": len(rows), "failed": failed})
    if failed:
        table.exit_code = EXIT_NUMERIC
    return table


HELP = {
    "branches": "dimer branch diagram over an amplitude grid",
    "continue": "continue one dimer point in the coupling eps",
    "spectrum": "linear spectra along an E sweep at fixed eps",
    "simulate": "time integration: breather, probe, multiscale or pendula",
    "table1": "stability summary for the four exemplar points",
    "validate": "kernel, index and residual checks at configured points",
}

COMMANDS = {
    "branches": cmd_branches,
    "continue": cmd_continue,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file or preset:NAME")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config entry")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="ptbreathers", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def write_output(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        sections, source = load_config(args.config, args.overrides)
        cfg = RunConfig(args.command, sections, source, args.out, args.fmt, args.seed, args.threads)
        table = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"ptbreathers: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"ptbreathers: numeric failure: {exc}", file=sys.stderr)
        if exc.table is not None:
            write_output(render(exc.table, cfg), args.out)
        return EXIT_NUMERIC
    write_output(render(table, cfg), args.out)
    return table.exit_code


if __name__ == "__main__":
    sys.exit(main())
