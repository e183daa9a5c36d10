"""Experiment configs, sweeps and CSV output.

A config is an INI file. Only ``[network] lambda_R`` and ``lambda_U`` are
required; every other key has a default, and unknown sections or keys are
rejected. The manifest written next to the CSVs is itself a complete
config, so any run can be repeated from its manifest.
"""
from __future__ import annotations

import configparser
import csv
import io
import itertools
import math
import os
import platform
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .charfn import AnalyticOptions
from .core_model import NetworkParams, ParameterError, TruncationPolicy, density_for_mean, validate
from .coverage import coverage_point, mean_se
from .montecarlo import SimMode, SimOptions, empirical_coverage, interference_ratio, simulate_sinr
from .quadrature import QuadratureError

KINDS = ("coverage_curve", "se_map", "interference_ratio_map", "validation_suite")
SEED_ENV = "JTCRAN_MASTER_SEED"

# axes that may be swept; nodes_R / nodes_U set a density through the mean count per cooperation zone
SWEEP_AXES = ("M", "alpha", "r1", "N0", "lambda_R", "lambda_U", "nodes_R", "nodes_U", "theta_db")

DEFAULT_SWEEPS = {
    "coverage_curve": (("theta_db", tuple(np.arange(-10.0, 20.01, 2.5).tolist())),),
    "se_map": (("nodes_R", (1.0, 3.75, 6.5)), ("nodes_U", (1.0, 3.75, 6.5))),
    "interference_ratio_map": (("nodes_R", (1.0, 3.0, 5.0)), ("nodes_U", (1.0, 3.0, 5.0))),
    "validation_suite": (),
}


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: NetworkParams
    sweep: tuple = ()                       # ((axis, (values, ...)), ...)
    output: str = "results"
    workers: int = 1
    n_realizations: int = 10_000
    master_seed: int = 0
    mode: str = "exact"
    far_field: bool = True
    chunk: int = 2000
    analytic: bool = True
    empirical: bool = True
    options: AnalyticOptions = AnalyticOptions()
    policy: TruncationPolicy = TruncationPolicy()

    def axes(self) -> dict:
        return dict(self.sweep)


# ------------------------------------------------------------------ parsing
_SECTIONS = {
    "experiment": {"kind": str, "output": str, "workers": int},
    "network": {f.name: (int if f.name == "M" else float) for f in fields(NetworkParams)},
    "sweep": {name: "list" for name in SWEEP_AXES},
    "montecarlo": {"n_realizations": int, "master_seed": int, "mode": str, "far_field": bool,
                   "chunk": int, "enabled": bool},
    "analytic": {**{f.name: type(f.default) for f in fields(AnalyticOptions)}, "enabled": bool},
    "truncation": {f.name: type(f.default) for f in fields(TruncationPolicy)},
    "run": None,                            # written into manifests, ignored when read back
}
_REQUIRED = (("network", "lambda_R"), ("network", "lambda_U"))


def _line_numbers(text: str) -> dict:
    where, section = {}, None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), no)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), no)
    return where


def _convert(kind, raw: str):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        value = float(raw)
        if value != int(value):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if kind is float:
        return float(raw)
    return raw


def _parse_list(raw: str) -> tuple:
    raw = raw.strip()
    m = re.fullmatch(r"(\S+)\s*:\s*(\S+)\s*:\s*(\S+)", raw)
    if m:
        start, stop, step = (float(g) for g in m.groups())
        if step <= 0:
            raise ValueError("range step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + i * step) for i in range(n))
    values = tuple(float(v) for v in raw.split(",") if v.strip())
    if not values:
        raise ValueError("sweep axis is empty")
    return values


def parse_config_text(text: str, origin: str = "<config>") -> ExperimentSpec:
    where = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None

    def err(section, key, msg):
        line = where.get((section, key), where.get((section, None), "?"))
        name = f"{section}.{key}" if key else f"[{section}]"
        return ConfigError(f"{origin}: line {line}: {name}: {msg}")

    values = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise err(section, None, "unknown section")
        schema = _SECTIONS[section]
        if schema is None:
            continue
        for key, raw in cp.items(section):
            if key not in schema:
                raise err(section, key, "unknown key")
            kind = schema[key]
            try:
                values[(section, key)] = _parse_list(raw) if kind == "list" else _convert(kind, raw)
            except ValueError as exc:
                raise err(section, key, f"could not parse {raw.strip()!r}: {exc}") from None
    for section, key in _REQUIRED:
        if (section, key) not in values:
            raise ConfigError(f"{origin}: missing required key {section}.{key}")

    get = values.get
    kind = get(("experiment", "kind"), "coverage_curve")
    if kind not in KINDS:
        raise err("experiment", "kind", f"must be one of {', '.join(KINDS)}")
    try:
        params = validate(NetworkParams(**{k: v for (s, k), v in values.items() if s == "network"}))
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"{origin}: [network]: {exc}") from None
    try:
        policy = TruncationPolicy(**{k: v for (s, k), v in values.items() if s == "truncation"})
    except ParameterError as exc:
        raise ConfigError(f"{origin}: [truncation]: {exc}") from None
    options = AnalyticOptions(**{k: v for (s, k), v in values.items() if s == "analytic" and k != "enabled"})
    sweep = tuple((k, v) for (s, k), v in values.items() if s == "sweep") or DEFAULT_SWEEPS[kind]
    if kind == "coverage_curve" and "theta_db" not in dict(sweep):
        sweep = sweep + DEFAULT_SWEEPS[kind]
    mode = get(("montecarlo", "mode"), "exact")
    try:
        SimMode.parse(mode)
    except ValueError as exc:
        raise err("montecarlo", "mode", str(exc)) from None
    spec = ExperimentSpec(
        kind=kind, params=params, sweep=sweep,
        output=get(("experiment", "output"), "results"),
        workers=get(("experiment", "workers"), 1),
        n_realizations=get(("montecarlo", "n_realizations"), 10_000),
        master_seed=get(("montecarlo", "master_seed"), 0),
        mode=SimMode.parse(mode).value,
        far_field=get(("montecarlo", "far_field"), True),
        chunk=get(("montecarlo", "chunk"), 2000),
        analytic=get(("analytic", "enabled"), True),
        empirical=get(("montecarlo", "enabled"), True),
        options=options, policy=policy)
    _check_spec(spec, err)
    return spec


def _check_spec(spec: ExperimentSpec, err):
    if spec.workers < 1:
        raise err("experiment", "workers", "must be >= 1")
    if spec.n_realizations < 1:
        raise err("montecarlo", "n_realizations", "must be >= 1")
    if spec.chunk < 1:
        raise err("montecarlo", "chunk", "must be >= 1")
    allowed = {
        "gamma_source": ("printed", "empirical"), "lens_coeffs": ("derived", "printed"),
        "rrh_overlap": ("conditioned", "palm"), "user_lens": ("linearized", "exact"),
        "interferer_sets": ("truncated", "size_biased"),
    }
    for key, choices in allowed.items():
        if getattr(spec.options, key) not in choices:
            raise err("analytic", key, f"must be one of {', '.join(choices)}")
    axes = spec.axes()
    if spec.kind != "coverage_curve" and "theta_db" in axes:
        raise err("sweep", "theta_db", "only coverage_curve sweeps thresholds")
    if "nodes_R" in axes and "lambda_R" in axes or "nodes_U" in axes and "lambda_U" in axes:
        raise err("sweep", None, "a density may be swept either directly or by node count, not both")
    out = Path(spec.output)
    parent = out if out.exists() else out.parent
    while not parent.exists() and parent != parent.parent:
        parent = parent.parent
    if not os.access(parent, os.W_OK):
        raise err("experiment", "output", f"{spec.output} is not writable")


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    spec = parse_config_text(text, str(path))
    override = os.environ.get(SEED_ENV)
    if override is not None:
        try:
            spec = replace(spec, master_seed=int(override))
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={override!r} is not an integer") from None
    return spec


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_ini(spec: ExperimentSpec, extra: dict | None = None) -> str:
    """Every field of ``spec`` as config text; ``extra`` goes to a [run] section."""
    out = io.StringIO()
    sections = {
        "experiment": dict(kind=spec.kind, output=spec.output, workers=spec.workers),
        "network": spec.params.as_dict(),
        "sweep": {k: ", ".join(repr(float(x)) for x in v) for k, v in spec.sweep},
        "montecarlo": dict(n_realizations=spec.n_realizations, master_seed=spec.master_seed, mode=spec.mode,
                           far_field=spec.far_field, chunk=spec.chunk, enabled=spec.empirical),
        "analytic": {**{f.name: getattr(spec.options, f.name) for f in fields(AnalyticOptions)},
                     "enabled": spec.analytic},
        "truncation": {f.name: getattr(spec.policy, f.name) for f in fields(TruncationPolicy)},
    }
    if extra:
        sections["run"] = extra
    for name, items in sections.items():
        out.write(f"[{name}]\n")
        for k, v in items.items():
            out.write(f"{k} = {_fmt(v)}\n")
        out.write("\n")
    return out.getvalue()


def default_config(kind: str = "coverage_curve") -> str:
    from .core_model import FIG4_BASE, FIG5, FIG6_BASE

    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}")
    base = {"se_map": FIG6_BASE, "interference_ratio_map": FIG4_BASE}.get(kind, FIG5)
    return to_ini(ExperimentSpec(kind=kind, params=base, sweep=DEFAULT_SWEEPS[kind]))


# ------------------------------------------------------------- execution
def _grid(spec: ExperimentSpec):
    """(coordinate names, list of (coords, params)) over every non-threshold axis."""
    axes = [(k, v) for k, v in spec.sweep if k != "theta_db"]
    names = [k for k, _ in axes]
    points = []
    for combo in itertools.product(*[v for _, v in axes]):
        p = spec.params
        changes = {}
        for name, value in zip(names, combo):
            if name == "M":
                changes["M"] = int(value)
            elif name not in ("nodes_R", "nodes_U"):
                changes[name] = value
        # node counts refer to the swept r1 when both are present
        r1 = changes.get("r1", p.r1)
        for name, value in zip(names, combo):
            if name in ("nodes_R", "nodes_U"):
                changes["lambda_" + name[-1]] = density_for_mean(value, r1, p.r0)
        try:
            points.append((combo, validate(p.with_(**changes))))
        except ParameterError as exc:
            raise ConfigError(f"sweep point {dict(zip(names, combo))}: {exc}") from None
    return names, points


def _pool_map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _analytic_curve(job):
    params, thetas_db, policy, options = job
    rows = []
    for db in thetas_db:
        pt = coverage_point(params, 10.0 ** (db / 10.0), policy, options)
        err = pt.neglected_mass + (pt.gp.body_error + pt.gp.tail_error if pt.gp else 0.0)
        rows.append((pt.prob, err))
    probs = np.minimum.accumulate(np.array([r[0] for r in rows]))
    return [(float(p), float(e)) for p, (_, e) in zip(probs, rows)]


def _mean_se(job):
    params, policy, options = job
    return mean_se(params, policy, options, detail=True)


@dataclass
class Table:
    name: str
    header: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return buf.getvalue()


def _run_coverage(spec, names, points, diag):
    thetas_db = spec.axes()["theta_db"]
    thetas = 10.0 ** (np.asarray(thetas_db) / 10.0)
    curves = Table("coverage", names + ["theta_db", "value", "error", "source"])
    gaps = Table("coverage_gap", names + ["value", "error", "source"])
    analytic = []
    if spec.analytic:
        jobs = [(p, thetas_db, spec.policy, spec.options) for _, p in points]
        try:
            analytic = _pool_map(_analytic_curve, jobs, spec.workers)
        except QuadratureError as exc:
            raise ExperimentError(f"numeric failure in an analytic coverage curve: {exc}") from None
    opts = SimOptions(far_field=spec.far_field, gamma_source=spec.options.gamma_source,
                      workers=spec.workers, chunk=spec.chunk)
    mode = SimMode.parse(spec.mode)
    hw_max = 0.0
    for i, (coords, params) in enumerate(points):
        emp = None
        if spec.empirical:
            s = simulate_sinr(params, mode, spec.n_realizations, None, spec.master_seed, opts)
            emp = empirical_coverage(s, thetas)
            hw_max = max(hw_max, float(emp.diagnostics["half_width"].max()))
        if analytic:
            for db, (p, e) in zip(thetas_db, analytic[i]):
                curves.rows.append(list(coords) + [db, p, e, "analytic"])
        if emp is not None:
            for db, p, h in zip(thetas_db, emp.probs, emp.diagnostics["half_width"]):
                curves.rows.append(list(coords) + [db, float(p), float(h), f"empirical:{mode.value}"])
        if analytic and emp is not None:
            gap = float(np.max(np.abs(np.array([a for a, _ in analytic[i]]) - emp.probs)))
            gaps.rows.append(list(coords) + [gap, float(emp.diagnostics["half_width"].max()),
                                             f"analytic-vs-empirical:{mode.value}"])
    if analytic:
        diag["max_analytic_error"] = max(e for c in analytic for _, e in c)
    if spec.empirical:
        diag["max_wilson_half_width"] = hw_max
    return [curves] + ([gaps] if gaps.rows else [])


def _run_se(spec, names, points, diag):
    table = Table("mean_se", names + ["value", "error", "source"])
    try:
        res = _pool_map(_mean_se, [(p, spec.policy, spec.options) for _, p in points], spec.workers)
    except QuadratureError as exc:
        raise ExperimentError(f"numeric failure in the mean spectral efficiency map: {exc}") from None
    for (coords, _), r in zip(points, res):
        table.rows.append(list(coords) + [r.value, r.tail, "analytic"])
    diag["max_tail_extrapolation"] = max((r.tail for r in res), default=0.0)
    return [table]


def _run_ratio(spec, names, points, diag):
    table = Table("interference_ratio", names + ["value", "error", "source"])
    opts = SimOptions(far_field=spec.far_field, gamma_source=spec.options.gamma_source,
                      workers=spec.workers, chunk=spec.chunk)
    zero = 0
    for coords, params in points:
        r = interference_ratio(params, spec.n_realizations, None, spec.master_seed, opts)
        zero = max(zero, r.zero_out_of_set)
        table.rows.append(list(coords) + [r.ratio, r.std_error, "empirical:gamma_approx"])
    diag["max_realizations_without_out_of_set"] = zero
    return [table]


def _run_validation(spec, names, points, diag):
    from .validation import run_all

    table = Table("validation", ["check", "value", "error", "source", "passed"])
    checks = run_all()
    for c in checks:
        table.rows.append([c.name, c.value, c.limit, "oracle", "true" if c.passed else "false"])
    diag["failed_checks"] = sum(not c.passed for c in checks)
    return [table]


_RUNNERS = {"coverage_curve": _run_coverage, "se_map": _run_se,
            "interference_ratio_map": _run_ratio, "validation_suite": _run_validation}


@dataclass
class RunResult:
    tables: list
    manifest: Path
    files: list
    diagnostics: dict


def _code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run_experiment(spec: ExperimentSpec) -> RunResult:
    t0 = time.perf_counter()
    names, points = _grid(spec) if spec.kind != "validation_suite" else ([], [])
    diag: dict = {}
    tables = _RUNNERS[spec.kind](spec, names, points, diag)
    out = Path(spec.output)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for t in tables:
        path = out / f"{t.name}.csv"
        path.write_text(t.to_csv(), encoding="utf-8")
        files.append(path)
    extra = dict(code_version=_code_version(), python=platform.python_version(), numpy=np.__version__,
                 scipy=scipy.__version__, wall_time_s=round(time.perf_counter() - t0, 3),
                 files=", ".join(p.name for p in files), **{k: _fmt(v) for k, v in diag.items()})
    manifest = out / "manifest.ini"
    manifest.write_text(to_ini(spec, extra), encoding="utf-8")
    return RunResult(tables, manifest, files, diag)
