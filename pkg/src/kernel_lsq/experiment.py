"""Configuration-driven sweeps: stability, Gram certificates and convergence.

A run reads one JSON document, processes every level independently (a
failing level is recorded and skipped) and writes four CSV reports plus a
manifest. Relative paths in the config resolve against the config file.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, _backend
from .errors import ConfigError, KernelLSQError, NoCertificateError
from .geometry import PointSet, generate_fibonacci
from .gram import GAMMA_GRID, select_gamma
from .kernels import kernel_from_json
from .lagrange import renormalize, solve_lagrange
from .projector import (
    L2Projector,
    interpolation_error,
    make_test_function,
    operator_norm_components,
    projector_inf_norm_direct,
    summarize_convergence,
)
from .quadrature import MIN_N_THETA, NODES_PER_H, default_rule, product_rule, sup_grid
from .stability import DEFAULT_SEED, MIN_TRIALS, measure_stability

log = logging.getLogger(__name__)

STABILITY_COLUMNS = ["n", "h", "q", "rho", "C1", "nu", "C2", "eps", "lebesgue", "c1", "c2",
                     "p", "lower", "upper", "seed"]
GRAM_COLUMNS = ["n", "Gamma", "Q", "C0", "tau", "Cconst", "bound", "RinfNorm", "GinvInfNorm", "verdict"]
PROJECTOR_COLUMNS = ["n", "h", "p", "function", "error", "fitted_order"]
OPNORM_COLUMNS = ["n", "Vinf", "Vstarinf", "Ginv", "product", "direct"]
REPORTS = {
    "stability": STABILITY_COLUMNS,
    "gram": GRAM_COLUMNS,
    "projector": PROJECTOR_COLUMNS,
    "opnorm": OPNORM_COLUMNS,
}
# columns that label a row rather than measure something
LABEL_COLUMNS = {"n", "p", "function", "seed"}

DEFAULTS = {
    "kernel": {"type": "sobolev", "beta": 4.0, "tail_tolerance": 1e-10},
    "generator": {"type": "fibonacci"},
    "levels": [100, 400, 1600],
    "quadrature": {"common": True, "n_theta": None, "nodes_per_h": NODES_PER_H,
                   "min_n_theta": MIN_N_THETA},
    "grid_resolution": None,
    "p_values": [1, 2, "inf"],
    "functions": [{"kind": "smooth"}, {"kind": "rough", "s": 2.0}],
    "trials": 64,
    "holder_eps": None,
    "seed": DEFAULT_SEED,
    "output_dir": "results",
}


@dataclass
class ExperimentConfig:
    kernel: dict
    generator: dict
    levels: list
    quadrature: dict
    grid_resolution: int | None
    p_values: list
    functions: list
    trials: int
    holder_eps: float | None
    seed: int
    output_dir: Path
    base_dir: Path = field(default_factory=Path.cwd)

    def as_json(self) -> dict:
        return {
            "kernel": self.kernel, "generator": self.generator, "levels": self.levels,
            "quadrature": self.quadrature, "grid_resolution": self.grid_resolution,
            "p_values": ["inf" if math.isinf(p) else p for p in self.p_values],
            "functions": self.functions, "trials": self.trials, "holder_eps": self.holder_eps,
            "seed": self.seed, "output_dir": str(self.output_dir),
        }

    def digest(self) -> str:
        text = json.dumps(self.as_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _parse_p(value, path):
    if value in ("inf", "Infinity", math.inf):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 1:
        raise ConfigError(path, f"expected a number >= 1 or 'inf', got {value!r}")
    return float(value)


def _positive_int(value, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(path, f"expected an integer >= {minimum}, got {value!r}")
    return value


def parse_config(raw, base_dir=None) -> ExperimentConfig:
    """Validate a config document (dict or JSON text) and fill defaults."""
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("$", "config must be a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if isinstance(cfg[key], dict) and isinstance(value, dict) and key == "quadrature":
            cfg[key].update(value)
        else:
            cfg[key] = value

    if not isinstance(cfg["kernel"], dict):
        raise ConfigError("kernel", "expected an object")
    try:
        kernel_from_json(cfg["kernel"])
    except KeyError as exc:
        raise ConfigError(f"kernel.{exc.args[0]}", "missing field") from exc
    except (KernelLSQError, TypeError, ValueError) as exc:
        raise ConfigError("kernel", str(exc)) from exc

    levels = cfg["levels"]
    if not isinstance(levels, list) or not levels:
        raise ConfigError("levels", "expected a nonempty list")
    for i, n in enumerate(levels):
        _positive_int(n, f"levels[{i}]", minimum=2)
        if i and n <= levels[i - 1]:
            raise ConfigError(f"levels[{i}]", "levels must be strictly increasing")

    gen = cfg["generator"]
    if not isinstance(gen, dict) or gen.get("type") not in ("fibonacci", "file"):
        raise ConfigError("generator.type", "expected 'fibonacci' or 'file'")
    if gen["type"] == "file":
        pattern = gen.get("pattern")
        if not isinstance(pattern, str) or "{n}" not in pattern:
            raise ConfigError("generator.pattern", "expected a path pattern containing '{n}'")

    quad = cfg["quadrature"]
    unknown = sorted(set(quad) - set(DEFAULTS["quadrature"]))
    if unknown:
        raise ConfigError(f"quadrature.{unknown[0]}", "unknown field")
    if quad["n_theta"] is not None:
        _positive_int(quad["n_theta"], "quadrature.n_theta")
    _positive_int(quad["min_n_theta"], "quadrature.min_n_theta")
    if not isinstance(quad["nodes_per_h"], (int, float)) or quad["nodes_per_h"] <= 0:
        raise ConfigError("quadrature.nodes_per_h", "expected a positive number")
    if not isinstance(quad["common"], bool):
        raise ConfigError("quadrature.common", "expected true or false")

    if cfg["grid_resolution"] is not None:
        _positive_int(cfg["grid_resolution"], "grid_resolution", minimum=16)
    if not isinstance(cfg["p_values"], list) or not cfg["p_values"]:
        raise ConfigError("p_values", "expected a nonempty list")
    p_values = [_parse_p(p, f"p_values[{i}]") for i, p in enumerate(cfg["p_values"])]
    if len(set(p_values)) != len(p_values):
        raise ConfigError("p_values", "duplicate entries")

    if not isinstance(cfg["functions"], list):
        raise ConfigError("functions", "expected a list")
    names = set()
    for i, spec in enumerate(cfg["functions"]):
        if not isinstance(spec, dict):
            raise ConfigError(f"functions[{i}]", "expected an object")
        try:
            name = make_test_function(spec.get("kind"), spec.get("s")).name \
                if spec.get("kind") != "in_span" else "in_span"
        except KernelLSQError as exc:
            raise ConfigError(f"functions[{i}]", str(exc)) from exc
        if name in names:
            raise ConfigError(f"functions[{i}]", f"duplicate function {name}")
        names.add(name)

    _positive_int(cfg["trials"], "trials", minimum=MIN_TRIALS)
    eps = cfg["holder_eps"]
    if eps is not None and (not isinstance(eps, (int, float)) or not 0 < eps <= 1):
        raise ConfigError("holder_eps", "expected a number in (0, 1]")
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed", "expected a nonnegative integer")
    if not isinstance(cfg["output_dir"], str) or not cfg["output_dir"]:
        raise ConfigError("output_dir", "expected a path")

    base = Path(base_dir) if base_dir is not None else Path.cwd()
    out = Path(cfg["output_dir"])
    return ExperimentConfig(
        kernel=cfg["kernel"], generator=gen, levels=list(levels), quadrature=quad,
        grid_resolution=cfg["grid_resolution"], p_values=p_values, functions=cfg["functions"],
        trials=cfg["trials"], holder_eps=eps, seed=cfg["seed"],
        output_dir=out if out.is_absolute() else base / out, base_dir=base,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


def validate(config) -> list[str]:
    """Diagnostics for a config (path, dict or parsed); raises ConfigError when invalid."""
    if isinstance(config, (str, Path)):
        config = load_config(config)
    elif isinstance(config, dict):
        config = parse_config(config)
    notes = []
    if config.levels[-1] > 4000:
        notes.append(f"finest level {config.levels[-1]} exceeds the dense desk scale (~4000)")
    if config.generator["type"] == "file":
        for n in config.levels:
            p = _level_path(config, n)
            if not p.exists():
                notes.append(f"missing point file {p}")
    return notes


def _level_path(config: ExperimentConfig, n: int) -> Path:
    p = Path(config.generator["pattern"].format(n=n))
    return p if p.is_absolute() else config.base_dir / p


def _point_set(config: ExperimentConfig, n: int) -> PointSet:
    if config.generator["type"] == "fibonacci":
        return generate_fibonacci(n)
    ps = PointSet.load_csv(_level_path(config, n))
    if len(ps) != n:
        raise ConfigError("generator.pattern", f"file for level {n} holds {len(ps)} points")
    return ps


def _rule(config: ExperimentConfig, h: float):
    quad = config.quadrature
    if quad["n_theta"] is not None:
        return product_rule(quad["n_theta"], 2 * quad["n_theta"])
    return default_rule(h, quad["min_n_theta"], quad["nodes_per_h"])


def _p_label(p) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, columns, rows) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class LevelResult:
    n: int
    point_set: PointSet | None = None
    stability: object = None
    certificate: object = None
    certificate_error: str | None = None
    norms: object = None
    direct: float = math.nan
    errors: dict = field(default_factory=dict)
    interpolation_errors: dict = field(default_factory=dict)
    times: dict = field(default_factory=dict)
    failure: str | None = None


def run_level(config: ExperimentConfig, n: int, rule=None) -> LevelResult:
    """All measurements for one level; numerical failures are captured, not raised."""
    res = LevelResult(n)
    clock = time.perf_counter
    t0 = clock()
    try:
        ps = _point_set(config, n)
        res.point_set = ps
        kernel = kernel_from_json(config.kernel)
        basis = solve_lagrange(kernel, ps)
        res.times["basis"] = clock() - t0
        rule = rule if rule is not None else _rule(config, ps.h)
        grid = sup_grid(ps.points, config.grid_resolution)
        v2 = renormalize(basis, 2.0)
        t = clock()
        proj = L2Projector(v2, rule)
        res.times["gram"] = clock() - t
        t = clock()
        res.stability = measure_stability(basis, proj.gram, rule, grid, config.p_values,
                                          config.trials, config.holder_eps, config.seed)
        res.times["stability"] = clock() - t
        t = clock()
        try:
            res.certificate = select_gamma(proj.gram, res.stability, gammas=GAMMA_GRID)
        except NoCertificateError as exc:
            res.certificate_error = str(exc)
        res.times["certificate"] = clock() - t
        t = clock()
        ginv = res.certificate.measured_inverse_inf_norm if res.certificate else None
        res.norms = operator_norm_components(v2, rule, grid, proj.gram, ginv)
        res.direct = projector_inf_norm_direct(v2, projector=proj)
        res.times["opnorm"] = clock() - t
        t = clock()
        for spec in config.functions:
            f = make_test_function(spec["kind"], spec.get("s"), spec.get("axis"),
                                   basis=v2, seed=config.seed)
            for p in config.p_values:
                res.errors[(f.name, p)] = proj.error(f, p, grid)
                res.interpolation_errors[(f.name, p)] = interpolation_error(f, v2, rule, p, grid)
        res.times["projection"] = clock() - t
        v2.clear_cache()
    except KernelLSQError as exc:
        res.failure = f"{type(exc).__name__}: {exc}"
        log.warning("level n=%d failed: %s", n, res.failure)
    res.times["total"] = clock() - t0
    return res


@dataclass
class RunResult:
    status: int
    output_dir: Path
    levels: list
    manifest: dict


def run(config) -> RunResult:
    """Execute the sweep and write reports; status 3 when every level failed."""
    if isinstance(config, (str, Path)):
        config = load_config(config)
    elif isinstance(config, dict):
        config = parse_config(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    common_rule = None
    if config.quadrature["common"] and config.generator["type"] == "fibonacci":
        try:
            common_rule = _rule(config, generate_fibonacci(config.levels[-1]).h)
        except KernelLSQError:
            common_rule = None

    results = []
    for n in config.levels:
        log.info("level n=%d", n)
        results.append(run_level(config, n, common_rule))
    good = [r for r in results if r.failure is None]

    stab_rows, gram_rows, proj_rows, op_rows = [], [], [], []
    for r in good:
        stab_rows.extend(r.stability.csv_rows(r.point_set))
        if r.certificate is not None:
            gram_rows.append(r.certificate.csv_row(r.n))
        else:
            gram_rows.append({"n": r.n, "verdict": False})
        op_rows.append({"n": r.n, "Vinf": r.norms.V_inf, "Vstarinf": r.norms.Vstar_inf,
                        "Ginv": r.norms.Ginv_inf, "product": r.norms.product, "direct": r.direct})

    convergence = {}
    names = list(dict.fromkeys(name for r in good for name, _ in r.errors))
    for name in names:
        for p in config.p_values:
            levels = [r.n for r in good]
            hs = [r.point_set.h for r in good]
            errs = [r.errors[(name, p)] for r in good]
            summary = summarize_convergence(name, levels, hs, {p: errs})
            convergence[f"{name}/p={_p_label(p)}"] = {
                "levels": levels, "h": hs, "errors": errs,
                "fitted_order": summary.orders[p], "consecutive_orders": summary.consecutive[p],
                "saturated": summary.saturated[p],
            }
            orders = [math.nan] + summary.consecutive[p]
            for r, e, o in zip(good, errs, orders):
                proj_rows.append({"n": r.n, "h": r.point_set.h, "p": _p_label(p), "function": name,
                                  "error": e, "fitted_order": o})

    csvs = {}
    for name, rows in (("stability", stab_rows), ("gram", gram_rows),
                       ("projector", proj_rows), ("opnorm", op_rows)):
        path = out / f"{name}.csv"
        csvs[name] = {"path": path.name, "sha256": _write_csv(path, REPORTS[name], rows),
                      "rows": len(rows)}

    status = 0 if good else 3
    manifest = {
        "config": config.as_json(),
        "config_sha256": config.digest(),
        "versions": {"kernel_lsq": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "backend": _backend.current()},
        "status": status,
        "csv": csvs,
        "levels": {
            str(r.n): {
                "ok": r.failure is None,
                "failure": r.failure,
                "point_set": r.point_set.stats_dict() if r.point_set is not None else None,
                "wall_time_s": r.times,
                "stability": r.stability.to_json() if r.stability is not None else None,
                "certificate": r.certificate.to_json() if r.certificate is not None else None,
                "certificate_error": r.certificate_error,
                "interpolation_errors": {f"{k[0]}/p={_p_label(k[1])}": v
                                         for k, v in r.interpolation_errors.items()},
            }
            for r in results
        },
        "convergence": convergence,
        "wall_time_s": time.perf_counter() - started,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    return RunResult(status, out, results, manifest)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def plotdata(report_dir, output=None) -> Path:
    """Melt the report CSVs into ``experiment,level,metric,value`` rows.

    Every measurement cell of every input row becomes one output row; label
    columns (p, function) are folded into the metric name.
    """
    report_dir = Path(report_dir)
    found = [report_dir / f"{name}.csv" for name in REPORTS if (report_dir / f"{name}.csv").exists()]
    if not found:
        raise FileNotFoundError(f"no report CSVs in {report_dir}")
    rows = []
    for path in found:
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                labels = [f"{k}={rec[k]}" for k in ("function", "p") if rec.get(k)]
                suffix = f"[{','.join(labels)}]" if labels else ""
                for key, value in rec.items():
                    if key in LABEL_COLUMNS or value == "":
                        continue
                    rows.append({"experiment": path.stem, "level": rec["n"],
                                 "metric": key + suffix, "value": value})
    output = Path(output) if output is not None else report_dir / "plotdata.csv"
    with open(output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, ["experiment", "level", "metric", "value"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return output
