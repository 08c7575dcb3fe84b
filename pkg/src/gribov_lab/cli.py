"""Batch front-end: JSON run configuration in, CSV or JSON report out.

Exit status: 0 when every row verified, 2 when some row is flagged invalid
(the report is still written), 1 on configuration or computational failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import diagnostics, semigroup, trace_formula
from .errors import GribovLabError, ParameterError
from .fock_ops import GribovParams, Truncation, build_hamiltonian
from .linalg import eigen

log = logging.getLogger("gribov_lab")

SCHEMA_VERSION = 1
COMMANDS = ("spectrum", "trace-formula", "semigroup", "trotter", "diagnostics")
FORMATS = ("csv", "json")
TOP_KEYS = {"command", "params", "trunc", "grids", "output_path", "format", "seed"}
PARAM_KEYS = {"lambda_cubic", "lambda_quartic", "mu", "lambda_triple"}
TRUNC_KEYS = {"dim", "offset"}
MAX_GRID = 1000
MAX_DIM = diagnostics.DENSE_CAP

COLUMNS = {
    "spectrum": ["k", "re", "im", "abs", "residual", "unperturbed", "valid"],
    "trace-formula": [
        "n", "r_n", "nodes", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "gap",
        "j1_re", "j2_re", "j3_re", "j4_re", "j_imag_max", "inside_count", "imag_flag", "valid",
    ],
    "semigroup/asymptotics": [
        "t", "full_gap", "i1_trace_norm", "i1_trace", "first_order",
        "i2_trace_norm", "i2_bound", "weight", "delta", "valid",
    ],
    "semigroup/dyson": ["k", "t", "distance", "valid"],
    "semigroup/schatten": ["t", "p", "norm", "which", "valid"],
    "trotter": ["n", "deviation", "log_n_over_n", "c_n", "fit_constant", "fit_residual", "valid"],
    "diagnostics/relative-bound": ["epsilon", "dim", "constant", "stabilized", "violations", "valid"],
    "diagnostics/form-bound": ["epsilon", "dim", "constant", "stabilized", "violations", "valid"],
    "diagnostics/accretivity": ["offset", "dim", "floor", "mu", "valid"],
    "diagnostics/subordination": ["delta", "dim", "norm", "trend", "valid"],
    "diagnostics/carleman": ["kind", "lo", "hi", "exponent", "r2", "violated_orders", "valid"],
    "diagnostics/small-t": ["t", "dim", "scaled_generator_norm", "scaled_trace_norm", "trace_norm", "valid"],
}

GRID_DEFAULTS = {
    "spectrum": {"regularizer": "cubic"},
    "trace-formula": {"n_range": list(range(4, 13)), "nodes": 512, "jmax": 4},
    "semigroup": {
        "mode": "asymptotics", "t_grid": [1e-3, 1e-2, 1e-1], "delta": 0.5,
        "dyson_K": 8, "dyson_t": 0.05, "p_list": [0.25, 1.0, 2.0], "which": "G-semigroup",
    },
    "trotter": {"t": 1.0, "n_list": [2, 4, 8, 16, 32, 64, 128, 256], "regularizer": "quartic"},
    "diagnostics": {
        "check": "accretivity", "epsilon": [0.1, 1.0], "dims": [16, 32, 64], "delta": [0.5],
        "kinds": ["G-resolvent", "H-resolvent", "G-semigroup"], "fit_window": [20, 200],
        "t": 0.1, "t_grid": [1e-3, 1e-4, 1e-5, 1e-6], "n_samples": 10000, "n_starts": 32,
    },
}


class ConfigError(ParameterError):
    def __init__(self, problems):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = list(problems)


def _real_list(value, name, problems, positive=True):
    if not isinstance(value, list) or not value:
        problems.append(f"{name}: must be a non-empty list")
        return
    if len(value) > MAX_GRID:
        problems.append(f"{name}: at most {MAX_GRID} entries")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            problems.append(f"{name}[{i}]: must be a finite number, got {v!r}")
        elif positive and not v > 0:
            problems.append(f"{name}[{i}]: must be > 0, got {v!r}")


def _int_list(value, name, problems, minimum, maximum=None):
    if not isinstance(value, list) or not value:
        problems.append(f"{name}: must be a non-empty list")
        return
    if len(value) > MAX_GRID:
        problems.append(f"{name}: at most {MAX_GRID} entries")
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, int):
            problems.append(f"{name}[{i}]: must be an integer, got {v!r}")
        elif v < minimum or (maximum is not None and v > maximum):
            problems.append(f"{name}[{i}]: must lie in [{minimum}, {maximum}], got {v}")


def _choice(value, name, options, problems):
    if value not in options:
        problems.append(f"{name}: must be one of {list(options)}, got {value!r}")


def _positive(value, name, problems, integer=False):
    ok_type = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok_type or not value > 0 or not math.isfinite(value):
        problems.append(f"{name}: must be a positive {'integer' if integer else 'number'}, got {value!r}")


def _validate_grids(command, grids, problems):
    g = grids
    if command == "spectrum":
        _choice(g["regularizer"], "grids.regularizer", ("cubic", "quartic", "none"), problems)
    elif command == "trace-formula":
        _int_list(g["n_range"], "grids.n_range", problems, 2, 100)
        _positive(g["nodes"], "grids.nodes", problems, integer=True)
        if isinstance(g["nodes"], int) and not trace_formula.MIN_NODES <= g["nodes"] <= 65536:
            problems.append(f"grids.nodes: must lie in [{trace_formula.MIN_NODES}, 65536], got {g['nodes']}")
        if g["jmax"] not in (4, 5, 6):
            problems.append(f"grids.jmax: must be 4, 5 or 6, got {g['jmax']!r}")
    elif command == "semigroup":
        _choice(g["mode"], "grids.mode", ("asymptotics", "dyson", "schatten"), problems)
        _real_list(g["t_grid"], "grids.t_grid", problems)
        _real_list(g["p_list"], "grids.p_list", problems)
        _positive(g["delta"], "grids.delta", problems)
        if isinstance(g["delta"], (int, float)) and g["delta"] < 0.5:
            problems.append(f"grids.delta: must be >= 0.5, got {g['delta']}")
        _positive(g["dyson_t"], "grids.dyson_t", problems)
        if not isinstance(g["dyson_K"], int) or not 1 <= g["dyson_K"] <= semigroup.DYSON_CAP:
            problems.append(f"grids.dyson_K: must be an integer in [1, {semigroup.DYSON_CAP}], got {g['dyson_K']!r}")
        _choice(g["which"], "grids.which", ("G-semigroup", "H-semigroup"), problems)
    elif command == "trotter":
        _positive(g["t"], "grids.t", problems)
        _int_list(g["n_list"], "grids.n_list", problems, 2, 1 << 16)
        _choice(g["regularizer"], "grids.regularizer", ("quartic", "cubic"), problems)
    elif command == "diagnostics":
        checks = ("relative-bound", "form-bound", "accretivity", "subordination", "carleman", "small-t")
        _choice(g["check"], "grids.check", checks, problems)
        _real_list(g["epsilon"], "grids.epsilon", problems)
        _int_list(g["dims"], "grids.dims", problems, 4, MAX_DIM)
        _real_list(g["delta"], "grids.delta", problems)
        _real_list(g["t_grid"], "grids.t_grid", problems)
        _positive(g["t"], "grids.t", problems)
        _positive(g["n_samples"], "grids.n_samples", problems, integer=True)
        if not isinstance(g["n_starts"], int) or isinstance(g["n_starts"], bool) or g["n_starts"] < 0:
            problems.append(f"grids.n_starts: must be a non-negative integer, got {g['n_starts']!r}")
        kinds = g["kinds"]
        if not isinstance(kinds, list) or not kinds:
            problems.append("grids.kinds: must be a non-empty list")
        else:
            for i, k in enumerate(kinds):
                _choice(k, f"grids.kinds[{i}]", ("G-resolvent", "H-resolvent", "G-semigroup", "H-semigroup"), problems)
        fw = g["fit_window"]
        if not (isinstance(fw, list) and len(fw) == 2 and all(isinstance(v, int) for v in fw)):
            problems.append(f"grids.fit_window: must be two integers, got {fw!r}")


def parse_config(raw, overrides=None):
    """Validate a config mapping; returns a normalized dict or raises ConfigError."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be an object"])
    raw = dict(raw)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in sorted(set(raw) - TOP_KEYS):
        problems.append(f"{key}: unknown key")
    command = raw.get("command")
    if command not in COMMANDS:
        problems.append(f"command: must be one of {list(COMMANDS)}, got {command!r}")

    params_raw = raw.get("params", {})
    params = None
    if not isinstance(params_raw, dict):
        problems.append("params: must be an object")
    else:
        for key in sorted(set(params_raw) - PARAM_KEYS):
            problems.append(f"params.{key}: unknown key")
        for key in sorted(PARAM_KEYS & set(params_raw)):
            v = params_raw[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                problems.append(f"params.{key}: must be a finite number, got {v!r}")
        if not problems:
            params = GribovParams(**params_raw)

    trunc_raw = raw.get("trunc", {"dim": 64, "offset": 0})
    trunc = None
    if not isinstance(trunc_raw, dict):
        problems.append("trunc: must be an object")
    else:
        for key in sorted(set(trunc_raw) - TRUNC_KEYS):
            problems.append(f"trunc.{key}: unknown key")
        dim = trunc_raw.get("dim", 64)
        offset = trunc_raw.get("offset", 0)
        if isinstance(dim, bool) or not isinstance(dim, int) or not 1 <= dim <= MAX_DIM:
            problems.append(f"trunc.dim: must be an integer in [1, {MAX_DIM}], got {dim!r}")
        if offset not in (0, 1) or isinstance(offset, bool):
            problems.append(f"trunc.offset: must be 0 or 1, got {offset!r}")
        if not any(p.startswith("trunc.") for p in problems):
            trunc = Truncation(dim, offset)

    grids = {}
    if command in COMMANDS:
        grids_raw = raw.get("grids", {})
        if not isinstance(grids_raw, dict):
            problems.append("grids: must be an object")
            grids_raw = {}
        defaults = GRID_DEFAULTS[command]
        for key in sorted(set(grids_raw) - set(defaults)):
            problems.append(f"grids.{key}: unknown key for command {command!r}")
        grids = {**defaults, **{k: v for k, v in grids_raw.items() if k in defaults}}
        _validate_grids(command, grids, problems)

    fmt = raw.get("format", "csv")
    _choice(fmt, "format", FORMATS, problems)
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed: must be a non-negative integer, got {seed!r}")
    out = raw.get("output_path")
    if not isinstance(out, str) or not out:
        problems.append("output_path: must be a non-empty string (or pass --out)")

    if problems:
        raise ConfigError(problems)
    return {
        "command": command, "params": params, "trunc": trunc, "grids": grids,
        "output_path": out, "format": fmt, "seed": seed,
    }


def _fan_out(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _run_spectrum(cfg, threads):
    trunc, params = cfg["trunc"], cfg["params"]
    m = build_hamiltonian(trunc, params, cfg["grids"]["regularizer"])
    data = eigen(m, "general")
    n = trunc.indices
    if cfg["grids"]["regularizer"] == "cubic":
        base = params.lambda_cubic * n * (n - 1) * (n - 2)
    elif cfg["grids"]["regularizer"] == "quartic":
        base = params.lambda_quartic * n * (n - 1)
    else:
        base = np.zeros_like(n)
    base = np.sort(base)
    rows = []
    for k, (v, r) in enumerate(zip(data.eigenvalues, data.residuals)):
        rows.append({
            "k": k, "re": v.real, "im": v.imag, "abs": abs(v), "residual": float(r),
            "unperturbed": float(base[k]), "valid": bool(r <= data.tolerance),
        })
    return "spectrum", rows, {"tolerance": data.tolerance}


def _run_trace_formula(cfg, threads):
    g = cfg["grids"]
    result = trace_formula.formula_convergence_report(
        g["n_range"], cfg["trunc"], cfg["params"], nodes=g["nodes"], jmax=g["jmax"]
    )
    rows = []
    for r in result:
        pj = r.per_j + [0j] * (4 - len(r.per_j))
        rows.append({
            "n": r.index, "r_n": r.radius, "nodes": r.nodes,
            "lhs_re": r.lhs.real, "lhs_im": r.lhs.imag, "rhs_re": r.rhs.real, "rhs_im": r.rhs.imag,
            "gap": r.gap, "j1_re": pj[0].real, "j2_re": pj[1].real, "j3_re": pj[2].real,
            "j4_re": pj[3].real, "j_imag_max": max(abs(v.imag) for v in r.per_j),
            "inside_count": r.inside_count, "imag_flag": r.imag_flag, "valid": r.valid,
        })
    meta = {"jmax": g["jmax"], "note": "rhs includes every correction up to jmax; j columns list j<=4"}
    return "trace-formula", rows, meta


def _run_semigroup(cfg, threads):
    g, trunc, params = cfg["grids"], cfg["trunc"], cfg["params"]
    mode = g["mode"]
    if mode == "asymptotics":
        t_grid = sorted(g["t_grid"])

        def one(t):
            return semigroup.trace_asymptotics_report([t], trunc, params, g["delta"])[0]

        rows = []
        for r in _fan_out(one, t_grid, threads):
            ok = abs(r.full_gap - r.i1_trace_norm) <= r.i2_trace_norm + 1e-10 and r.i2_trace_norm <= r.i2_bound
            rows.append({
                "t": r.t, "full_gap": r.full_gap, "i1_trace_norm": r.i1_trace_norm, "i1_trace": r.i1_trace,
                "first_order": r.first_order, "i2_trace_norm": r.i2_trace_norm, "i2_bound": r.i2_bound,
                "weight": r.weight, "delta": r.delta, "valid": bool(ok),
            })
        meta = {"power_shift": "G+I", "i2_slope": semigroup.loglog_slope(
            [r["t"] for r in rows], [max(r["i2_trace_norm"], 1e-300) for r in rows]) if len(rows) > 1 else None}
        return "semigroup/asymptotics", rows, meta
    if mode == "dyson":
        dist = semigroup.dyson_sum_report(g["dyson_K"], g["dyson_t"], trunc, params)
        rows = []
        for i, (k, d) in enumerate(dist):
            ok = i == 0 or d <= dist[i - 1][1] + 1e-12
            rows.append({"k": k, "t": g["dyson_t"], "distance": d, "valid": bool(ok)})
        return "semigroup/dyson", rows, {}

    def one_t(t):
        return t, semigroup.schatten_profile([t], g["p_list"], trunc, params, g["which"])

    rows = []
    for t, table in _fan_out(one_t, g["t_grid"], threads):
        for p in g["p_list"]:
            v = table[(t, p)]
            rows.append({"t": t, "p": p, "norm": v, "which": g["which"], "valid": bool(math.isfinite(v))})
    return "semigroup/schatten", rows, {}


def _run_trotter(cfg, threads):
    g = cfg["grids"]
    rep = semigroup.trotter_report(g["t"], sorted(g["n_list"]), cfg["trunc"], cfg["params"], g["regularizer"])
    rows = []
    prev = None
    for (n, dev), c in zip(rep.rows, rep.constants_by_n):
        ok = prev is None or dev <= prev
        prev = dev
        rows.append({
            "n": n, "deviation": dev, "log_n_over_n": math.log(n) / n, "c_n": c,
            "fit_constant": rep.constant, "fit_residual": rep.residual, "valid": bool(ok),
        })
    return "trotter", rows, {"top_octave_spread": rep.top_octave_spread()}


def _run_diagnostics(cfg, threads):
    g, trunc, params, seed = cfg["grids"], cfg["trunc"], cfg["params"], cfg["seed"]
    check = g["check"]
    rows = []
    if check in ("relative-bound", "form-bound"):
        fn = diagnostics.relative_bound if check == "relative-bound" else diagnostics.form_bound
        for eps in g["epsilon"]:
            rep = fn(eps, g["dims"], params, n_starts=g["n_starts"], seed=seed)
            viol = diagnostics.bound_violations(rep, params, n_samples=g["n_samples"], seed=seed + 1)
            for d, c in zip(rep.trunc_dims, rep.constants_by_dim):
                rows.append({
                    "epsilon": eps, "dim": d, "constant": c, "stabilized": rep.stabilized,
                    "violations": viol, "valid": bool(rep.stabilized and viol == 0),
                })
    elif check == "accretivity":
        floor = diagnostics.accretivity_floor(trunc, params)
        expected = params.mu if trunc.offset == 1 else 0.0
        rows.append({
            "offset": trunc.offset, "dim": trunc.dim, "floor": floor, "mu": params.mu,
            "valid": bool(abs(floor - expected) <= 1e-10),
        })
    elif check == "subordination":
        for delta in g["delta"]:
            rep = diagnostics.subordination_norm(delta, g["dims"], params)
            for d, v in rep.rows:
                rows.append({"delta": delta, "dim": d, "norm": v, "trend": rep.trend, "valid": True})
    elif check == "carleman":
        lo, hi = g["fit_window"]
        for kind in g["kinds"]:
            fit = diagnostics.carleman_exponent_fit(kind, trunc, params, (lo, hi), g["t"])
            ok = (-3.1 <= fit.exponent <= -2.9) if fit.exponent is not None else not fit.violated_orders
            rows.append({
                "kind": kind, "lo": lo, "hi": hi,
                "exponent": fit.exponent if fit.exponent is not None else float("nan"),
                "r2": fit.r2 if fit.r2 is not None else float("nan"),
                "violated_orders": " ".join(str(p) for p in fit.violated_orders), "valid": bool(ok),
            })
    else:
        for r in diagnostics.small_t_limits(sorted(g["t_grid"], reverse=True), params):
            rows.append({
                "t": r.t, "dim": r.dim, "scaled_generator_norm": r.scaled_generator_norm,
                "scaled_trace_norm": r.scaled_trace_norm, "trace_norm": r.trace_norm, "valid": True,
            })
    return f"diagnostics/{check}", rows, {"seed": seed}


RUNNERS = {
    "spectrum": _run_spectrum,
    "trace-formula": _run_trace_formula,
    "semigroup": _run_semigroup,
    "trotter": _run_trotter,
    "diagnostics": _run_diagnostics,
}


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render(report, fmt):
    """Serialize a report dict to text in the requested format."""
    columns = COLUMNS[report["schema"]]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in report["rows"]:
            writer.writerow([_fmt(row[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "schema": report["schema"], "schema_version": SCHEMA_VERSION, "columns": columns,
            "params": report["params"], "trunc": report["trunc"], "seed": report["seed"],
            "meta": report["meta"], "rows": [{c: row[c] for c in columns} for row in report["rows"]],
        }
        return json.dumps(_jsonable(doc), indent=1, sort_keys=False) + "\n"
    raise ParameterError(f"format must be one of {FORMATS}, got {fmt!r}")


def emit(report, fmt, path):
    """Write the rendered report; IO errors propagate unchanged."""
    text = render(report, fmt)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def load_report(path):
    """Read a JSON report back into the in-memory report structure."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return {
        "schema": doc["schema"], "params": doc["params"], "trunc": doc["trunc"],
        "seed": doc["seed"], "meta": doc["meta"], "rows": doc["rows"],
    }


def compute(cfg, threads=1):
    schema, rows, meta = RUNNERS[cfg["command"]](cfg, threads)
    return {
        "schema": schema, "rows": rows, "meta": meta, "seed": cfg["seed"],
        "params": cfg["params"].as_dict(),
        "trunc": {"dim": cfg["trunc"].dim, "offset": cfg["trunc"].offset},
    }


def run(cfg, threads=1):
    """Compute and write the report; returns the exit status."""
    np.random.seed(cfg["seed"])
    report = compute(cfg, threads)
    emit(report, cfg["format"], cfg["output_path"])
    invalid = [r for r in report["rows"] if not r["valid"]]
    if invalid:
        log.warning("%d of %d rows flagged invalid", len(invalid), len(report["rows"]))
        return 2
    return 0


def _env_overrides(environ):
    out = {}
    if environ.get("GRIBOV_OUT"):
        out["output_path"] = environ["GRIBOV_OUT"]
    if environ.get("GRIBOV_FORMAT"):
        out["format"] = environ["GRIBOV_FORMAT"]
    if environ.get("GRIBOV_SEED"):
        try:
            out["seed"] = int(environ["GRIBOV_SEED"])
        except ValueError:
            out["seed"] = environ["GRIBOV_SEED"]
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="gribov-lab", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="report path (overrides output_path)")
    p.add_argument("--format", choices=FORMATS, help="report format (overrides config)")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for grid fan-out")
    return p


def main(argv=None, environ=None):
    environ = os.environ if environ is None else environ
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    threads = args.threads
    if threads is None:
        try:
            threads = int(environ.get("GRIBOV_THREADS", "1") or 1)
        except ValueError:
            print(f"error: GRIBOV_THREADS must be an integer, got {environ['GRIBOV_THREADS']!r}", file=sys.stderr)
            return 1
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return 1
    overrides = _env_overrides(environ)
    flags = {"output_path": args.out, "format": args.format, "seed": args.seed}
    overrides.update({k: v for k, v in flags.items() if v is not None})
    try:
        cfg = parse_config(raw, overrides)
        return run(cfg, threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GribovLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
