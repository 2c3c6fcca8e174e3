"""Command line runner: ``pullgeom <experiment> [options]`` or ``pullgeom list``.

``run`` and ``verify`` are accepted as no-op prefixes, so
``pullgeom verify sp2-biinvariant --seed 7`` works too.  Reports are JSON
(schema 1) and/or CSV written atomically into ``--out`` (default:
``$PULLGEOM_OUT`` or the working directory).
"""
from __future__ import annotations

import argparse
import csv
import inspect
import io
import json
import math
import os
import re
import sys
import tempfile
import time
from pathlib import Path

from . import __version__

SCHEMA = 1
OUT_ENV = "PULLGEOM_OUT"
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
# flag name -> experiment keyword
FLAG_KEYS = {
    "k": "param", "n": "param", "m": "param",
    "theta_start": "theta_start", "theta_end": "theta_end", "steps": "steps",
    "which": "which", "target": "target", "samples": "samples", "deltas": "deltas",
    "pass_tol": "pass_tol", "fail_floor": "fail_floor", "map": "map",
}


class ConfigError(ValueError):
    pass


def _cap_threads(argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--threads", type=int)
    ns, _ = pre.parse_known_args(argv)
    if ns.threads:
        for var in THREAD_VARS:
            os.environ[var] = str(ns.threads)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser(experiments) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pullgeom", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    lp = sub.add_parser("list", help="show the experiment catalog")
    lp.add_argument("--json", action="store_true", help="machine-readable catalog")
    for name, exp in experiments.items():
        p = sub.add_parser(name, help=exp.claim)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        p.add_argument("--format", choices=("json", "csv", "both"), default=None)
        p.add_argument("--threads", type=int, help="cap on BLAS threads")
        p.add_argument("--config", help="JSON file with parameter defaults")
        p.add_argument("--timing", action="store_true", help="record wall-clock in the report")
        if exp.maps:
            p.add_argument("--map", choices=exp.maps)
            for flag in ("k", "n", "m"):
                p.add_argument(f"--{flag}", type=int, help="map parameter")
        if name == "fiber-geodesy":
            p.add_argument("--which", choices=("regular", "meridian"))
            p.add_argument("--target", type=_floats, help="comma-separated target point")
            p.add_argument("--pass-tol", type=float)
            p.add_argument("--fail-floor", type=float)
        if name == "degenerate":
            p.add_argument("--theta-start", type=float)
            p.add_argument("--theta-end", type=float)
            p.add_argument("--steps", type=int)
        if name == "stability-probe":
            p.add_argument("--deltas", type=_floats, help="comma-separated tube radii")
    return parser


def resolve_params(exp, ns) -> dict:
    """Flags > config file > experiment defaults, restricted to the experiment's keywords."""
    sig = inspect.signature(exp.run)
    params = {k: v.default for k, v in sig.parameters.items()}
    params.update(exp.defaults)
    if ns.config:
        try:
            cfg = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {ns.config}: {err}") from err
        unknown = set(cfg) - set(params)
        if unknown:
            raise ConfigError(f"unknown config keys for {exp.name}: {sorted(unknown)}")
        params.update(cfg)
    for flag, key in FLAG_KEYS.items():
        val = getattr(ns, flag, None)
        if val is not None and key in params:
            params[key] = val
    if ns.seed is not None:
        params["seed"] = ns.seed
    if "map" in params and exp.maps and params["map"] not in exp.maps:
        raise ConfigError(f"unknown map {params['map']!r}; choose from {list(exp.maps)}")
    if params.get("which") == "meridian" and params.get("map") != "rigas":
        raise ConfigError("--which meridian is only defined for the rigas map")
    return params


def _plain(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    return str(obj)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v):
    if v is None:
        return ""
    if hasattr(v, "item"):
        v = v.item()
    return repr(v) if isinstance(v, float) else v


def _csv_text(rows) -> str:
    buf = io.StringIO()
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _flatten(d: dict, prefix: str = "") -> list[dict]:
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_flatten(v, key + "."))
        else:
            rows.append({"key": key, "value": json.dumps(v, sort_keys=True)})
    return rows


def _thresholds(params: dict) -> dict:
    return {k: v for k, v in params.items()
            if k == "tol" or k.endswith("_tol") or k == "fail_floor"}


def _stem(name: str, params: dict, map_label) -> str:
    parts = [name]
    if map_label:
        parts.append(re.sub(r"[^A-Za-z0-9]+", "", map_label))
    if params.get("which") == "meridian" and "meridian" not in parts[-1]:
        parts.append("meridian")
    parts.append(f"seed{params.get('seed', 0)}")
    return "-".join(parts)


def run(exp, params: dict, out_dir: Path, fmt: str = "json", timing: bool = False):
    """Run one experiment and write its report; returns ``(report, paths, ok)``."""
    from .errors import GeometryError

    t0 = time.perf_counter()
    error = None
    try:
        outcome = exp.run(**params)
    except (GeometryError, ValueError, ArithmeticError, KeyError) as err:
        outcome = None
        error = {"type": type(err).__name__, "message": str(err)}
    map_label = (outcome.params.get("map") if outcome else None) or params.get("map")
    report = {
        "schema": SCHEMA,
        "experiment": exp.name,
        "claim": exp.claim,
        "anchor": exp.anchor,
        "map": map_label,
        "params": params,
        "samples": outcome.samples if outcome else 0,
        "measures": outcome.measures if outcome else {},
        "verdict": outcome.verdict if outcome else "error",
        "thresholds": _thresholds(params),
        "seed": params.get("seed", 0),
        "version": __version__,
    }
    if error:
        report["error"] = error
    if timing:
        report["wall_clock_s"] = time.perf_counter() - t0
    report = _plain(report)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = _stem(exp.name, params, map_label)
    paths = []
    if fmt in ("json", "both") or error:
        p = out_dir / f"{stem}.json"
        _atomic_write(p, json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n")
        paths.append(p)
    if fmt in ("csv", "both") and outcome:
        tables = outcome.tables or {"measures": _flatten(report["measures"])}
        for tname, rows in tables.items():
            p = out_dir / f"{stem}.{tname}.csv"
            _atomic_write(p, _csv_text(rows))
            paths.append(p)
    return report, paths, error is None


def list_experiments(experiments, as_json: bool = False) -> str:
    catalog = [
        {"name": e.name, "claim": e.claim, "anchor": e.anchor,
         "defaults": e.defaults, "maps": list(e.maps)}
        for e in experiments.values()
    ]
    if as_json:
        return json.dumps(catalog, indent=2)
    lines = []
    for c in catalog:
        lines.append(f"{c['name']:<24} {c['claim']}")
        lines.append(f"{'':<24} anchor: {c['anchor']}")
        defaults = ", ".join(f"{k}={v}" for k, v in c["defaults"].items())
        lines.append(f"{'':<24} defaults: {defaults}")
    return "\n".join(lines)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in ("run", "verify"):
        argv = argv[1:]
    _cap_threads(argv)
    from .experiments import EXPERIMENTS

    parser = build_parser(EXPERIMENTS)
    ns = parser.parse_args(argv)
    if ns.command == "list":
        print(list_experiments(EXPERIMENTS, ns.json))
        return 0
    exp = EXPERIMENTS[ns.command]
    try:
        params = resolve_params(exp, ns)
    except ConfigError as err:
        parser.error(str(err))
    fmt = ns.format or ("both" if ns.command == "degenerate" else "json")
    out_dir = Path(ns.out or os.environ.get(OUT_ENV) or ".")
    try:
        report, paths, ok = run(exp, params, out_dir, fmt, ns.timing)
    except OSError as err:
        print(f"pullgeom: cannot write report: {err}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    print(f"{exp.name}: verdict={report['verdict']}")
    if not ok:
        print(f"pullgeom: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
