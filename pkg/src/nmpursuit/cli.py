"""Command-line front end.

Three subcommands share one file format family:

``generate``
    Writes a synthetic example as ``<prefix>.csv`` (columns ``t,value``) and
    its exact decomposition as ``<prefix>.truth.json``.
``decompose``
    Reads a CSV, runs the pursuit and writes the components as JSON.
``evaluate``
    Compares a decomposition JSON with a truth JSON.

Missing rows in an otherwise uniform CSV are read as gaps. Irregular time
stamps are read as scattered samples. Exit codes: 0 success, 1 internal
error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import platform
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .core import FilterSpec, IMFComponent, PhaseFunction, SampledSignal, Signal, snr_db
from .errors import NMPError
from .fft_engine import FftEngineConfig
from .l1_engine import L1EngineConfig
from .pursuit import Decomposition, PursuitConfig, decompose, evaluate_against_truth
from .synth import EXAMPLES, ExampleSpec, generate

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flags or unreadable input; maps to exit code 2."""


# ---------------------------------------------------------------- file formats


def _floats(values) -> list:
    # json writes floats with repr, which round-trips IEEE-754 doubles
    return [float(v) for v in np.asarray(values, dtype=float)]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(command: str, config: dict, input_paths: Sequence[Path], started: float,
              **extra) -> dict:
    out = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in input_paths},
        "versions": {
            "nmpursuit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "duration_s": time.perf_counter() - started,
    }
    out.update(extra)
    return out


def _write_json(path: Path, payload: dict) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, allow_nan=False), encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


def write_csv(path: Path, times, values) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(times, values):
                w.writerow([repr(float(t)), repr(float(v))])
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path: Path):
    """Return ``(times, values)`` from a ``t,value`` CSV, sorted by time."""
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows or [c.strip().lower() for c in rows[0]] != ["t", "value"]:
        raise UsageError(f"{path}: expected header 't,value'")
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise UsageError(f"{path}:{lineno}: expected two columns")
        try:
            times.append(float(row[0]))
            values.append(float(row[1]))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from exc
    t, v = np.array(times), np.array(values)
    if t.size < 8:
        raise UsageError(f"{path}: need at least 8 rows, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise UsageError(f"{path}: non-finite entries")
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    if np.any(np.diff(t) <= 0):
        raise UsageError(f"{path}: duplicate time stamps")
    return t, v


def classify_samples(times, values, periodic: bool = False, domain=None, grid_n: int = 1024):
    """Turn CSV columns into a signal plus the output grid.

    Returns ``(signal, grid, kind)`` with ``kind`` one of ``"uniform"``,
    ``"gapped"`` or ``"scattered"``. A record is gapped when every spacing is
    a whole multiple of the smallest one and some multiple exceeds one.
    """
    d = np.diff(times)
    h = float(d.min())
    steps = d / h
    on_lattice = np.allclose(steps, np.round(steps), rtol=0, atol=1e-6)
    if on_lattice and np.all(np.round(steps) == 1):
        t0 = float(times[0]) if domain is None else float(domain[0])
        if periodic:
            t1 = float(times[-1] + h) if domain is None else float(domain[1])
        else:
            t1 = float(times[-1]) if domain is None else float(domain[1])
        sig = Signal(values, t0, t1, periodic)
        if not np.allclose(sig.times, times, rtol=0, atol=1e-9 * max(1.0, abs(t1))):
            raise UsageError("time stamps do not match the requested domain")
        return sig, sig.times, "uniform"
    if periodic:
        raise UsageError("--periodic needs a complete uniform record")
    t0, t1 = (float(times[0]), float(times[-1])) if domain is None else map(float, domain)
    if on_lattice:
        big = np.flatnonzero(np.round(steps) > 1)
        gaps = tuple((float(times[i]), float(times[i + 1])) for i in big)
        n = int(round((times[-1] - times[0]) / h)) + 1
        grid = times[0] + h * np.arange(n)
        return SampledSignal(times, values, t0, t1, gaps), grid, "gapped"
    grid = np.linspace(t0, t1, grid_n)
    return SampledSignal(times, values, t0, t1), grid, "scattered"


def component_to_json(comp: IMFComponent) -> dict:
    return {
        "envelope": _floats(comp.envelope),
        "theta": _floats(comp.theta),
        "omega": _floats(comp.omega),
        "reconstruction": _floats(comp.reconstruction),
    }


def component_from_json(obj: dict, grid) -> IMFComponent:
    try:
        env = np.asarray(obj["envelope"], dtype=float)
        theta = np.asarray(obj["theta"], dtype=float)
        omega = np.asarray(obj["omega"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"component entry malformed: {exc}") from exc
    if not env.shape == theta.shape == omega.shape == grid.shape:
        raise UsageError("component arrays do not match the grid length")
    return IMFComponent(env, PhaseFunction(grid, theta, omega))


def decomposition_to_json(dec: Decomposition) -> dict:
    out = {
        "t": _floats(dec.grid),
        "imfs": [component_to_json(c) for c in dec.components],
        "residual": _floats(dec.residual),
        "diagnostics": [_jsonable(d) for d in dec.diagnostics],
    }
    if dec.trend is not None:
        out["trend"] = _floats(dec.trend)
    if dec.separation is not None:
        out["separation"] = {"epsilon": list(dec.separation.epsilon), "d": dec.separation.d}
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _grid_from(doc: dict, path: Path) -> np.ndarray:
    if "t" not in doc:
        raise UsageError(f"{path}: missing grid 't'")
    grid = np.asarray(doc["t"], dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise UsageError(f"{path}: grid 't' must be a list of numbers")
    return grid


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    started = time.perf_counter()
    spec = ExampleSpec(args.example, N=args.n, noise_amp=args.noise, seed=args.seed,
                       n_samples=args.samples, variant=args.variant)
    bundle = generate(spec)
    prefix = Path(args.output)
    csv_path = prefix.with_name(prefix.name + ".csv")
    truth_path = prefix.with_name(prefix.name + ".truth.json")
    sig = bundle.signal
    write_csv(csv_path, sig.times, sig.values)
    extra = {}
    if args.noise > 0:
        extra["snr_db"] = snr_db(bundle.clean, args.noise)
    truth = {
        "example": args.example,
        "periodic": bool(bundle.clean.periodic),
        "domain": [bundle.clean.t0, bundle.clean.t1],
        "t": _floats(bundle.grid),
        "imfs": [component_to_json(c) for c in bundle.components],
        "clean": _floats(bundle.clean.values),
        "manifest": _manifest("generate", dataclasses.asdict(spec), [], started, **extra),
    }
    if bundle.trend is not None:
        truth["trend"] = _floats(bundle.trend.values)
    if isinstance(sig, SampledSignal) and sig.gaps:
        truth["gaps"] = [list(g) for g in sig.gaps]
    _write_json(truth_path, truth)
    print(f"wrote {csv_path} and {truth_path}")
    return EXIT_OK


_DECOMPOSE_KEYS = ("engine", "gamma", "lambda_v", "max_imfs", "delta", "periodic", "trend",
                   "grid_n", "domain", "filter_width")


def _apply_config_file(args) -> None:
    if not args.config:
        return
    doc = _read_json(Path(args.config))
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(doc) - set(_DECOMPOSE_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    # flags given explicitly on the command line win over the file
    for key, value in doc.items():
        if getattr(args, key) is None or (key in ("periodic", "trend") and not getattr(args, key)):
            setattr(args, key, value)


def _pursuit_config(args, kind: str) -> PursuitConfig:
    engine = args.engine or ("fft" if kind == "uniform" else "l1")
    if engine not in ("fft", "l1"):
        raise UsageError(f"unknown engine {engine!r}")
    if engine == "fft" and kind != "uniform":
        raise UsageError(f"input is {kind}; the fft engine needs a complete uniform record, "
                         "use --engine l1")
    fft = FftEngineConfig()
    if args.filter_width is not None:
        fft = FftEngineConfig(filter=FilterSpec(width=args.filter_width))
    l1_kwargs = {}
    if args.gamma is not None:
        l1_kwargs["gamma"] = args.gamma
    if args.lambda_v is not None:
        l1_kwargs["lambda_V"] = args.lambda_v
    return PursuitConfig(
        engine=engine,
        max_imfs=args.max_imfs if args.max_imfs is not None else 10,
        residual_tol=args.delta,
        fft=fft,
        l1=(L1EngineConfig.compressive(fit_median=True, **l1_kwargs) if kind == "scattered"
            else L1EngineConfig(fit_median=True, **l1_kwargs)),
        trend_extraction=bool(args.trend),
    )


def cmd_decompose(args) -> int:
    started = time.perf_counter()
    _apply_config_file(args)
    in_path = Path(args.input)
    times, values = read_csv(in_path)
    signal, grid, kind = classify_samples(times, values, bool(args.periodic), args.domain,
                                          args.grid_n or 1024)
    config = _pursuit_config(args, kind)
    dec = decompose(signal, config, grid=None if kind == "uniform" else grid)
    out = decomposition_to_json(dec)
    out["input_kind"] = kind
    cfg = {"engine": config.engine, "max_imfs": config.max_imfs, "residual_tol": config.residual_tol,
           "trend": config.trend_extraction, "periodic": bool(args.periodic),
           "fft": dataclasses.asdict(config.fft), "l1": dataclasses.asdict(config.l1)}
    out["manifest"] = _manifest("decompose", _jsonable(cfg),
                                [in_path] + ([Path(args.config)] if args.config else []), started)
    out_path = Path(args.output) if args.output else in_path.with_suffix(".decomp.json")
    _write_json(out_path, out)
    flagged = sum(1 for d in dec.diagnostics if not d.get("converged", True))
    print(f"wrote {out_path}: {len(dec.components)} component(s), {flagged} not converged")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    dpath, tpath = Path(args.decomposition), Path(args.truth)
    ddoc, tdoc = _read_json(dpath), _read_json(tpath)
    grid = _grid_from(ddoc, dpath)
    tgrid = _grid_from(tdoc, tpath)
    if grid.shape != tgrid.shape or not np.allclose(grid, tgrid, rtol=0, atol=1e-9):
        raise UsageError("decomposition and truth grids differ")
    for key, doc, path in (("imfs", ddoc, dpath), ("imfs", tdoc, tpath)):
        if not isinstance(doc.get(key), list):
            raise UsageError(f"{path}: missing list '{key}'")
    found = [component_from_json(c, grid) for c in ddoc["imfs"]]
    truth = [component_from_json(c, grid) for c in tdoc["imfs"]]
    residual = np.asarray(ddoc.get("residual", np.zeros(grid.size)), dtype=float)
    dec = Decomposition(found, residual, grid)
    report = evaluate_against_truth(dec, truth, interior_fraction=args.interior)
    out = _jsonable(report.as_dict())
    out["manifest"] = _manifest("evaluate", {"interior": args.interior}, [dpath, tpath], started)
    out_path = Path(args.output) if args.output else dpath.with_suffix(".report.json")
    _write_json(out_path, out)
    print(f"wrote {out_path}: {len(report.matched)} matched, {out['unmatched']} unmatched")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmpursuit",
                                description="Sparse time-frequency decomposition of 1-D signals.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic example and its truth")
    g.add_argument("--example", required=True, choices=EXAMPLES)
    g.add_argument("--n", type=int, default=1024, help="grid size")
    g.add_argument("--noise", type=float, default=0.0, help="noise multiplier")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--samples", type=int, default=64, help="sample count for sparse-random")
    g.add_argument("--variant", type=int, default=1, choices=(1, 2), help="ss-pair variant")
    g.add_argument("-o", "--output", required=True, help="output prefix")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("decompose", help="decompose a t,value CSV")
    d.add_argument("input")
    d.add_argument("--engine", choices=("fft", "l1"), default=None,
                   help="default: fft for complete uniform records, l1 otherwise")
    d.add_argument("--gamma", type=float, default=None, help="l1 weight")
    d.add_argument("--lambda-v", dest="lambda_v", type=float, default=None,
                   help="envelope bandwidth relative to the carrier (l1 engine)")
    d.add_argument("--filter-width", type=float, default=None,
                   help="low-pass width relative to the carrier (fft engine)")
    d.add_argument("--max-imfs", type=int, default=None)
    d.add_argument("--delta", type=float, default=None, help="residual norm target")
    d.add_argument("--periodic", action="store_true", help="treat the record as one period")
    d.add_argument("--trend", action="store_true", help="split a smooth trend off the residual")
    d.add_argument("--grid-n", type=int, default=None, help="output grid for scattered input")
    d.add_argument("--domain", type=float, nargs=2, default=None, metavar=("T0", "T1"))
    d.add_argument("--config", default=None, help="JSON file with any of the flags above")
    d.add_argument("-o", "--output", default=None)
    d.set_defaults(func=cmd_decompose)

    e = sub.add_parser("evaluate", help="score a decomposition against truth")
    e.add_argument("decomposition")
    e.add_argument("truth")
    e.add_argument("--interior", type=float, default=0.8,
                   help="central fraction of the grid used for interior metrics")
    e.add_argument("-o", "--output", default=None)
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, NMPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:  # noqa: BLE001 - last-resort mapping to the documented exit code
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
