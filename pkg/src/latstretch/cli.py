"""Command-line entry point: ``latstretch <subcommand> [options]``.

Exit status is 0 on success, 1 when a precondition, size guard or
brute-force cross-check fails, and 2 on invalid usage or a malformed body.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import _accel
from .asymptotics import (
    VARIANTS,
    fit_error_exponent,
    fmt,
    measure_error_series,
    predict,
    rows_to_csv,
    weyl_cuboid_count,
)
from .counting import brute_force_report, count_report
from .errors import (
    InvalidInputError,
    LatstretchError,
    NumericFailureError,
    OracleTooLargeError,
    PreconditionError,
    TooLargeError,
)
from .fourier import default_delta, sandwich_check
from .geometry import DiagonalStretch, balanced_representative, body_from_spec, load_body
from .optimizer import (
    OBJECTIVES,
    convergence_sweep,
    optimize_d2_exact,
    optimize_general,
    result_to_dict,
    sweep_to_csv,
)

SUBCOMMANDS = ("count", "balance", "predict", "optimize", "sweep", "weyl", "fourier-check")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output

def _encode(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return fmt(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """JSON with every float written at 17 significant digits."""
    return _encode(obj) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    command: str
    body: str | None = None
    r: str | None = None
    A: str | None = None
    objective: str = "maximize_positive"
    variant: str = "positive"
    mode: str | None = None
    seed: int = 0
    budget: int = 20000
    search_interval: str | None = None
    delta: str | None = None
    K: float | None = None
    sides: str | None = None
    lam: str | None = None
    boundary: str = "dirichlet"
    check: bool = False
    plateaus: bool = False
    out: str | None = None
    format: str | None = None
    threads: int | None = None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config key {unknown[0]!r}")
        if "command" not in data:
            raise UsageError("config needs a 'command'")
        if data["command"] not in SUBCOMMANDS:
            raise UsageError(f"unknown command {data['command']!r}")
        return cls(**data)


def parse_grid(text):
    """``"5"`` or ``"start:stop:step"`` (stop inclusive) into a list of floats."""
    text = str(text).strip()
    try:
        if ":" not in text:
            return [float(text)]
        parts = [float(p) for p in text.split(":")]
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as a number or start:stop:step grid") from None
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise UsageError(f"grid must be start:stop:step with step > 0 and stop >= start, got {text!r}")
    start, stop, step = parts
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(n)]


def parse_floats(text, what):
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError:
        raise UsageError(f"{what} must be comma-separated numbers, got {text!r}") from None


def parse_stretch(text, d):
    entries = parse_floats(text, "--A")
    if len(entries) != d:
        raise UsageError(f"--A has {len(entries)} entries but the body has dimension {d}")
    if any(not (math.isfinite(a) and a > 0) for a in entries):
        raise UsageError(f"--A entries must be positive, got {text!r}")
    A = DiagonalStretch(entries)
    if not A.is_unimodular():
        raise UsageError(f"--A entries must multiply to 1 (got product {A.det!r}); rescale them explicitly")
    return A


def resolve_body(text):
    if text is None:
        raise UsageError("--body is required")
    if text.lstrip().startswith("{"):
        try:
            spec = json.loads(text)
        except ValueError as exc:
            raise UsageError(f"inline body is not valid JSON: {exc}") from None
        return body_from_spec(spec)
    path = Path(text)
    if not path.exists():
        raise UsageError(f"body file {text!r} not found")
    return load_body(path)


def _oracle(body, A, r, problems):
    """Brute-force report, or None with the guard values recorded as a problem."""
    try:
        return brute_force_report(body, A, r)
    except OracleTooLargeError as exc:
        problems.append(f"r={fmt(r)}: brute-force guard exceeded: box {exc.box_size} points > limit {exc.limit}")
        return None


def _single_r(cfg):
    if cfg.r is None:
        raise UsageError("--r is required")
    grid = parse_grid(cfg.r)
    if len(grid) != 1:
        raise UsageError("this subcommand takes a single --r value")
    return grid[0]


def _stretch_or_identity(cfg, d):
    return parse_stretch(cfg.A, d) if cfg.A else DiagonalStretch.identity(d)


# ---------------------------------------------------------------------------
# subcommands

def cmd_count(cfg):
    body = resolve_body(cfg.body)
    A = _stretch_or_identity(cfg, body.dimension)
    grid = parse_grid(cfg.r) if cfg.r is not None else _single_r(cfg)
    records = []
    mismatch = []
    for r in grid:
        rep = count_report(body, A, r).as_dict()
        records.append({"r": r, **rep})
        bf = _oracle(body, A, r, mismatch) if cfg.check else None
        if bf is not None:
            expected = {
                "positive": bf["positive"], "nonnegative": bf["nonnegative"], "all": bf["all"],
                "nonzero": bf["nonzero"], "hyperplane_union": bf["hyperplane"],
                "per_hyperplane": list(bf["per_hyperplane"]),
            }
            bad = [k for k, v in expected.items() if rep[k] != v]
            if bad:
                mismatch.append(f"r={fmt(r)}: {', '.join(f'{k} {rep[k]} vs brute force {expected[k]}' for k in bad)}")
    if (cfg.format or "json") == "csv":
        header = ["r", "positive", "nonnegative", "all", "nonzero", "hyperplane_union"]
        text = _csv(header, [[rec[k] for k in header] for rec in records])
    else:
        text = dumps(records[0] if len(records) == 1 else records)
    return text, mismatch


def cmd_balance(cfg):
    body = resolve_body(cfg.body)
    B, balanced = balanced_representative(body)
    record = {
        "B": list(B.entries),
        "det_B": B.det,
        "cross_sections": list(body.cross_sections),
        "balanced_cross_sections": list(balanced.cross_sections),
        "balanced_body": balanced.to_spec(),
    }
    return dumps(record), []


def cmd_predict(cfg):
    body = resolve_body(cfg.body)
    A = _stretch_or_identity(cfg, body.dimension)
    if cfg.variant not in VARIANTS:
        raise UsageError(f"--variant must be one of {VARIANTS}")
    grid = parse_grid(_require(cfg.r, "--r"))
    rows = measure_error_series(body, A, grid, cfg.variant)
    mismatch = []
    if cfg.check:
        for row in rows:
            bf = _oracle(body, A, row.r, mismatch)
            if bf is not None and bf[cfg.variant] != row.exact:
                mismatch.append(f"r={fmt(row.r)}: exact {row.exact} vs brute force {bf[cfg.variant]}")
    fmt_name = cfg.format or ("json" if len(rows) == 1 else "csv")
    if fmt_name == "csv":
        return rows_to_csv(rows), mismatch
    records = []
    for row in rows:
        pred = predict(body, A, row.r, cfg.variant)
        records.append({
            "r": row.r, "variant": cfg.variant, "leading": pred.leading, "second": pred.second,
            "predicted": pred.predicted, "error_shape": pred.error_shape, "exact": row.exact,
            "error": row.abs_error, "normalized_error": row.normalized,
        })
    out = records[0] if len(records) == 1 else {"rows": records, "exponent": _maybe_exponent(rows)}
    return dumps(out), mismatch


def _maybe_exponent(rows):
    try:
        return fit_error_exponent(rows)
    except InvalidInputError:
        return None


def _require(value, flag):
    if value is None:
        raise UsageError(f"{flag} is required")
    return value


def _mode(cfg, d):
    mode = cfg.mode or ("exact" if d == 2 else "heuristic")
    if mode not in ("exact", "heuristic"):
        raise UsageError("--mode must be 'exact' or 'heuristic'")
    if mode == "exact" and d != 2:
        raise UsageError("--mode exact needs a planar body")
    return mode


def _interval(cfg):
    if cfg.search_interval is None:
        return None
    lo_hi = parse_floats(cfg.search_interval, "--search-interval")
    if len(lo_hi) != 2:
        raise UsageError("--search-interval takes two numbers lo,hi")
    return lo_hi


def cmd_optimize(cfg):
    body = resolve_body(cfg.body)
    r = _single_r(cfg)
    if cfg.objective not in OBJECTIVES:
        raise UsageError(f"--objective must be one of {OBJECTIVES}")
    if _mode(cfg, body.dimension) == "exact":
        res = optimize_d2_exact(body, r, cfg.objective, _interval(cfg))
    else:
        res = optimize_general(body, r, cfg.objective, seed=cfg.seed, budget=cfg.budget)
    mismatch = []
    if cfg.check:
        bf = _oracle(body, res.A_opt, r, mismatch)
        key = "positive" if cfg.objective == "maximize_positive" else "nonnegative"
        if bf is not None and bf[key] != res.count:
            mismatch.append(f"optimal count {res.count} vs brute force {bf[key]}")
    return dumps({"r": r, **result_to_dict(res, include_plateaus=cfg.plateaus)}), mismatch


def cmd_sweep(cfg):
    body = resolve_body(cfg.body)
    grid = parse_grid(_require(cfg.r, "--r"))
    if cfg.objective not in OBJECTIVES:
        raise UsageError(f"--objective must be one of {OBJECTIVES}")
    mode = "exact_d2" if _mode(cfg, body.dimension) == "exact" else "heuristic"
    sweep = convergence_sweep(body, grid, cfg.objective, mode, seed=cfg.seed, budget=cfg.budget,
                              search_interval=_interval(cfg))
    if (cfg.format or "csv") == "csv":
        return sweep_to_csv(sweep), []
    rows = []
    for row, res in zip(sweep.rows, sweep.results):
        rec = {"r": row.r, "a_opt": row.a_opt, "deviation": row.deviation, "bound": row.bound, "count": row.count}
        if mode == "exact_d2":
            rec["plateaus"] = [[p.t_lo, p.t_hi, p.count] for p in res.plateaus]
        rows.append(rec)
    return dumps({"rows": rows, "exponent": sweep.exponent}), []


def cmd_weyl(cfg):
    sides = parse_floats(_require(cfg.sides, "--sides"), "--sides")
    lams = parse_grid(_require(cfg.lam, "--lam"))
    if cfg.boundary not in ("dirichlet", "neumann"):
        raise UsageError("--boundary must be 'dirichlet' or 'neumann'")
    results = [weyl_cuboid_count(sides, lam, cfg.boundary) for lam in lams]
    rows = [[w.lam, w.exact, w.two_term, abs(w.exact - w.two_term) / w.exact if w.exact else math.inf]
            for w in results]
    if (cfg.format or ("json" if len(rows) == 1 else "csv")) == "csv":
        return _csv(["lambda", "exact", "two_term", "relative_error"], rows), []
    recs = [{"lambda": a, "exact": b, "two_term": c, "relative_error": e, "boundary": cfg.boundary}
            for a, b, c, e in rows]
    return dumps(recs[0] if len(recs) == 1 else recs), []


def cmd_fourier_check(cfg):
    body = resolve_body(cfg.body)
    A = _stretch_or_identity(cfg, body.dimension)
    grid = parse_grid(_require(cfg.r, "--r"))
    records, failed = [], []
    for r in grid:
        deltas = parse_grid(cfg.delta) if cfg.delta else [default_delta(A.sup_inverse, r, body.dimension)]
        for delta in deltas:
            res = sandwich_check(body, A, r, delta, K=cfg.K)
            records.append(res.as_dict())
            if not res.passed:
                failed.append(f"sandwich fails at r={fmt(r)}, delta={fmt(delta)}")
    if (cfg.format or "json") == "csv":
        header = ["r", "delta", "lower", "exact", "upper", "pass", "truncation_bound"]
        text = _csv(header, [[rec[k] for k in header] for rec in records])
    else:
        text = dumps(records[0] if len(records) == 1 else records)
    return text, failed


HANDLERS = {
    "count": cmd_count,
    "balance": cmd_balance,
    "predict": cmd_predict,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "weyl": cmd_weyl,
    "fourier-check": cmd_fourier_check,
}


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="latstretch", description="Lattice points in stretched convex bodies.")
    parser.add_argument("--config", help="JSON file holding a full run configuration")
    parser.add_argument("--dump-config", action="store_true", help="print the normalised configuration and exit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, body=True):
        if body:
            p.add_argument("--body", help="body file (JSON/TOML) or inline JSON")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--threads", type=int, help="numba thread count (default: LATSTRETCH_THREADS or all cores)")
        # also accepted after the subcommand; SUPPRESS keeps the global value otherwise
        p.add_argument("--dump-config", action="store_true", default=argparse.SUPPRESS,
                       help="print the normalised configuration and exit")

    p = sub.add_parser("count", help="exact lattice counts in A(rΩ)")
    common(p)
    p.add_argument("--r", required=True, help="radius or start:stop:step grid")
    p.add_argument("--A", help="comma-separated stretch entries with product 1 (default identity)")
    p.add_argument("--check", action="store_true", help="cross-check against brute force")

    p = sub.add_parser("balance", help="balanced representative BΩ")
    common(p)

    p = sub.add_parser("predict", help="two-term prediction against the exact count")
    common(p)
    p.add_argument("--r", required=True)
    p.add_argument("--A")
    p.add_argument("--variant", default="positive", choices=VARIANTS)
    p.add_argument("--check", action="store_true")

    for name, helptext in (("optimize", "optimal determinant-one stretch"), ("sweep", "optimal stretch over an r grid")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--r", required=True)
        p.add_argument("--objective", default="maximize_positive", choices=OBJECTIVES)
        p.add_argument("--mode", choices=("exact", "heuristic"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--budget", type=int, default=20000)
        p.add_argument("--search-interval", dest="search_interval", help="lo,hi range for a in diag(a, 1/a)")
        if name == "optimize":
            p.add_argument("--check", action="store_true")
            p.add_argument("--plateaus", action="store_true", help="include the full plateau list")

    p = sub.add_parser("weyl", help="Laplacian eigenvalue counts on a cuboid")
    common(p, body=False)
    p.add_argument("--sides", required=True, help="comma-separated side lengths")
    p.add_argument("--lam", required=True, help="eigenvalue threshold or start:stop:step grid")
    p.add_argument("--boundary", default="dirichlet", choices=("dirichlet", "neumann"))

    p = sub.add_parser("fourier-check", help="mollified sandwich bounds around the exact count")
    common(p)
    p.add_argument("--r", required=True)
    p.add_argument("--A")
    p.add_argument("--delta", help="mollifier width or grid (default a^{2d/(d+1)} r^{-(d-1)/(d+1)})")
    p.add_argument("--K", type=float, help="truncation radius for the lattice sum")
    return parser


def config_from_args(argv):
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        try:
            data = json.loads(Path(ns.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {ns.config!r}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        return RunConfig.from_dict(data), ns.dump_config
    if ns.command is None:
        raise UsageError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
    values = {f.name: getattr(ns, f.name) for f in fields(RunConfig) if hasattr(ns, f.name)}
    return RunConfig(**values), ns.dump_config


def run(argv=None, stdout=None, stderr=None):
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg, dump = config_from_args(sys.argv[1:] if argv is None else list(argv))
        if dump:
            stdout.write(dumps(cfg.to_dict()))
            return EXIT_OK
        threads = cfg.threads if cfg.threads is not None else _accel.threads_from_env()
        _accel.set_threads(threads)
        text, problems = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        stderr.write(f"latstretch: error: {exc}\n")
        return EXIT_USAGE
    except OracleTooLargeError as exc:
        stderr.write(f"latstretch: brute-force guard exceeded: box {exc.box_size} points > limit {exc.limit}\n")
        return EXIT_FAIL
    except (PreconditionError, TooLargeError, NumericFailureError) as exc:
        stderr.write(f"latstretch: {exc}\n")
        return EXIT_FAIL
    except (InvalidInputError, NotImplementedError) as exc:
        stderr.write(f"latstretch: error: {exc}\n")
        return EXIT_USAGE
    except LatstretchError as exc:  # pragma: no cover - defensive
        stderr.write(f"latstretch: {exc}\n")
        return EXIT_FAIL

    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)
    for line in problems:
        stderr.write(f"latstretch: check failed: {line}\n")
    return EXIT_FAIL if problems else EXIT_OK


def main():  # pragma: no cover
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
