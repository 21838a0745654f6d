"""Command-line interface.

Subcommands
-----------
region    outer bound, inner bound and corner points of one configuration
ndt       delivery time and bounds of a message-length vector
sweep     average delivery time versus cache size
simulate  finite-SNR delivery of the optimal and the time-sharing plan
example1  end-to-end reproduction of the three-user worked example

Settings can also come from ``--config FILE`` with ``key = value`` lines
whose keys match the long flag names; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .caching import (
    DemandVector,
    centralized_place,
    decentralized_place,
    example1_lengths,
    generate_coded_messages,
    load_cache_fixture,
    load_lengths_fixture,
    table1_cache,
    worst_case_demand,
)
from .experiments import SCHEMES, centralized_sweep, decentralized_sweep
from .model import ConfigError, Regime, SystemConfig, canonical_groups, parse_number
from .ndt import (
    benchmark_group_by_group,
    benchmark_time_sharing,
    lower_bound_ndt,
    solve_ndt,
    time_sharing_plan,
    upper_bound_ndt,
)
from .phy import simulate_delivery
from .region import (
    contains,
    corner_points,
    format_rational,
    inner_bound,
    outer_bound,
    support_function,
    write_corner_points,
)

SCHEMA_VERSION = 1
CONFIG_KEYS = {
    "k", "m", "n", "l", "f", "mu", "seed", "draws", "pgrid", "out", "format", "fixture",
    "mode", "scheme", "mugrid", "lengths", "generate", "demand", "bits",
}


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


class _Output:
    """CSV or JSON-lines writer with a versioned, timestamped first line."""

    def __init__(self, path, fmt: str, schema: str):
        self.path = path
        self.fmt = fmt
        self.schema = f"{schema}/{SCHEMA_VERSION}"
        self.rows: list[dict] = []

    def add(self, row: dict) -> None:
        self.rows.append(row)

    def render(self) -> str:
        stamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        buf = io.StringIO()
        if self.fmt == "jsonl":
            buf.write(json.dumps({"schema": self.schema, "generated": stamp}) + "\n")
            for row in self.rows:
                buf.write(json.dumps({k: _jsonable(v) for k, v in row.items()}) + "\n")
            return buf.getvalue()
        buf.write(f"# cachedof {__version__} schema={self.schema} generated={stamp}\n")
        columns = list(self.rows[0]) if self.rows else []
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in self.rows:
            writer.writerow([_num(row.get(c)) for c in columns])
        return buf.getvalue()

    def emit(self) -> None:
        text = self.render()
        if self.path in (None, "-"):
            sys.stdout.write(text)
            return
        try:
            Path(self.path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise SystemExit(f"cannot write {self.path}: {exc.strerror}") from None


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def _floats(text) -> list:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [float(parse_number(t)) for t in text]
    return [float(parse_number(t)) for t in str(text).replace(";", ",").split(",") if t.strip()]


def _fraction(text) -> float:
    """argparse type accepting decimals and ``p/q`` fractions."""
    try:
        return float(parse_number(text))
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _config(args) -> SystemConfig:
    return SystemConfig(K=args.k, M=args.m, N=args.n, L=max(args.l, args.k) if args.l_default else args.l,
                        F=args.f, mu=args.mu)


# ---------------------------------------------------------------------------
# commands

def cmd_region(args) -> int:
    cfg = _config(args)
    spec = inner_bound(cfg)
    points = corner_points(spec)
    outer = outer_bound(cfg)
    if args.out in (None, "-"):
        buf = io.StringIO()
        write_corner_points(points, cfg.K, buf)
        sys.stdout.write(buf.getvalue())
        return 0
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SystemExit(f"cannot create {out}: {exc.strerror}") from None
    labels = canonical_groups(cfg.K).labels()

    def rows_of(poly, name):
        for lab, row, rhs, cond in zip(poly.labels, poly.A, poly.c, poly.cond_array):
            rec = {"region": name, "row": lab}
            rec.update({g: format_rational(a) for g, a in zip(labels, row)})
            rec["rhs"] = format_rational(rhs)
            rec["active_when"] = f"d{labels[cond]} > 0" if cond >= 0 else "always"
            yield rec

    sink = _Output(out / f"outer_bound.{args.format}", args.format, "region-rows")
    for rec in rows_of(outer, "outer"):
        sink.add(rec)
    sink.emit()
    sink = _Output(out / f"inner_bound.{args.format}", args.format, "region-rows")
    for name, poly in spec.polytopes.items():
        for rec in rows_of(poly, name):
            sink.add(rec)
    sink.emit()
    with open(out / "corner_points.csv", "w", encoding="utf-8") as fh:
        write_corner_points(points, cfg.K, fh)

    checks = _Output(out / f"checks.{args.format}", args.format, "region-checks")
    sound = all(contains(spec, p) for p in points.points)
    dominated = all(contains(outer, p) for p in points.points)
    checks.add({"check": "corner points inside inner bound", "passed": sound, "detail": len(points)})
    checks.add({"check": "corner points inside outer bound", "passed": dominated, "detail": len(points)})
    if cfg.K == 2 or cfg.regime is not Regime.MID:
        rng = np.random.default_rng(args.seed)
        worst = 0.0
        for _ in range(100):
            w = rng.random(cfg.n_groups)
            worst = max(worst, abs(support_function(spec, w) - support_function(outer, w)))
        checks.add({"check": "inner and outer support functions agree", "passed": worst <= 1e-9,
                    "detail": worst})
    checks.emit()
    print(f"wrote {len(points)} corner points to {out}", file=sys.stderr)
    return 0


def _message_lengths(args, cfg: SystemConfig) -> tuple[np.ndarray, str]:
    if args.lengths is not None:
        return np.array(_floats(args.lengths)), "inline"
    if args.generate:
        if args.fixture:
            cache = load_cache_fixture(args.fixture, K=cfg.K)
        elif args.generate == "centralized":
            cache = centralized_place(cfg)
        else:
            cache = decentralized_place(cfg, seed=args.seed, bits=args.bits)
        demand = (
            DemandVector.from_one_based([int(x) for x in _floats(args.demand)], cfg.L)
            if args.demand
            else worst_case_demand(cfg)
        )
        return generate_coded_messages(cache, demand), f"generated:{args.generate}"
    if args.fixture:
        return load_lengths_fixture(args.fixture, K=cfg.K), f"fixture:{args.fixture}"
    if cfg.K == 3:
        return example1_lengths(), "fixture:example1"
    raise ConfigError("give --lengths, --fixture or --generate")


def _ndt_rows(f, cfg: SystemConfig, sink: _Output) -> dict:
    plan = solve_ndt(f, cfg)
    tau_l = lower_bound_ndt(f, cfg)
    tau_u = upper_bound_ndt(f, cfg) if cfg.regime is Regime.MID else None
    rho = plan.tau / tau_l if tau_l > 0 else None
    labels = canonical_groups(cfg.K).labels()
    record = {
        "tau_a": plan.tau,
        "tau_l": tau_l,
        "tau_u": tau_u,
        "rho": rho,
        "tau_time_sharing": benchmark_time_sharing(f, cfg),
        "tau_group_by_group": benchmark_group_by_group(f, cfg),
    }
    for name, value in record.items():
        sink.add({"kind": "bound", "name": name, "value": value, "exact": _exact(value)})
    for lab, v in zip(labels, f):
        sink.add({"kind": "f", "name": lab, "value": float(v), "exact": _exact(v)})
    for lab, v in zip(labels, plan.d_star):
        sink.add({"kind": "d_star", "name": lab, "value": float(v), "exact": _exact(v)})
    for k, ((point, w), src) in enumerate(zip(plan.phases, plan.sources), start=1):
        sink.add({"kind": "phase_weight", "name": f"phase {k} ({src})", "value": w, "exact": _exact(w)})
        for lab, v in zip(labels, point):
            sink.add({"kind": f"phase_{k}_point", "name": lab, "value": float(v), "exact": _exact(v)})
    return record


def _exact(v) -> str:
    return "" if v is None else format_rational(float(v))


def cmd_ndt(args) -> int:
    cfg = _config(args)
    f, source = _message_lengths(args, cfg)
    sink = _Output(args.out, args.format, "ndt")
    sink.add({"kind": "input", "name": "source", "value": source, "exact": ""})
    _ndt_rows(f, cfg, sink)
    sink.emit()
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    schemes = SCHEMES if args.scheme == "all" else (args.scheme,)
    mus = _floats(args.mugrid) or [round(0.1 * k, 10) for k in range(11)]
    if any(not 0 <= m <= 1 for m in mus):
        raise ConfigError("mu grid values must lie in [0, 1]")
    if args.mode == "centralized":
        points = centralized_sweep(cfg, mus, schemes, samples=args.draws, seed=args.seed)
    else:
        points = decentralized_sweep(cfg, mus, schemes, realizations=args.draws, seed=args.seed, bits=args.bits)
    sink = _Output(args.out, args.format, "sweep")
    for p in points:
        sink.add(p.to_record())
    sink.emit()
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    f, _ = _message_lengths(args, cfg)
    pgrid = _floats(args.pgrid) or [10, 20, 30, 40, 50]
    if args.draws < 1:
        raise ConfigError("draws must be >= 1")
    plans = {"proposed": solve_ndt(f, cfg), "time-sharing": time_sharing_plan(f, cfg)}
    sink = _Output(args.out, args.format, "simulate")
    means = {}
    for name, plan in plans.items():
        try:
            res = simulate_delivery(plan, f, cfg, pgrid, draws=args.draws, seed=args.seed)
        except Exception as exc:  # surface design failures with the plan name
            raise SystemExit(f"simulation of the {name} plan failed: {exc}") from None
        means[name] = res.mean
        std = res.std
        for row in res.rows(cfg.K):
            p = int(np.flatnonzero(res.P_dB == row["P_dB"])[0])
            sink.add({"scheme": name, **row, "NDT_std": float(std[p])})
    sink.emit()
    better_low = means["time-sharing"][0] < means["proposed"][0]
    better_high = means["proposed"][-1] < means["time-sharing"][-1]
    summary = {
        "crossover": bool(better_low and better_high),
        "time_sharing_better_at_low_P": bool(better_low),
        "proposed_better_at_high_P": bool(better_high),
        "P_dB": pgrid,
        "mean_proposed": means["proposed"].tolist(),
        "mean_time_sharing": means["time-sharing"].tolist(),
    }
    text = json.dumps(summary)
    if args.out not in (None, "-"):
        Path(str(args.out) + ".summary.json").write_text(text + "\n", encoding="utf-8")
    print(text, file=sys.stderr)
    return 0


def cmd_example1(args) -> int:
    cfg = SystemConfig(3, 5, 3, L=4, F=args.f, mu=0.4)
    cache = table1_cache()
    generated = generate_coded_messages(cache, worst_case_demand(cfg))
    f = example1_lengths()
    sink = _Output(args.out, args.format, "ndt")
    labels = canonical_groups(3).labels()
    for lab, v in zip(labels, generated):
        sink.add({"kind": "zero_padded_f", "name": lab, "value": float(v), "exact": _exact(v)})
    _ndt_rows(f, cfg, sink)
    sink.emit()
    return 0


# ---------------------------------------------------------------------------
# argument handling

def _read_config(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SystemExit(f"cannot read config {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split(sep, 1))
        key = key.lower().lstrip("-").replace("-", "").replace("_", "")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file with defaults for the flags below")
    common.add_argument("--k", type=int, default=3, help="number of users")
    common.add_argument("--m", type=int, default=5, help="transmit antennas")
    common.add_argument("--n", type=int, default=3, help="receive antennas per user")
    common.add_argument("--l", type=int, default=None, help="library size (default 4, at least K)")
    common.add_argument("--f", type=int, default=100, help="file length in bits")
    common.add_argument("--mu", type=_fraction, default=0.0, help="normalized cache size")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--draws", type=int, default=200, help="channel draws or random realizations")
    common.add_argument("--out", default=None, help="output path ('-' or omitted: stdout)")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--fixture", default=None, help="cache table or message-length table")

    parser = argparse.ArgumentParser(prog="cachedof", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("region", parents=[common], help="write region rows and corner points")
    p.set_defaults(func=cmd_region)

    def lengths_flags(p):
        p.add_argument("--lengths", default=None, help="comma-separated message lengths, canonical order")
        p.add_argument("--generate", choices=("centralized", "decentralized"), default=None,
                       help="build lengths from a placement and a demand")
        p.add_argument("--demand", default=None, help="comma-separated 1-based file indices")
        p.add_argument("--bits", type=int, default=10_000, help="placement granularity (0: large-file limit)")

    p = sub.add_parser("ndt", parents=[common], help="delivery time and bounds")
    lengths_flags(p)
    p.set_defaults(func=cmd_ndt)

    p = sub.add_parser("sweep", parents=[common], help="average NDT versus cache size")
    p.add_argument("--mode", choices=("centralized", "decentralized"), default="decentralized")
    p.add_argument("--scheme", choices=SCHEMES + ("all",), default="all")
    p.add_argument("--mugrid", default=None, help="comma-separated cache sizes (default 0, 0.1, ..., 1)")
    p.add_argument("--bits", type=int, default=None, help="placement granularity (default: F)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="finite-SNR delivery simulation")
    lengths_flags(p)
    p.add_argument("--pgrid", default=None, help="comma-separated powers in dB (default 10,...,50)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example1", parents=[common], help="reproduce the three-user worked example")
    p.set_defaults(func=cmd_example1)
    return parser


def _apply_config(parser, args, argv):
    if not args.config:
        return args
    values = _read_config(args.config)
    given = {a.split("=", 1)[0].lstrip("-").replace("-", "") for a in argv if a.startswith("--")}
    for key, value in values.items():
        if key in given or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            value = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(parse_number(value))
        elif isinstance(current, float):
            value = float(parse_number(value))
        elif key in ("l",) and current is None:
            value = int(value)
        setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(parser, args, argv)
        args.l_default = args.l is None
        if args.l is None:
            args.l = 4
        return int(args.func(args) or 0)
    except ConfigError as exc:
        parser.exit(2, f"cachedof {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
