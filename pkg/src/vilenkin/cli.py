"""Command-line driver.

Exit codes: 0 pass, 1 a checked property failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import system
from .group import GroupSpec, Interval
from .hardy import Atom, Martingale, make_atom, random_interval, validate_atom
from .transform import (
    GridFunction,
    Spectrum,
    check_grid_size,
    forward_fast,
    forward_naive,
    inverse,
    read_csv,
    write_csv,
)
from .verify import (
    CounterexampleSpec,
    atom_nullity_check,
    atom_tail_integral,
    build_counterexample,
    choose_alphas,
    coefficient_bound_ratio,
    counterexample_coefficients,
    parse_phi,
    run_bound_trials,
    tail_spec_bound,
    trial_rng,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COEFF_RTOL = 1e-9

BOUND_FIELDS = ["trial", "p", "N", "n_star", "ratio"]
TAIL_FIELDS = ["trial", "p", "N_a", "tail_integral", "spec_bound"]
COUNTER_FIELDS = ["k", "alpha_k", "M_alpha", "coeff_numeric", "coeff_closed", "phi_value", "rho_k"]
BENCH_FIELDS = ["m", "depth", "M_N", "fast_s", "naive_s", "speedup"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    m: str
    depth: int
    p: float
    phi: str
    seed: int
    trials: int
    nmax: int | None
    budget: float
    fmt: str
    out: str | None

    def group(self) -> GroupSpec:
        try:
            spec = GroupSpec.from_string(self.m, self.depth)
        except (ValueError, OverflowError) as exc:
            raise ConfigError(str(exc)) from None
        return spec

    def grid_group(self) -> GroupSpec:
        spec = self.group()
        try:
            check_grid_size(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return spec


def _config(args) -> RunConfig:
    cfg = RunConfig(
        m=args.m,
        depth=args.depth,
        p=args.p,
        phi=args.phi,
        seed=args.seed,
        trials=args.trials,
        nmax=args.nmax,
        budget=args.budget,
        fmt=args.format,
        out=args.out,
    )
    if cfg.depth < 1:
        raise ConfigError(f"--depth must be >= 1, got {cfg.depth}")
    if cfg.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {cfg.trials}")
    if not 0 < cfg.budget < 1:
        raise ConfigError(f"--budget must lie in (0, 1), got {cfg.budget}")
    return cfg


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def emit(cfg: RunConfig, fields: list[str], rows: list[dict], summary: dict) -> None:
    """Write rows as CSV (summary as one JSON line on stderr) or everything as JSON."""
    if cfg.fmt == "json":
        text = json.dumps({"summary": summary, "rows": rows}, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
        text = buf.getvalue()
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------


def cmd_table(cfg: RunConfig, args) -> int:
    spec = cfg.group()
    rows = [{"k": k, "m_k": spec.m[k] if k < spec.N else "", "M_k": Mk} for k, Mk in enumerate(spec.M)]
    emit(cfg, ["k", "m_k", "M_k"], rows, {"M": list(spec.M), "lambda": spec.lam, "M_N": spec.order})
    return EXIT_OK


def cmd_transform(cfg: RunConfig, args) -> int:
    spec = cfg.grid_group()
    try:
        if args.input in (None, "-"):
            values = read_csv(sys.stdin)
        else:
            with open(args.input, newline="") as fh:
                values = read_csv(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read input: {exc}") from None
    if len(values) != spec.order:
        raise ConfigError(f"input has {len(values)} values, the group has M_N={spec.order} points")
    if args.inverse:
        result = inverse(Spectrum(spec, values)).samples
        summary = {"direction": "inverse", "M_N": spec.order}
    else:
        result = forward_fast(GridFunction(spec, values)).coeffs
        summary = {"direction": "forward", "M_N": spec.order}
    status = EXIT_OK
    if args.check:
        if args.inverse:
            back = forward_fast(GridFunction(spec, result)).coeffs
            dev = float(np.max(np.abs(back - values)))
        else:
            dev = float(np.max(np.abs(forward_naive(GridFunction(spec, values)).coeffs - result)))
        summary["max_abs_deviation"] = dev
        if dev >= 1e-9:
            status = EXIT_FAIL
    if cfg.fmt == "json":
        rows = [{"index": i, "re": float(v.real), "im": float(v.imag)} for i, v in enumerate(result)]
        emit(cfg, ["index", "re", "im"], rows, summary)
    else:
        print(json.dumps(summary, sort_keys=True), file=sys.stderr)
        if cfg.out:
            with open(cfg.out, "w", newline="") as fh:
                write_csv(result, fh)
        else:
            write_csv(result, sys.stdout)
    return status


def _broken_atom(spec: GroupSpec, interval: Interval, p: float) -> Atom:
    # constant on the interval: right support and sup bound, nonzero mean
    vals = np.where(interval.mask(), float(spec.M[interval.rank]) ** (1 / p) / 2, 0.0)
    return Atom(p, interval, GridFunction(spec, vals))


def cmd_atoms(cfg: RunConfig, args) -> int:
    rank = args.atom_rank
    depth = cfg.depth if args.depth_given else rank + 2
    if not 1 <= rank < depth:
        raise ConfigError(f"atom rank {rank} needs 1 <= N_a < depth ({depth})")
    cfg.depth = depth
    spec = cfg.grid_group()
    if not 0 < cfg.p < 1:
        raise ConfigError(f"--p must lie in (0, 1), got {cfg.p}")
    bound = tail_spec_bound(spec, rank, cfg.p)
    rows, failures = [], []
    for t in range(cfg.trials):
        rng = trial_rng(cfg.seed, t)
        interval = random_interval(spec, rng, rank)
        if args.break_atom and t == 0:
            a = _broken_atom(spec, interval, cfg.p)
        else:
            a = make_atom(spec, interval, cfg.p, seed=rng)
        check = validate_atom(a)
        if not check:
            failures.append(f"trial {t}: not a p-atom ({'; '.join(check.failures)})")
        if not atom_nullity_check(a):
            failures.append(f"trial {t}: S_n a does not vanish for n <= M_{rank}")
        tail = atom_tail_integral(a, cfg.p)
        if tail > bound:
            failures.append(f"trial {t}: tail integral {tail:.6g} exceeds {bound:.6g}")
        rows.append({"trial": t, "p": cfg.p, "N_a": rank, "tail_integral": tail, "spec_bound": bound})
    summary = {
        "max_tail": max(r["tail_integral"] for r in rows),
        "C_spec": bound,
        "trials": cfg.trials,
        "N": spec.N,
        "N_a": rank,
        "passed": not failures,
    }
    emit(cfg, TAIL_FIELDS, rows, summary)
    for msg in failures:
        print(f"FAIL {msg}", file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


def cmd_bound(cfg: RunConfig, args) -> int:
    if not 0 < cfg.p < 1:
        raise ConfigError(f"--p must lie in (0, 1), got {cfg.p}")
    depths = list(range(4, 9)) if args.sweep else [cfg.depth]
    specs = []
    for d in depths:
        cfg.depth = d
        specs.append(cfg.grid_group())
    rows = []
    per_depth = {}
    for spec in specs:
        if args.constant:
            entry = coefficient_bound_ratio(Martingale(GridFunction(spec, np.ones(spec.order))), cfg.p)
            recs = [{"trial": 0, "p": cfg.p, "N": spec.N, "n_star": entry.n_star, "ratio": entry.ratio}]
        else:
            recs = run_bound_trials(spec, cfg.p, cfg.trials, cfg.seed).records
        rows.extend(recs)
        per_depth[str(spec.N)] = max(r["ratio"] for r in recs)
    worst = max(r["ratio"] for r in rows)
    summary = {"max_ratio": worst, "empirical_c_p": worst, "p": cfg.p, "m": cfg.m}
    if args.sweep:
        vals = list(per_depth.values())
        summary["sweep"] = per_depth
        summary["stability_factor"] = max(vals) / min(vals)
    emit(cfg, BOUND_FIELDS, rows, summary)
    return EXIT_OK if np.isfinite(worst) else EXIT_FAIL


def cmd_counterexample(cfg: RunConfig, args) -> int:
    spec = cfg.grid_group()
    try:
        phi = parse_phi(cfg.phi)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            certified = phi.certify(cfg.p)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        alphas = choose_alphas(phi, cfg.p, spec, cfg.budget, args.terms)
        cs = CounterexampleSpec(spec, cfg.p, phi, alphas)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    f = build_counterexample(cs)
    report = counterexample_coefficients(f, cs)
    ok = report.max_rel_err <= COEFF_RTOL and (report.monotone or len(alphas) < 2)
    summary = {
        "blocks": len(alphas),
        "alphas": list(alphas),
        "monotone": report.monotone,
        "max_rel_err": report.max_rel_err,
        "off_block_max": report.off_block_max,
        "budget_sum": float(cs.terms.sum()),
        "budget_cap": 1.0 / (1.0 - cfg.budget),
        "certified": certified,
        "bigM": cs.bigM,
        "passed": ok,
    }
    emit(cfg, COUNTER_FIELDS, report.rows, summary)
    if not ok:
        print("FAIL coefficient mismatch or non-increasing ratios", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


BENCH_SIZES = [("2,3", d) for d in range(4, 13)] + [("2", 12), ("6", 6)]


def _best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench(cfg: RunConfig, args) -> int:
    if args.m_given:
        cfg.grid_group()
    sizes = BENCH_SIZES if not args.m_given else [(cfg.m, cfg.depth)]
    rows = []
    rng = np.random.default_rng(cfg.seed)
    for m, depth in sizes:
        spec = GroupSpec.from_string(m, depth)
        check_grid_size(spec)
        f = GridFunction(spec, rng.standard_normal(spec.order) + 1j * rng.standard_normal(spec.order))
        fast = _best_time(lambda: forward_fast(f), 5)
        naive = None
        if spec.order <= args.naive_max:

            def cold_naive():
                # count character construction too: the naive route is the definition
                system._dense_characters.cache_clear()
                forward_naive(f)

            naive = _best_time(cold_naive, 1)
        rows.append(
            {
                "m": m,
                "depth": depth,
                "M_N": spec.order,
                "fast_s": fast,
                "naive_s": "" if naive is None else naive,
                "speedup": "" if naive is None else naive / fast,
            }
        )
    emit(cfg, BENCH_FIELDS, rows, {"sizes": len(rows), "naive_max": args.naive_max})
    return EXIT_OK


COMMANDS = {
    "table": cmd_table,
    "transform": cmd_transform,
    "atoms": cmd_atoms,
    "bound": cmd_bound,
    "counterexample": cmd_counterexample,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", default=None, help="comma-separated radices, cycled to --depth (default 2,3)")
    common.add_argument("--depth", type=int, default=None, help="truncation depth N")
    common.add_argument("--p", type=float, default=0.5)
    common.add_argument("--phi", default="pow:0.5", help="pow:<g> | log | const:<c> | file:<csv>")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=100)
    common.add_argument("--nmax", type=int, default=None)
    common.add_argument("--budget", type=float, default=0.5, help="geometric budget ratio r")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--out", default=None, help="report path (default stdout)")

    parser = argparse.ArgumentParser(prog="vilenkin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table", parents=[common], help="print the scale table")
    t = sub.add_parser("transform", parents=[common], help="Vilenkin transform of a CSV column")
    t.add_argument("input", nargs="?", default=None, help="CSV with index,re,im (default stdin)")
    t.add_argument("--check", action="store_true", help="compare with the naive transform")
    t.add_argument("--inverse", action="store_true", help="synthesize from coefficients")
    a = sub.add_parser("atoms", parents=[common], help="random p-atom tail and nullity suite")
    a.add_argument("--atom-rank", type=int, default=4)
    a.add_argument("--break-atom", action="store_true", help="replace trial 0 by a non-atom")
    b = sub.add_parser("bound", parents=[common], help="coefficient bound ratios on atoms")
    b.add_argument("--sweep", action="store_true", help="run depths 4..8")
    b.add_argument("--constant", action="store_true", help="use the constant function instead of atoms")
    c = sub.add_parser("counterexample", parents=[common], help="sharpness construction")
    c.add_argument("--terms", type=int, default=None, help="require exactly this many blocks")
    k = sub.add_parser("bench", parents=[common], help="time fast against naive transforms")
    k.add_argument("--naive-max", type=int, default=4096)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.depth_given = args.depth is not None
    args.m_given = args.m is not None
    if args.m is None:
        args.m = "2,3"
    if args.depth is None:
        args.depth = 12 if args.command == "counterexample" else 4
    try:
        cfg = _config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
