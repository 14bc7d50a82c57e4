"""Command-line entry point: ``gemoran <subcommand> ...``.

Exit codes: 0 success, 1 a check or criterion failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from collections import defaultdict
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _add_model_params(p):
    for name in ("mu", "nu", "beta", "alpha"):
        p.add_argument(f"--{name}", type=float, default=None)


def _sidecar_path(out: Path) -> Path:
    return out.with_name(out.stem + ".sidecar.csv")


def cmd_simulate(args) -> int:
    from .harness import ExperimentConfig, load_config, raw_csv, sidecar_csv, simulate_replicates, worker_count, write_text

    overrides = {"model": args.model, "replicates": args.replicates, "seed": args.seed,
                 "mu": args.mu, "nu": args.nu, "beta": args.beta, "alpha": args.alpha}
    if args.N is not None:
        overrides["N"] = (args.N,)
    if args.t_grid is not None:
        overrides["t_grid"] = tuple(float(v) for v in args.t_grid.split(","))
    elif args.t_end is not None:
        overrides["t_grid"] = (0.0, args.t_end) if args.t_end > 0 else (0.0,)
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    if cfg.model == "both":
        raise UsageError("simulate takes a single model; use compare for model=both")
    if len(cfg.N) != 1:
        raise UsageError("simulate takes a single N")
    recs = simulate_replicates(cfg.model, cfg.params(cfg.N[0]), cfg.init, cfg.t_grid, cfg.replicates,
                               cfg.seed, worker_count(cfg.workers))
    out = Path(args.out)
    write_text(out, raw_csv(recs))
    write_text(_sidecar_path(out), sidecar_csv(recs))
    print(f"wrote {len(recs)} replicates to {out} and {_sidecar_path(out)}")
    return EXIT_OK


def cmd_generator_check(args) -> int:
    from . import generator as G
    from .model_core import SeedSpec, TypeDistribution

    tags = [args.identity] if args.identity else list(G.IDENTITIES)
    for tag in tags:
        if tag not in G.IDENTITIES:
            raise UsageError(f"unknown identity {tag!r}; known: {', '.join(G.IDENTITIES)}")
    if not 1 <= args.N <= G.MAX_N:
        raise UsageError(f"--N must lie in 1..{G.MAX_N}")
    rng = SeedSpec(args.seed).generator("generator-check", args.N)
    states = [TypeDistribution.from_counts(rng.integers(0, args.support_max + 1, size=args.N))
              for _ in range(args.states)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("state_id", "identity", "lhs", "rhs", "abs_diff"))
    failures = defaultdict(int)
    for sid, x in enumerate(states):
        for tag in tags:
            r = G.check_identity(tag, x, args.N)
            w.writerow((sid, tag, str(r.lhs), str(r.rhs), str(r.abs_diff)))
            failures[tag] += r.abs_diff != 0
    _write(args.out, buf.getvalue())
    for tag in tags:
        print(f"{tag}: {args.states - failures[tag]}/{args.states} exact")
    return EXIT_FAIL if any(failures.values()) else EXIT_OK


def cmd_feller_sample(args) -> int:
    from . import feller as F
    from .model_core import SeedSpec

    if args.n < 1:
        raise UsageError("--n must be >= 1")
    drift = any(v for v in (args.mu, args.nu, args.beta, args.alpha))
    if drift:
        mu, nu, beta, alpha = (v or 0.0 for v in (args.mu, args.nu, args.beta, args.alpha))
        dp = F.DiffusionParams(args.z, mu, nu - beta - alpha)
        z = F.em_endpoints(dp, args.t, args.dt, args.n, SeedSpec(args.seed).generator("feller-sample", "em"))
    else:
        z = F.feller_exact_sample(args.z, args.t, SeedSpec(args.seed).generator("feller-sample"), size=args.n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("sample", "Z"))
    for i, v in enumerate(z):
        w.writerow((i, repr(float(v))))
    _write(args.out, buf.getvalue())
    print(f"{args.n} samples: mean {z.mean():.5f}, variance {z.var(ddof=1) if z.size > 1 else 0.0:.5f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .harness import load_config, run_experiment

    overrides = {"out_dir": args.out_dir, "seed": args.seed}
    cfg = load_config(args.config, overrides)
    report, _ = run_experiment(cfg)
    print(f"report with {len(report.rows)} rows written to {Path(cfg.out_dir) / 'report.csv'}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Long-format mean/SE table from raw simulate CSVs."""
    from .statistics import mean_se

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("source", "t", "stat", "value", "se"))
    for path in args.raw:
        cols = defaultdict(lambda: defaultdict(list))
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                t = float(row["t"])
                for stat in ("Z", "rho2", "rho3", "gap2", "events_so_far"):
                    cols[t][stat].append(float(row[stat]))
        for t in sorted(cols):
            for stat, values in cols[t].items():
                m, se = mean_se(values)
                w.writerow((Path(path).name, repr(t), stat, repr(m), repr(se)))
    _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import ACCEPT_SEED, AcceptanceSuite, verdict_csv

    numbers = tuple(range(1, 11))
    if args.criteria:
        try:
            numbers = tuple(int(v) for v in args.criteria.split(","))
        except ValueError:
            raise UsageError(f"bad --criteria {args.criteria!r}") from None
        if any(not 1 <= n <= 10 for n in numbers):
            raise UsageError("criteria are numbered 1..10")
    suite = AcceptanceSuite(ACCEPT_SEED if args.seed is None else args.seed, args.workers)
    results = suite.run_all(numbers, echo=lambda line: print(line, flush=True))
    if args.out:
        _write(args.out, verdict_csv(results))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def _write(path, text):
    from .harness import write_text

    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(path, text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gemoran", description="Bi-parental Moran model of GE counts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate replicates and write the raw CSV")
    p.add_argument("--model", choices=("jump", "graph", "graph_unit"), default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--t-grid", default=None, help="comma-separated record times (overrides --t-end)")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    _add_model_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generator-check", help="brute-force the generator identities on random states")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--states", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity", default=None)
    p.add_argument("--support-max", type=int, default=6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generator_check)

    p = sub.add_parser("feller-sample", help="sample the limiting diffusion at time t")
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", default=None)
    _add_model_params(p)
    p.set_defaults(func=cmd_feller_sample)

    p = sub.add_parser("compare", help="run a configured experiment and write the convergence report")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="summarize raw simulate CSVs")
    p.add_argument("raw", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("accept", help="run the acceptance suite")
    p.add_argument("--criteria", default=None, help="comma-separated subset, e.g. 1,4,7")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="verdict CSV")
    p.set_defaults(func=cmd_accept)
    return parser


def main(argv=None) -> int:
    from .harness import ConfigError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"gemoran {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"gemoran {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
