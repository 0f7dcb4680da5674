"""Command-line entry point: ``privtd <subcommand> ...``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from . import bounds, core, discovery, harness, perturb, synth

log = logging.getLogger("privtd")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _positive(kind):
    def parse(s):
        v = kind(s)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {s}")
        return v
    return parse


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {s}")
    return v


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise RuntimeError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise RuntimeError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e


def _cell(v):
    if isinstance(v, float):
        return core.fmt(v) if math.isfinite(v) else ("" if math.isnan(v) else core.fmt(v))
    return v


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


# ------------------------------------------------------------------ commands


def cmd_gen(a):
    cfg = synth.SynthConfig(a.n_objects, a.n_users, a.lambda1, a.truth_low, a.truth_high, a.seed)
    data = synth.generate(cfg)
    core.write_table(data.table, a.out_table)
    core.write_truth(data.truth, a.out_truth)
    if a.out_sigma2:
        core.write_vector(data.error_variances, a.out_sigma2, ("user", "sigma2"))


def cmd_perturb(a):
    table = core.read_table(a.input)
    profile = perturb.sample_variances(a.lambda2, table.n_users, a.seed)
    core.write_table(perturb.perturb(table, profile), a.out)
    if a.out_variances:
        profile.to_csv(a.out_variances)


def cmd_discover(a):
    table = core.read_table(a.input)
    if a.method in ("mean", "median"):
        values = discovery.baseline_aggregate(table, a.method)
        summary = {"method": a.method, "iterations": 0, "converged": True}
        weights = np.full(table.n_users, 1.0 / table.n_users)
    else:
        cfg = discovery.DiscoveryConfig(
            max_iterations=a.max_iterations,
            convergence_threshold=a.threshold,
            distance_floor=a.floor,
            weight_update=a.method,
            standardize=a.standardize,
        )
        res = discovery.run(table, cfg)
        values, weights = res.values, res.weights.weights
        summary = {"method": a.method, "iterations": res.iterations, "converged": res.converged}
    summary.update(n_objects=table.n_objects, n_users=table.n_users, entries=len(table))
    if a.truth:
        truth = core.read_truth(a.truth)
        truth.check_covers(table)
        summary["mae_vs_truth"] = core.mae(values, truth.values)
    core.write_vector(values, a.out_aggregate, ("object", "value"))
    if a.out_weights:
        core.write_vector(weights, a.out_weights, ("user", "weight"))
    _dump_json(summary, a.out_summary)


def cmd_bounds(a):
    if a.gamma is not None:
        sens = bounds.SensitivityParams.from_gamma(a.gamma, a.eta)
    else:
        sens = bounds.SensitivityParams(a.b, a.eta)
    report = bounds.tradeoff(
        a.lambda1, a.n_users,
        bounds.UtilityTarget(a.alpha, a.beta),
        bounds.PrivacyTarget(a.epsilon, a.delta),
        sens,
    )
    _dump_json(report.to_json_dict(), a.out)


def cmd_sweep(a):
    spec = harness.SweepSpec.from_dict(_load_json(a.spec))
    report = harness.sweep(spec, a.seed, a.workers, timing=a.timing)
    _write_csv(a.out_raw, harness.RAW_COLUMNS, (r.csv_fields() for r in report.rows))
    summary = report.summary()
    summary["timing"] = a.timing
    _dump_json(summary, a.out_summary)


def _weights_spec(d):
    d = dict(d)
    known = {"synth", "discovery", "c", "boosted_user", "boost_factor", "seeds"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown weights spec keys: {sorted(unknown)}")
    return (
        synth.SynthConfig(**d.get("synth", {})),
        discovery.DiscoveryConfig(**d.get("discovery", {})),
        float(d.get("c", 1.0)),
        int(d.get("boosted_user", 0)),
        float(d.get("boost_factor", 100.0)),
        int(d.get("seeds", 1)),
    )


def cmd_weights(a):
    cfg, disc, c, user, factor, n_seeds = _weights_spec(_load_json(a.spec))
    rows, per_seed = [], []
    for k in range(n_seeds):
        seed = harness.trial_seed(a.seed, 0, k)
        wc = harness.weight_comparison(cfg, c, user, factor, seed, disc)
        rows.extend((k, seed, *r) for r in wc.rows())
        per_seed.append({
            "trial": k,
            "seed": seed,
            "boosted_weight_orig": float(wc.est_orig[user]),
            "boosted_weight_pert": float(wc.est_pert[user]),
            "rank_correlation_orig": wc.rank_correlation,
            "rank_correlation_pert": wc.rank_correlation_perturbed,
        })
    _write_csv(
        a.out_csv,
        ("trial", "seed", "user", "sigma2", "noise_variance", "true_weight_orig",
         "est_weight_orig", "true_weight_pert", "est_weight_pert"),
        rows,
    )
    drops = sum(p["boosted_weight_pert"] < p["boosted_weight_orig"] for p in per_seed)
    _dump_json({
        "master_seed": a.seed,
        "config": harness._plain({"synth": vars(cfg), "discovery": vars(disc), "c": c,
                                  "boosted_user": user, "boost_factor": factor, "seeds": n_seeds}),
        "boosted_weight_dropped": drops,
        "rank_correlation_orig_median": float(np.median([p["rank_correlation_orig"] for p in per_seed])),
        "trials": per_seed,
    }, a.out_summary)


def cmd_bench(a):
    d = dict(_load_json(a.spec))
    unknown = set(d) - {"synth", "discovery", "c_values", "trials"}
    if unknown:
        raise ValueError(f"unknown bench spec keys: {sorted(unknown)}")
    cfg = synth.SynthConfig(**d.get("synth", {}))
    disc = discovery.DiscoveryConfig(**d.get("discovery", {}))
    report = harness.efficiency_bench(
        cfg, d.get("c_values", [0, 0.5, 1, 2]), int(d.get("trials", 20)),
        a.seed, disc, timing=a.timing, workers=a.workers,
    )
    _write_csv(
        a.out_csv,
        ("c", "trial", "seed", "iters_orig", "iters_pert", "wall_ms_orig", "wall_ms_pert"),
        report.rows,
    )
    _dump_json({
        "master_seed": a.seed,
        "timing": a.timing,
        "config": harness._plain({"synth": vars(cfg), "discovery": vars(disc), "trials": int(d.get("trials", 20))}),
        "points": report.medians(),
        "iteration_spread": report.iteration_spread,
    }, a.out_summary)


# ------------------------------------------------------------------- parser


def build_parser():
    p = _Parser(prog="privtd", description="Privacy-preserving truth discovery toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic observation table")
    g.add_argument("--n-objects", type=_positive(int), default=30, help="number of objects N (default 30)")
    g.add_argument("--n-users", type=_positive(int), default=150, help="number of users S (default 150)")
    g.add_argument("--lambda1", type=_positive(float), default=1.0, help="rate of the error-variance exponential")
    g.add_argument("--truth-low", type=float, default=0.0, help="lower end of the ground-truth range")
    g.add_argument("--truth-high", type=float, default=10.0, help="upper end of the ground-truth range")
    g.add_argument("--seed", type=int, required=True, help="random seed")
    g.add_argument("--out-table", required=True, help="observation CSV to write")
    g.add_argument("--out-truth", required=True, help="ground-truth CSV to write")
    g.add_argument("--out-sigma2", help="optional per-user error variance audit CSV")
    g.set_defaults(func=cmd_gen)

    pt = sub.add_parser("perturb", help="perturb a table with privately sampled Gaussian noise")
    pt.add_argument("--input", required=True, help="observation CSV to read")
    pt.add_argument("--lambda2", type=_positive(float), required=True, help="rate of the noise-variance exponential")
    pt.add_argument("--seed", type=int, required=True, help="random seed")
    pt.add_argument("--out", required=True, help="perturbed observation CSV to write")
    pt.add_argument("--out-variances", help="optional per-user noise variance audit CSV")
    pt.set_defaults(func=cmd_perturb)

    d = sub.add_parser("discover", help="aggregate a table by truth discovery or a baseline")
    d.add_argument("--input", required=True, help="observation CSV to read")
    d.add_argument("--method", choices=["crh", "uniform", "mean", "median"], default="crh",
                   help="weight update or baseline (default crh)")
    d.add_argument("--max-iterations", type=_positive(int), default=100, help="iteration cap (default 100)")
    d.add_argument("--threshold", type=_positive(float), default=1e-6,
                   help="stop when consecutive aggregates differ by less than this MAE (default 1e-6)")
    d.add_argument("--floor", type=_positive(float), default=1e-12, help="floor on per-user distances (default 1e-12)")
    d.add_argument("--standardize", action="store_true", help="scale distances by per-object variance")
    d.add_argument("--truth", help="optional ground-truth CSV; adds mae_vs_truth to the summary")
    d.add_argument("--out-aggregate", required=True, help="aggregate CSV to write (object,value)")
    d.add_argument("--out-weights", help="optional weight CSV to write (user,weight)")
    d.add_argument("--out-summary", default="-", help="run summary JSON (default stdout)")
    d.set_defaults(func=cmd_discover)

    b = sub.add_parser("bounds", help="evaluate the utility/privacy bounds on the noise level")
    b.add_argument("--lambda1", type=_positive(float), required=True, help="rate of the error-variance exponential")
    b.add_argument("--n-users", type=_positive(int), required=True, help="number of users S")
    b.add_argument("--alpha", type=_positive(float), required=True, help="utility tolerance alpha")
    b.add_argument("--beta", type=_nonneg_float, required=True, help="utility failure probability beta")
    b.add_argument("--epsilon", type=_positive(float), required=True, help="privacy epsilon")
    b.add_argument("--delta", type=_positive(float), required=True, help="privacy delta in (0, 1)")
    sens = b.add_mutually_exclusive_group()
    sens.add_argument("--b", type=_positive(float), default=2.0, help="Gaussian tail constant b (default 2)")
    sens.add_argument("--gamma", type=_positive(float), help="set gamma directly instead of b")
    b.add_argument("--eta", type=_positive(float), default=0.99, help="error-variance quantile eta (default 0.99)")
    b.add_argument("--out", default="-", help="JSON output path (default stdout)")
    b.set_defaults(func=cmd_bounds)

    for name, func, helptext in (
        ("sweep", cmd_sweep, "run a utility/privacy sweep from a JSON spec"),
        ("weights", cmd_weights, "compare true and estimated weights from a JSON spec"),
        ("bench", cmd_bench, "iteration/runtime benchmark across noise levels from a JSON spec"),
    ):
        h = sub.add_parser(name, help=helptext)
        h.add_argument("--spec", required=True, help="JSON job spec")
        h.add_argument("--seed", type=int, required=True, help="master seed")
        h.add_argument("--workers", type=_positive(int), default=None,
                       help="parallel worker processes (default $LDP_TD_WORKERS or 1)")
        h.add_argument("--timing", action="store_true",
                       help="record wall-clock times (makes output non-reproducible)")
        if name == "sweep":
            h.add_argument("--out-raw", required=True, help="raw per-trial CSV")
        else:
            h.add_argument("--out-csv", required=True, help="per-row CSV")
        h.add_argument("--out-summary", default="-", help="summary JSON (default stdout)")
        h.set_defaults(func=func)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if hasattr(args, "workers"):
        try:
            args.workers = harness.resolve_workers(args.workers)
        except ValueError as e:
            print(f"privtd: error: LDP_TD_WORKERS: {e}", file=sys.stderr)
            return 2
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"privtd {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
