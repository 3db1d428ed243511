"""``fishnet`` command line: simulate, campaign, fit, predict and compare.

Every subcommand that writes files also writes ``manifest.json`` next to
them; ``fishnet rerun <manifest>`` replays it into the same directory.

Exit codes: 0 success, 2 usage, 3 numeric failure, 4 partial campaign.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .ensemble import (
    EnsembleConfig,
    default_workers,
    empirical_cdf,
    estimate_gamma,
    replica_seed,
    run_ensemble,
)
from .order_stats import OrderStatBasis, weibull_scale
from .polya_aeppli import FitError, PolyaAeppli, fit_sample
from .solver import BudgetExhaustedError, DegenerateLoadError, SeparationError, run_simulation
from .strength import StrengthDistribution, sample_strengths
from .tail import (
    NoDefaultError,
    TailModel,
    failure_probability,
    gamma_linear,
    gamma_rational,
    strength_at_probability,
    table1_defaults,
)

log = logging.getLogger("fishnet")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
DEFAULT_SEED = EnsembleConfig.master_seed


class UsageError(Exception):
    pass


class PartialCampaign(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            grid = np.linspace(float(a), float(b), int(n))
        else:
            grid = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    if grid.size == 0:
        raise UsageError(f"empty grid {text!r}")
    return grid


def parse_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _f(v) -> str:
    return repr(float(v))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, config: dict, outputs) -> dict:
    resolved = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    return {
        "subcommand": args.command,
        "config": config,
        "args": resolved,
        "seed": getattr(args, "seed", None),
        "out": str(Path(args.out).resolve()),
        "version": __version__,
        "outputs": sorted(outputs),
    }


def _write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _config(args, kt_ratio=None) -> EnsembleConfig:
    return EnsembleConfig(
        rows=args.rows, gaps=args.gaps, kt_ratio=args.kt_ratio if kt_ratio is None else kt_ratio,
        J=args.jumps, replicas=getattr(args, "replicas", 1), master_seed=args.seed,
        termination=args.termination_fraction)


def _gamma(kind: str, N: int, coef: float | None):
    if kind == "default":
        return None
    if kind == "rational":
        return gamma_rational(N, 1.0 if coef is None else coef)
    return gamma_linear(1.0 / N if coef is None else coef)


# -- subcommands -----------------------------------------------------------

def cmd_simulate(args) -> int:
    """One replica: event log plus damage snapshots at four stages."""
    config = _config(args)
    topo = config.topology()
    s = sample_strengths(topo.n_links, replica_seed(args.seed, args.replica))
    rec = run_simulation(topo, s, args.kt_ratio, args.jumps, args.termination_fraction)
    out = _out_dir(args)
    rec.write_event_log(out / "events.csv")
    files = ["events.csv"]
    for label, snap in rec.snapshots(topo).items():
        name = f"snapshot_{label}.json"
        with open(out / name, "w") as fh:
            json.dump(snap, fh, indent=1)
        files.append(name)
    _write_manifest(out, _manifest(args, config.to_dict(), files))
    print(f"events={rec.n_events} status={rec.status} sigma_max={rec.sigma_max:.6g} N_c={rec.n_c}")
    return EXIT_OK


def cmd_campaign(args) -> int:
    config = _config(args)
    res = run_ensemble(config, workers=args.threads)
    out = _out_dir(args)
    manifest = _manifest(args, config.to_dict(), [])
    manifest.pop("outputs")
    res.write(out, manifest)
    s = res.summary()
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in s.items()))
    if res.failures:
        raise PartialCampaign(f"{len(res.failures)} replica(s) exhausted the event budget")
    return EXIT_OK


def _read_counts(path) -> np.ndarray:
    """N_c sample from a campaign ``sigma_max.csv`` (column ``N_c``) or a
    histogram with ``k,count`` columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path}: no data rows")
    cols = rows[0].keys()
    if "N_c" in cols:
        c = np.array([int(r["N_c"]) for r in rows])
        return c[c >= 0]
    if {"k", "count"} <= set(cols):
        k = np.array([int(r["k"]) for r in rows])
        n = np.array([int(r["count"]) for r in rows])
        return np.repeat(k, n)
    raise UsageError(f"{path}: need an 'N_c' column or 'k,count' columns")


def cmd_fit_nc(args) -> int:
    counts = _read_counts(args.input)
    dist = fit_sample(counts)
    mean, var = counts.mean(), counts.var(ddof=1)
    print(f"lambda={dist.lam:.10g} theta={dist.theta:.10g} clamped={dist.clamped} "
          f"mean={mean:.10g} variance={var:.10g} n={len(counts)}")
    out = _out_dir(args)
    kmax = int(counts.max())
    hist = np.bincount(counts, minlength=kmax + 1) / len(counts)
    pmf = dist.pmf_table(kmax)
    _write_csv(out / "nc_fit.csv", ["k", "empirical", "pmf"],
               [[k, _f(hist[k]), _f(pmf[k])] for k in range(kmax + 1)])
    config = {"input": str(Path(args.input).resolve()), "lambda": dist.lam,
              "theta": dist.theta, "clamped": dist.clamped,
              "sample_mean": float(mean), "sample_variance": float(var)}
    _write_manifest(out, _manifest(args, config, ["nc_fit.csv"]))
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        weights = PolyaAeppli(args.lam, args.theta)
        k0 = 1 if args.k0 is None else args.k0
        dk = 0 if args.dk is None else args.dk
        model = TailModel(OrderStatBasis(args.N), weights, k0, dk,
                          _gamma(args.gamma, args.N, args.gamma_coef))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    x = parse_grid(args.x_grid)
    if np.any(x <= 0):
        raise UsageError("x-grid must be positive")
    _, pf, wx, wy = model.weibull_curve(x)
    out = _out_dir(args)
    _write_csv(out / "predict.csv", ["x", "Pf", "weibull_x", "weibull_y"],
               [[_f(a), _f(b), _f(c), _f(d)] for a, b, c, d in zip(x, pf, wx, wy)])
    tail = strength_at_probability(1e-6, model)
    print(f"strength_at_1e-6={tail:.6g}")
    _write_manifest(out, _manifest(args, {"strength_at_1e-6": tail}, ["predict.csv"]))
    return EXIT_OK


def _tail_params(args, kt: float) -> tuple[int, int]:
    """User (k0, dk) where given, tabulated defaults for the rest."""
    if args.k0 is not None and args.dk is not None:
        return args.k0, args.dk
    try:
        k0, dk = table1_defaults(kt)
    except NoDefaultError as exc:
        raise UsageError(exc.args[0]) from None
    return (k0 if args.k0 is None else args.k0), (dk if args.dk is None else args.dk)


def _pipeline_one(args, kt: float, out: Path):
    k0, dk = _tail_params(args, kt)
    config = _config(args, kt)
    res = run_ensemble(config, workers=args.threads)
    ok = res.ok
    counts = res.n_c[ok]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dist = fit_sample(counts)
    for w in caught:
        log.warning("|Kt/K0|=%g: %s", kt, w.message)
    N = 2 * args.rows * args.gaps
    if args.gamma == "default":
        gamma, gamma_info = None, {"kind": "default"}
    else:
        est = estimate_gamma(res, N, args.gamma_replicas)
        if args.gamma == "rational":
            gamma = gamma_rational(N, est.rational_c)
            gamma_info = {"kind": "rational", "c": est.rational_c}
        else:
            gamma = gamma_linear(*est.linear)
            gamma_info = {"kind": "linear", "slope": est.linear[0], "intercept": est.linear[1]}
    model = TailModel(OrderStatBasis(N), dist, k0, dk, gamma)

    x, p, wx, wy = empirical_cdf(res.sigma_max[ok])
    pf = failure_probability(x, model)
    inside = (pf > 0) & (pf < 1)
    ay = np.full(len(x), np.nan)
    ay[inside] = weibull_scale(pf[inside], x[inside])[1]
    tag = f"kt{kt:g}"
    name = f"compare_{tag}.csv"
    _write_csv(out / name,
               ["x", "empirical_p", "analytic_p", "weibull_x", "empirical_weibull_y", "analytic_weibull_y"],
               [[_f(a), _f(b), _f(c), _f(d), _f(e), _f(g)] for a, b, c, d, e, g in zip(x, p, pf, wx, wy, ay)])
    files = [name]
    campaign = out / f"campaign_{tag}"
    res.write(campaign)
    files += [f"campaign_{tag}/{f}" for f in sorted(p.name for p in campaign.iterdir())]

    n = int(ok.sum())
    band = (p >= max(1e-3, 1.0 / n)) & (p <= 0.99) & inside
    gap = float(np.max(np.abs(ay[band] - wy[band]))) if band.any() else float("nan")
    targets = sorted({1e-6, 10.0 ** np.ceil(np.log10(1.0 / n)), 0.5})
    summary = {
        "kt_ratio": kt,
        "replicas": int(config.replicas),
        "failed": len(res.failures),
        "lambda": dist.lam,
        "theta": dist.theta,
        "clamped": dist.clamped,
        "k0": int(k0),
        "dk": int(dk),
        "gamma": gamma_info,
        "median_sigma_max": float(np.median(res.sigma_max[ok])),
        "nc_mean": float(counts.mean()),
        "nc_variance": float(counts.var(ddof=1)),
        "max_weibull_gap": gap,
        "strength_at": {f"{t:g}": strength_at_probability(t, model) for t in targets},
    }
    return summary, files, res


def cmd_pipeline(args) -> int:
    if args.replicas < 100:
        raise UsageError("pipeline needs --replicas >= 100 for the N_c fit")
    for kt in args.kt_ratio:
        _tail_params(args, kt)
    out = _out_dir(args)
    summaries, files, partial = [], [], 0
    for kt in args.kt_ratio:
        s, f, res = _pipeline_one(args, kt, out)
        summaries.append(s)
        files += f
        partial += len(res.failures)
    report = {"settings": summaries}
    if len(summaries) >= 2:
        a, b = summaries[0], summaries[-1]
        report["median_ratio"] = a["median_sigma_max"] / b["median_sigma_max"]
        report["tail_ratio_1e-6"] = a["strength_at"]["1e-06"] / b["strength_at"]["1e-06"]
    with open(out / "summary.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    files.append("summary.json")
    config = {"rows": args.rows, "gaps": args.gaps, "kt_ratio": list(args.kt_ratio),
              "J": args.jumps, "replicas": args.replicas, "master_seed": args.seed,
              "termination": args.termination_fraction}
    _write_manifest(out, _manifest(args, config, files))
    for s in summaries:
        print(f"|Kt/K0|={s['kt_ratio']:g} lambda={s['lambda']:.6g} theta={s['theta']:.6g} "
              f"k0={s['k0']} dk={s['dk']} median={s['median_sigma_max']:.6g} "
              f"P(1e-6)={s['strength_at']['1e-06']:.6g} gap={s['max_weibull_gap']:.3g}")
    if "median_ratio" in report:
        print(f"median_ratio={report['median_ratio']:.6g} tail_ratio_1e-6={report['tail_ratio_1e-6']:.6g}")
    if partial:
        raise PartialCampaign(f"{partial} replica(s) exhausted the event budget")
    return EXIT_OK


def cmd_p1_table(args) -> int:
    if args.step <= 0 or args.xmax < args.xmin or args.xmin < 0:
        raise UsageError("need 0 <= xmin <= xmax and step > 0")
    n = int(np.floor((args.xmax - args.xmin) / args.step + 1e-9)) + 1
    x = args.xmin + args.step * np.arange(n)
    p = StrengthDistribution().cdf(x)
    out = _out_dir(args)
    _write_csv(out / "p1.csv", ["x", "P1(x)"], [[_f(a), _f(b)] for a, b in zip(x, p)])
    _write_manifest(out, _manifest(args, {}, ["p1.csv"]))
    return EXIT_OK


def cmd_order_stats(args) -> int:
    basis = OrderStatBasis(args.N)
    ks = parse_ints(args.k_list)
    x = parse_grid(args.x_grid)
    if any(not 0 <= k < args.N for k in ks):
        raise UsageError(f"orders must lie in [0, {args.N - 1}]")
    if np.any(x < 0):
        raise UsageError("x-grid must be non-negative")
    cols = [basis.wk(x, k) for k in ks]
    out = _out_dir(args)
    _write_csv(out / "order_stats.csv", ["x"] + [f"W_{k}" for k in ks],
               [[_f(x[i])] + [_f(c[i]) for c in cols] for i in range(len(x))])
    _write_manifest(out, _manifest(args, {}, ["order_stats.csv"]))
    return EXIT_OK


def cmd_rerun(args) -> int:
    """Replay a manifest, optionally into another directory."""
    with open(args.manifest) as fh:
        saved = dict(json.load(fh)["args"])
    if saved.get("command") not in _COMMANDS or saved["command"] == "rerun":
        raise UsageError(f"{args.manifest}: not a replayable manifest")
    if args.out is not None:
        saved["out"] = args.out
    ns = argparse.Namespace(**saved)
    return _COMMANDS[saved["command"]](ns)


_COMMANDS = {
    "simulate": cmd_simulate,
    "campaign": cmd_campaign,
    "fit-nc": cmd_fit_nc,
    "predict": cmd_predict,
    "pipeline": cmd_pipeline,
    "p1-table": cmd_p1_table,
    "order-stats": cmd_order_stats,
    "rerun": cmd_rerun,
}


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fishnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    net = argparse.ArgumentParser(add_help=False)
    net.add_argument("--rows", type=_positive_int, default=16)
    net.add_argument("--gaps", type=_positive_int, default=16)
    net.add_argument("--jumps", type=_positive_int, default=20)
    net.add_argument("--seed", type=int, default=DEFAULT_SEED)
    net.add_argument("--termination-fraction", type=float, default=0.05)

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--out", default=".")

    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=_positive_int, default=None,
                         help="worker threads (default: $FISHNET_THREADS or CPU count)")

    tail = argparse.ArgumentParser(add_help=False)
    tail.add_argument("--k0", type=int, default=None)
    tail.add_argument("--dk", type=int, default=None)

    s = sub.add_parser("simulate", parents=[net, out], help="one replica with event log and snapshots")
    s.add_argument("--kt-ratio", type=float, default=0.1)
    s.add_argument("--replica", type=int, default=0, help="replica index within the seed's stream")

    s = sub.add_parser("campaign", parents=[net, out, threads], help="Monte Carlo ensemble")
    s.add_argument("--kt-ratio", type=float, default=0.1)
    s.add_argument("--replicas", type=_positive_int, default=1000)

    s = sub.add_parser("fit-nc", parents=[out], help="fit the damage-count law to an N_c sample")
    s.add_argument("--input", required=True)

    s = sub.add_parser("predict", parents=[out, tail], help="analytic failure probability on a grid")
    s.add_argument("--N", type=_positive_int, default=512)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--gamma", choices=["default", "rational", "linear"], default="default")
    s.add_argument("--gamma-coef", type=float, default=None,
                   help="c of N/(N - c k) or slope of 1 + slope k")
    s.add_argument("--x-grid", default="3:12:181")

    s = sub.add_parser("pipeline", parents=[net, out, threads, tail],
                       help="ensemble, fit and analytic comparison for one or more slopes")
    s.add_argument("--kt-ratio", type=float, nargs="+", default=[0.1, 0.5])
    s.add_argument("--replicas", type=_positive_int, default=1000)
    s.add_argument("--gamma", choices=["default", "rational", "linear"], default="default")
    s.add_argument("--gamma-replicas", type=_positive_int, default=32)

    s = sub.add_parser("p1-table", parents=[out], help="tabulate the link strength CDF")
    s.add_argument("--xmin", type=float, default=0.0)
    s.add_argument("--xmax", type=float, default=14.0)
    s.add_argument("--step", type=float, default=0.1)

    s = sub.add_parser("order-stats", parents=[out], help="order-statistic CDFs on a grid")
    s.add_argument("--N", type=_positive_int, default=512)
    s.add_argument("--k-list", default="0,1,5,20")
    s.add_argument("--x-grid", default="3:12:181")

    s = sub.add_parser("rerun", help="replay a manifest.json")
    s.add_argument("manifest")
    s.add_argument("--out", default=None, help="write into this directory instead")

    for name, parser in sub.choices.items():
        parser.set_defaults(func=_COMMANDS[name])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("simulate", "campaign", "pipeline"):
            if args.termination_fraction <= 0 or args.termination_fraction >= 1:
                raise UsageError("--termination-fraction must lie in (0, 1)")
            if args.rows < 2 or args.gaps < 2:
                raise UsageError("--rows and --gaps must be >= 2")
            kts = args.kt_ratio if isinstance(args.kt_ratio, list) else [args.kt_ratio]
            if any(k == 0 or not np.isfinite(k) for k in kts):
                raise UsageError("--kt-ratio must be finite and nonzero")
        if getattr(args, "threads", None) is None and hasattr(args, "threads"):
            args.threads = default_workers()
        return args.func(args)
    except (UsageError, FitError, NoDefaultError, FileNotFoundError) as exc:
        print(f"fishnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PartialCampaign as exc:
        print(f"fishnet: partial campaign: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (SeparationError, DegenerateLoadError, BudgetExhaustedError,
            FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"fishnet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
