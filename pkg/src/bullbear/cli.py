"""Command-line pipeline: ingest, estimate, smooth, forecast, backtest, compare, sweep.

Options can also come from a JSON config file (``--config``); precedence is
command line > config file > built-in defaults. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import forecast as fc
from .garch import GarchError, rolling_garch
from .inference import (
    McmcConfig,
    McmcError,
    PosteriorSample,
    PriorSpec,
    gibbs_estimate,
    posterior_summary,
    smoothed_state_probs,
)
from .marketdata import DataError, ReturnSeries, build_weekly_series, load_daily_prices, summary_stats
from .models import SPECS, get_spec
from .regime import STATE_NAMES, ReducibleChainError, regime_mean

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("bullbear")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


DEFAULTS = {
    "date_col": "date",
    "price_col": "adjusted_close",
    "rf_date_col": "date",
    "rf_col": "yield",
    "anchor": "wednesday",
    "model": "ms4",
    "burn_in": 5000,
    "retained": 30000,
    "seed": 0,
    "thin": 1,
    "max_rejections": 1000,
    "warm_burn_in": 500,
    "horizon": 1,
    "jobs": 1,
    "benchmark": "GARCH11",
    "models": "ms4,ms4u,ms4t,ms2,garch11",
    "kind": "S",
    "tau_B": 0.5,
    "tau_S": 0.5,
    "tau_S_bull": 0.5,
    "grid": "0.30:0.95:0.05",
    "init_var": "unconditional",
    "outdir": ".",
}


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _opt(p, *flags, help, **kw):
    dest = kw.pop("dest", flags[-1].lstrip("-").replace("-", "_"))
    if dest in DEFAULTS:
        help = f"{help} (default: {DEFAULTS[dest]})"
    p.add_argument(*flags, dest=dest, default=None, help=help, **kw)


def _common(p):
    _opt(p, "--config", help="JSON file of option values", type=Path)
    _opt(p, "--outdir", help="directory for output artifacts", type=Path)
    _opt(p, "--seed", help="master random seed", type=int)
    _opt(p, "-v", "--verbose", help="log progress", action="store_true", dest="verbose")


def _mcmc(p):
    _opt(p, "--model", help=f"model variant: {', '.join(s for s in SPECS if s != 'garch11')}")
    _opt(p, "--burn-in", help="MCMC burn-in sweeps", type=int)
    _opt(p, "--retained", help="retained MCMC draws", type=int)
    _opt(p, "--thin", help="keep every n-th draw", type=int)
    _opt(p, "--max-rejections", help="consecutive restriction rejections tolerated per block", type=int)
    _opt(p, "--priors", help="JSON file overriding prior hyperparameters", type=Path)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bullbear", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="daily prices -> weekly returns CSV + summary statistics")
    _common(p)
    _opt(p, "--prices", help="daily price CSV", type=Path)
    _opt(p, "--date-col", help="date column in the price CSV")
    _opt(p, "--price-col", help="adjusted-close column in the price CSV")
    _opt(p, "--riskfree", help="daily risk-free yield CSV (percent per annum)", type=Path)
    _opt(p, "--rf-date-col", help="date column in the risk-free CSV")
    _opt(p, "--rf-col", help="yield column in the risk-free CSV")
    _opt(p, "--anchor", help="preferred weekday for weekly returns (next weekday is the fallback)",
         choices=["monday", "tuesday", "wednesday", "thursday", "friday"])
    _opt(p, "--out", help="weekly CSV path (default: OUTDIR/weekly.csv)", type=Path)

    p = sub.add_parser("estimate", help="Gibbs-sample the posterior and print a parameter table")
    _common(p)
    _mcmc(p)
    _opt(p, "--data", help="weekly CSV from ingest", type=Path)
    _opt(p, "--end", help="use data up to this date", type=_date)
    _opt(p, "--out", help="posterior file (default: OUTDIR/posterior-MODEL.npz)", type=Path)

    p = sub.add_parser("smooth", help="smoothed state and bull-regime probabilities from a posterior")
    _common(p)
    _opt(p, "--posterior", help="posterior file from estimate", type=Path)
    _opt(p, "--data", help="weekly CSV the posterior was fitted on", type=Path)
    _opt(p, "--out", help="output CSV (default: OUTDIR/smoothed.csv)", type=Path)

    p = sub.add_parser("forecast", help="h-step forecasts from a posterior, or a rolling one-week-ahead run")
    _common(p)
    _mcmc(p)
    _opt(p, "--data", help="weekly CSV", type=Path)
    _opt(p, "--posterior", help="posterior file; with it, emit h-step forecasts from the end of the data", type=Path)
    _opt(p, "--horizon", help="forecast horizon in weeks", type=int)
    _opt(p, "--start", help="first target week of the rolling window", type=_date)
    _opt(p, "--end", help="last target week of the rolling window", type=_date)
    _opt(p, "--cold-start", help="re-estimate every origin from scratch", action="store_true", dest="cold_start")
    _opt(p, "--warm-burn-in", help="burn-in for warm-started origins", type=int)
    _opt(p, "--jobs", help="parallel workers for cold-start origins", type=int)

    p = sub.add_parser("backtest", help="run strategies B, S and buy-and-hold on rolling forecasts")
    _common(p)
    _opt(p, "--forecasts", help="forecast CSV from a rolling forecast run", type=Path)
    _opt(p, "--data", help="weekly CSV with realized returns", type=Path)
    _opt(p, "--tau-B", help="threshold for strategy B", type=float, dest="tau_B")
    _opt(p, "--tau-S", help="threshold for strategy S", type=float, dest="tau_S")
    _opt(p, "--tau-S-bull", help="bull-state threshold for S-split", type=float, dest="tau_S_bull")

    p = sub.add_parser("compare", help="predictive-likelihood comparison and log Bayes factors")
    _common(p)
    _mcmc(p)
    _opt(p, "--data", help="weekly CSV", type=Path)
    _opt(p, "--start", help="first week of the evaluation window", type=_date)
    _opt(p, "--end", help="last week of the evaluation window", type=_date)
    _opt(p, "--models", help="comma-separated model list")
    _opt(p, "--traces", help="reuse existing trace CSVs instead of estimating", nargs="+", type=Path)
    _opt(p, "--benchmark", help="benchmark model label for Bayes factors")
    _opt(p, "--cold-start", help="re-estimate every origin from scratch", action="store_true", dest="cold_start")
    _opt(p, "--warm-burn-in", help="burn-in for warm-started origins", type=int)
    _opt(p, "--jobs", help="parallel workers for cold-start origins", type=int)
    _opt(p, "--init-var", help="GARCH variance initialization", choices=["unconditional", "first"])

    p = sub.add_parser("sweep", help="strategy returns as a function of the signal threshold")
    _common(p)
    _opt(p, "--forecasts", help="forecast CSV from a rolling forecast run", type=Path)
    _opt(p, "--data", help="weekly CSV with realized returns", type=Path)
    _opt(p, "--kind", help="S (common threshold), S-split (bull threshold only) or B", choices=["S", "S-split", "B"])
    _opt(p, "--grid", help="threshold grid as start:stop:step or a comma list")
    _opt(p, "--tau-S", help="fixed bear-rally threshold for S-split", type=float, dest="tau_S")
    return parser


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from the config file, then from DEFAULTS."""
    cfg = {}
    if getattr(args, "config", None) is not None:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        unknown = set(cfg) - set(vars(args))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    for key, value in vars(args).items():
        if value is None or value is False:
            if key in cfg:
                v = cfg[key]
                if key in ("start", "end") and isinstance(v, str):
                    v = dt.date.fromisoformat(v)
                elif key in ("prices", "riskfree", "data", "posterior", "forecasts", "out", "outdir", "priors"):
                    v = Path(v)
                setattr(args, key, v)
            elif key in DEFAULTS and value is None:
                setattr(args, key, DEFAULTS[key])
    if getattr(args, "outdir", None) is not None:
        Path(args.outdir).mkdir(parents=True, exist_ok=True)
    return args


def _need(args, *names):
    for n in names:
        if getattr(args, n, None) is None:
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _read_weekly(path) -> ReturnSeries:
    if not Path(path).is_file():
        raise DataError(f"missing input file: {path}")
    return ReturnSeries.from_csv(path)


def _mcmc_config(args, seed=None) -> McmcConfig:
    return McmcConfig(burn_in=args.burn_in, retained=args.retained, seed=args.seed if seed is None else seed,
                      max_rejections=args.max_rejections, thin=1)


def _priors(args, spec):
    if getattr(args, "priors", None) is None:
        return PriorSpec.default(spec)
    with open(args.priors) as fh:
        d = json.load(fh)
    base = PriorSpec.default(spec).to_dict()
    base.update(d)
    return PriorSpec.from_dict(base)


def _written(*paths):
    for p in paths:
        print(f"wrote {p}")


# --------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    _need(args, "prices")
    daily = load_daily_prices(args.prices, args.date_col, args.price_col)
    rf = None
    if args.riskfree is not None:
        rf = load_daily_prices(args.riskfree, args.rf_date_col, args.rf_col, require_positive=False)
    series = build_weekly_series(daily, rf, anchor=args.anchor)
    out = args.out or Path(args.outdir) / "weekly.csv"
    series.to_csv(out)
    stats = summary_stats(series)
    print(f"daily rows: {len(daily)} (dropped {daily.dropped}, duplicates {daily.duplicates})")
    print("Weekly Return Statistics")
    print(f"{'N':>8} {'Mean':>8} {'Mean(RV^.5)':>12} {'Skewness':>9} {'Ex.Kurt':>8}")
    print(f"{stats.count:>8d} {stats.mean:>8.3f} {stats.mean_rv_sqrt:>12.3f} {stats.skewness:>9.3f} {stats.excess_kurtosis:>8.3f}")
    _written(out)
    return EXIT_OK


def format_report(sample: PosteriorSample) -> str:
    s = posterior_summary(sample)
    K = sample.K
    names = STATE_NAMES.get(K, tuple(f"state {i + 1}" for i in range(K)))
    lines = [f"Posterior Estimates ({sample.spec.label or sample.spec.name}, {sample.n_draws} draws, seed {sample.seed})",
             f"{'':24s} {'mean':>8s}   95% DI"]
    for key, sym in (("mu", "mu"), ("sigma", "sigma"), ("sharpe", "mu/sigma"), ("nu", "nu")):
        for i, (m, lo, hi) in enumerate(s[key]):
            label = f"{names[i]} {sym}_{i + 1}" if key == "mu" else f"{sym}_{i + 1}"
            lines.append(f"{label:24s} {m:8.3f}   ({lo:.3f}, {hi:.3f})")
    lines.append("Transition matrix P (posterior mean)")
    for row in s["P"]:
        lines.append("  " + "  ".join(f"{x:6.3f}" for x in row))
    lines.append("Unconditional State Probabilities")
    for i, p in enumerate(s["pi"]):
        lines.append(f"  {names[i]:18s} pi_{i + 1} {p:6.3f}")
    if K in (2, 4):
        mu_bar = sample.mu.mean(axis=0)
        bull = s["pi"][K // 2:].sum()
        lines.append(f"Long-run bull regime probability {bull:.3f}")
        lines.append(f"Long-run regime means: bear {regime_mean(s['pi'], mu_bar, 'bear'):.3f}, "
                     f"bull {regime_mean(s['pi'], mu_bar, 'bull'):.3f}")
    return "\n".join(lines) + "\n"


def cmd_estimate(args) -> int:
    _need(args, "data")
    series = _read_weekly(args.data)
    if args.end is not None:
        series = series[: series.index_of(args.end + dt.timedelta(days=1))]
    spec = get_spec(args.model)
    if spec.K == 0:
        raise UsageError("estimate runs Markov-switching models; GARCH is fitted inside compare")
    sample = gibbs_estimate(series, spec, _priors(args, spec), _mcmc_config(args))
    out = args.out or Path(args.outdir) / f"posterior-{spec.name}.npz"
    sample.save(out, thin=args.thin)
    report = format_report(sample)
    print(report, end="")
    rep = Path(out).with_suffix(".txt")
    rep.write_text(report)
    _written(out, rep)
    return EXIT_OK


def cmd_smooth(args) -> int:
    _need(args, "posterior", "data")
    if not Path(args.posterior).is_file():
        raise DataError(f"missing upstream artifact: posterior file {args.posterior}")
    sample = PosteriorSample.load(args.posterior)
    series = _read_weekly(args.data)
    if series.fingerprint() != sample.data_hash:
        series = series[: sample.T]
        if series.fingerprint() != sample.data_hash:
            raise DataError("weekly data do not match the series the posterior was fitted on")
    probs, bull = smoothed_state_probs(sample)
    out = args.out or Path(args.outdir) / "smoothed.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + [f"p{k + 1}" for k in range(sample.K)] + ["bull_prob"])
        for d, row, b in zip(series.dates, probs, bull):
            w.writerow([d.isoformat()] + [repr(float(x)) for x in row] + [repr(float(b))])
    _written(out)
    return EXIT_OK


def cmd_forecast(args) -> int:
    if args.posterior is not None:
        if not Path(args.posterior).is_file():
            raise DataError(f"missing upstream artifact: posterior file {args.posterior}")
        sample = PosteriorSample.load(args.posterior)
        bundle = fc.horizon_forecast(sample, args.horizon)
        out = Path(args.outdir) / f"horizon-{sample.spec.name}.csv"
        fc.write_horizon_csv(out, bundle)
        one = fc.predictive_density(sample)
        b1 = Path(args.outdir) / f"onestep-{sample.spec.name}.csv"
        fc.write_bundles_csv(b1, [one])
        _written(out, b1)
        return EXIT_OK
    _need(args, "data", "start", "end")
    series = _read_weekly(args.data)
    spec = get_spec(args.model)
    res = fc.rolling_forecast(series, spec, args.start, args.end, _mcmc_config(args), _priors(args, spec),
                              warm_start=not args.cold_start, warm_burn_in=args.warm_burn_in, jobs=args.jobs)
    outdir = Path(args.outdir)
    paths = (outdir / f"forecasts-{spec.name}.csv", outdir / f"density-{spec.name}.csv",
             outdir / f"trace-{spec.name}.csv")
    fc.write_bundles_csv(paths[0], res.bundles)
    fc.write_density_csv(paths[1], res.bundles)
    res.trace.to_csv(paths[2])
    for d, msg in res.failures:
        print(f"warning: origin {d} skipped: {msg}", file=sys.stderr)
    print(f"{spec.label}: cumulative log predictive likelihood {res.trace.total:.2f} over {len(res.trace.values)} weeks")
    _written(*paths)
    return EXIT_OK


def _load_forecasts(args):
    _need(args, "forecasts", "data")
    if not Path(args.forecasts).is_file():
        raise DataError(f"missing upstream artifact: forecast file {args.forecasts}")
    bundles = fc.read_bundles_csv(args.forecasts)
    series = _read_weekly(args.data)
    realized = series.between(bundles[0].target_date, bundles[-1].target_date)
    return bundles, realized


def cmd_backtest(args) -> int:
    bundles, realized = _load_forecasts(args)
    probs = bt.align_forecasts(bundles, realized)
    configs = [bt.StrategyConfig("B", tau_B=args.tau_B), bt.StrategyConfig("S", tau_S=args.tau_S),
               bt.StrategyConfig("buy-and-hold")]
    if probs.shape[1] == 4:
        configs.insert(2, bt.StrategyConfig("S-split", tau_S=args.tau_S, tau_S_bull=args.tau_S_bull))
    else:
        configs = [c for c in configs if c.kind != "S"]
    results = [bt.run_strategy(probs, realized, c) for c in configs]
    outdir = Path(args.outdir)
    written = []
    for r in results:
        p = outdir / f"positions-{r.config.kind}.csv"
        bt.write_positions_csv(p, r, probs)
        written.append(p)
    summary = outdir / "backtest-summary.csv"
    bt.write_summary_csv(summary, results)
    print(f"{'strategy':36s} {'return':>8s} {'sharpe':>8s}")
    for r in results:
        print(f"{r.config.label:36s} {r.annualized_return:8.3f} {r.annualized_sharpe:8.3f}")
    _written(*written, summary)
    return EXIT_OK


def cmd_compare(args) -> int:
    traces = []
    if args.traces:
        for p in args.traces:
            if not Path(p).is_file():
                raise DataError(f"missing upstream artifact: trace file {p}")
            traces.append(fc.PredictiveLikelihoodTrace.from_csv(p))
    else:
        _need(args, "data", "start", "end")
        series = _read_weekly(args.data)
        outdir = Path(args.outdir)
        for k, name in enumerate(m.strip() for m in args.models.split(",")):
            spec = get_spec(name)
            if spec.K == 0:
                trace = rolling_garch(series, args.start, args.end, seed=args.seed, init_var=args.init_var).trace
            else:
                res = fc.rolling_forecast(series, spec, args.start, args.end, _mcmc_config(args, args.seed + k),
                                          _priors(args, spec), warm_start=not args.cold_start,
                                          warm_burn_in=args.warm_burn_in, jobs=args.jobs)
                trace = res.trace
            path = outdir / f"trace-{spec.name}.csv"
            trace.to_csv(path)
            traces.append(trace)
            _written(path)
    bf = fc.bayes_factor_trace(traces, args.benchmark)
    outdir = Path(args.outdir)
    totals = outdir / "compare-totals.csv"
    with open(totals, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "log_predictive_likelihood", f"log_bf_vs_{args.benchmark}", "strong_evidence"])
        for t in traces:
            w.writerow([t.label, repr(t.total), repr(bf.final[t.label]), bf.strong[t.label]])
    bfpath = outdir / "bayes-factors.csv"
    fc.write_bayes_factor_csv(bfpath, bf)
    print("Log-Predictive Likelihood")
    for t in sorted(traces, key=lambda t: -t.total):
        print(f"  {t.label:18s} {t.total:9.2f}   log BF vs {args.benchmark}: {bf.final[t.label]:7.2f}"
              + ("  (strong)" if bf.strong[t.label] else ""))
    _written(totals, bfpath)
    return EXIT_OK


def parse_grid(text: str) -> list:
    text = str(text)
    if ":" in text:
        a, b, s = (float(x) for x in text.split(":"))
        n = int(round((b - a) / s)) + 1
        return [round(a + k * s, 10) for k in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_sweep(args) -> int:
    bundles, realized = _load_forecasts(args)
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        raise UsageError(f"bad --grid {args.grid!r}: {exc}") from exc
    curve = bt.threshold_sweep(bundles, realized, args.kind, grid, tau_S=args.tau_S)
    out = Path(args.outdir) / f"sweep-{args.kind}.csv"
    bt.write_sweep_csv(out, curve, args.kind)
    for g, ret, sh in curve:
        print(f"  tau={g:5.3f}  return={ret:7.3f}  sharpe={sh:7.3f}")
    _written(out)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "estimate": cmd_estimate,
    "smooth": cmd_smooth,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = resolve(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bullbear {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"bullbear {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (McmcError, GarchError, ReducibleChainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"bullbear {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"bullbear {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
