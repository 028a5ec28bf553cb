"""Command-line front end: simulate, censor, fit, forecast, evaluate, report."""
from __future__ import annotations

import argparse
import csv
import json
import pathlib
import sys
import time

import numpy as np

from . import __version__
from .exogenous import (Augmented, Dassios, SinePlus, exogenous_from_dict, exogenous_to_dict,
                        lhpp_from_counts, read_immigrant_counts)
from .fit import FitConfig, LossSpec, check_combination, fit_groups, summarize
from .forecast_eval import (ForecastReport, fit_hip_forecaster, fit_mbpp_forecaster, forecast,
                            hip_forecast, synthetic_item)
from .kernels import ExponentialKernel, kernel_from_dict
from .mbpp_approx import Grid, approx_compensator
from .mbpp_closed import MbppModel, closed_compensator
from .simulate import (CensoredSeries, ScenarioData, censor, make_scenario, read_censored,
                       read_events, simulate_batch, write_censored, write_events, write_sidecar)

DEFAULTS = {
    "kernel": {"type": "exponential", "kappa": 0.6, "theta": 0.8},
    "exogenous": {"type": "sine_plus", "alpha": 2.0},
    "T": 30.0,
    "sequences": 200,
    "group_size": 20,
    "scenario": "A",
    "model": "mbpp-closed",
    "loss": None,
    "endogenous": False,
    "intervals": 15,
    "exogenous_intervals": None,
    "grid_points": None,
    "restarts": 10,
    "seed": 0,
    "label": None,
    "items": 20,
    "observe_days": 90,
    "horizon": 30,
    "sweep_D": "10,20,...,640",
    "dassios": {"u0": 3.0, "kappa": 0.6, "theta": 0.8},
}


class ConfigError(ValueError):
    pass


def _parse_sweep(text: str) -> list[int]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if "..." not in parts:
        return [int(p) for p in parts]
    i = parts.index("...")
    if i < 2 or i != len(parts) - 2:
        raise ConfigError("--sweep-D with '...' needs the form a,b,...,z")
    a, b, z = int(parts[i - 2]), int(parts[i - 1]), int(parts[-1])
    head = [int(p) for p in parts[: i - 2]]
    if b % a == 0 and b // a > 1:
        ratio, out, v = b // a, [], a
        while v <= z:
            out.append(v)
            v *= ratio
    else:
        out = list(range(a, z + 1, b - a))
    if out[-1] != z:
        raise ConfigError(f"sweep {text!r} does not reach {z} with a fixed step or ratio")
    return head + out


def load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(user) - set(DEFAULTS) - {"input", "out", "truth", "bounds"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(user)
    for key, val in vars(args).items():
        if key in ("command", "config", "func") or val is None:
            continue
        if key == "endogenous" and val is False:
            continue
        cfg[key] = val
    if "out" not in cfg or cfg["out"] is None:
        cfg["out"] = "out"
    if cfg.get("loss") is None:
        event_times = str(cfg["scenario"]).upper() in "ABC" and args.command != "forecast"
        cfg["loss"] = "ppll" if event_times else "icll"
    cfg["scenario"] = str(cfg["scenario"]).upper()
    return cfg


def _kernel(cfg):
    try:
        return kernel_from_dict(cfg["kernel"])
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from None


def _exogenous(cfg):
    try:
        return exogenous_from_dict(cfg["exogenous"])
    except ValueError as exc:
        raise ConfigError(f"exogenous: {exc}") from None


def _out(cfg) -> pathlib.Path:
    out = pathlib.Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _boundaries(T, n):
    if int(n) < 1:
        raise ConfigError("--intervals must be >= 1")
    return np.linspace(0.0, float(T), int(n) + 1)


def _sidecar(out, name, cfg, **extra):
    write_sidecar(out / f"{name}.json", _public(cfg), cfg.get("seed"), **extra)


def _public(cfg):
    return {k: v for k, v in cfg.items() if k not in ("func",)}


def cmd_simulate(cfg):
    out = _out(cfg)
    if cfg.get("forecast_items"):
        return _simulate_items(cfg, out)
    k, s = _kernel(cfg), _exogenous(cfg)
    if isinstance(s, Augmented):
        raise ConfigError("augmented exogenous is for forecast items: use simulate --forecast-items")
    seqs = simulate_batch(k, s, float(cfg["T"]), int(cfg["sequences"]), int(cfg["seed"]))
    events_dir = out / "events"
    events_dir.mkdir(exist_ok=True)
    for i, e in enumerate(seqs):
        write_events(events_dir / f"seq_{i:05d}.csv", e)
    _sidecar(out, "simulate", cfg, files=len(seqs), rng="Philox")
    return 0


def _simulate_items(cfg, out):
    n_days = int(cfg["observe_days"]) + int(cfg["horizon"])
    items_dir = out / "items"
    items_dir.mkdir(exist_ok=True)
    seeds = np.random.SeedSequence(int(cfg["seed"])).spawn(int(cfg["items"]))
    truth = []
    for i, ss in enumerate(seeds):
        it = synthetic_item(f"item{i:04d}", ss, n_days)
        days = it.views.boundaries
        write_censored(items_dir / f"{it.name}_views.csv", it.views)
        write_censored(items_dir / f"{it.name}_tweets.csv", CensoredSeries(days, it.tweets))
        truth.append({"item": it.name, **it.kernel.to_dict(), "gamma": it.exogenous.gamma,
                      "nu": it.exogenous.nu, "mu": it.exogenous.mu})
    with open(out / "items_truth.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(truth[0]))
        w.writeheader()
        w.writerows(truth)
    _sidecar(out, "simulate", cfg, items=len(truth), rng="Philox")
    return 0


def _inputs(cfg, pattern="*.csv"):
    src = cfg.get("input")
    if not src:
        raise ConfigError("--input is required")
    path = pathlib.Path(src)
    if path.is_dir():
        files = sorted(path.glob(pattern))
    elif path.exists():
        files = [path]
    else:
        raise ConfigError(f"input {src} does not exist")
    if not files:
        raise ConfigError(f"no CSV files under {src}")
    return files


def cmd_censor(cfg):
    out = _out(cfg)
    counts_dir = out / "counts"
    counts_dir.mkdir(exist_ok=True)
    T = float(cfg["T"])
    O = _boundaries(T, cfg["intervals"])
    files = _inputs(cfg)
    for f in files:
        c = censor(read_events(f, T), O, cfg.get("label"))
        write_censored(counts_dir / f.name, c)
    _sidecar(out, "censor", cfg, files=len(files))
    return 0


def _is_counts_file(path) -> bool:
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), [])
    return header[:3] == ["start", "end", "count"]


def _scenario_data(cfg) -> list[ScenarioData]:
    T = float(cfg["T"])
    scen = cfg["scenario"]
    O = _boundaries(T, cfg["intervals"])
    Q = _boundaries(T, cfg["exogenous_intervals"]) if cfg.get("exogenous_intervals") else O
    known = _exogenous(cfg) if scen in "AD" else None
    data = []
    for f in _inputs(cfg):
        if _is_counts_file(f):
            if scen != "D":
                raise ConfigError(f"{f.name} holds counts; only scenario D can be fit from counts "
                                  "alone, other scenarios need the labeled events")
            c = read_censored(f)
            data.append(ScenarioData("D", c.T, known, counts=c, total_counts=c))
        else:
            data.append(make_scenario(read_events(f, T), scen, O, Q, known))
    return data


def _fit_config(cfg) -> FitConfig:
    bounds = dict(FitConfig().bounds)
    for name, pair in (cfg.get("bounds") or {}).items():
        bounds[name] = tuple(pair)
    kernel_type = cfg["kernel"].get("type", "exponential") if isinstance(cfg["kernel"], dict) else "exponential"
    return FitConfig(bounds=bounds, restarts=int(cfg["restarts"]), seed=int(cfg["seed"]),
                     grid_points=cfg.get("grid_points"), group_size=int(cfg["group_size"]),
                     kernel=kernel_type)


def cmd_fit(cfg):
    loss = LossSpec(cfg["loss"], bool(cfg["endogenous"]))
    check_combination(cfg["scenario"], cfg["model"], loss)
    out = _out(cfg)
    data = _scenario_data(cfg)
    fc = _fit_config(cfg)
    t0 = time.perf_counter()
    results = fit_groups(data, cfg["model"], loss, fc)
    with open(out / "fit_results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group", "kappa", "theta", "loss", "converged"])
        for g, r in enumerate(results):
            w.writerow([g, repr(r.params["kappa"]), repr(r.params["theta"]), repr(r.loss),
                        int(r.converged)])
    with open(out / "fit_results.json", "w") as fh:
        json.dump([r.to_dict() for r in results], fh, indent=2)
    _sidecar(out, "fit", cfg, summary=summarize(results), seconds=time.perf_counter() - t0)
    return 0


def _load_items(cfg):
    files = _inputs(cfg, "*_views.csv")
    items = []
    for f in files:
        name = f.name[: -len("_views.csv")]
        tweets = f.with_name(f"{name}_tweets.csv")
        if not tweets.exists():
            raise ConfigError(f"missing future exogenous counts {tweets.name} for item {name}")
        items.append((name, read_censored(f), read_immigrant_counts(tweets)))
    return items


def cmd_forecast(cfg):
    out = _out(cfg)
    n_obs, horizon = int(cfg["observe_days"]), int(cfg["horizon"])
    fc = FitConfig(restarts=int(cfg["restarts"]), seed=int(cfg["seed"]))
    if cfg["loss"] not in ("icll", "hip"):
        raise ConfigError("forecast uses --loss icll (closed-form MBPP) or --loss hip (baseline)")
    rows = []
    for name, views, tweets in _load_items(cfg):
        if views.T < n_obs:
            raise ConfigError(f"{name}: only {views.T:g} observed days, need {n_obs}")
        obs = CensoredSeries(views.boundaries[: n_obs + 1], views.counts[:n_obs])
        if cfg["loss"] == "icll":
            k, e, _ = fit_mbpp_forecaster(obs, tweets, fc)
            pred = forecast(k, e, obs, horizon)
        else:
            k, e, _ = fit_hip_forecaster(obs, tweets, fc)
            pred = hip_forecast(k, e, n_obs, horizon)
        rows += [(name, n_obs + d + 1, p) for d, p in enumerate(pred)]
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item", "day", "predicted"])
        w.writerows([(n, d, repr(float(p))) for n, d, p in rows])
    _sidecar(out, "forecast", cfg)
    return 0


def cmd_evaluate(cfg):
    out = _out(cfg)
    pred_path = pathlib.Path(cfg.get("input") or "")
    truth_dir = pathlib.Path(cfg.get("truth") or "")
    if not pred_path.is_file() or not truth_dir.is_dir():
        raise ConfigError("evaluate needs --input predictions.csv and --truth ITEMS_DIR")
    preds: dict[str, dict[int, float]] = {}
    with open(pred_path, newline="") as fh:
        for r in csv.DictReader(fh):
            preds.setdefault(r["item"], {})[int(r["day"])] = float(r["predicted"])
    names, p_all, a_all = [], [], []
    for name, days in preds.items():
        truth = read_censored(truth_dir / f"{name}_views.csv")
        idx = sorted(days)
        names.append(name)
        p_all.append(np.array([days[d] for d in idx]))
        a_all.append(truth.counts[np.array(idx) - 1])
    rep = ForecastReport(names, p_all, a_all)
    rep.write(out / "report.csv")
    rep.write_daily(out / "report_daily.csv")
    _sidecar(out, "evaluate", cfg, summary=rep.summary())
    return 0


def sweep_rows(dassios: dict, T: float, sizes, n_eval: int = 1000):
    """Lower/upper grid compensator error against the closed form, per grid size."""
    s = Dassios(dassios["u0"], dassios["kappa"], dassios["theta"])
    k = ExponentialKernel(dassios["kappa"], dassios["theta"])
    ts = np.linspace(0.0, T, n_eval + 1)[1:]
    exact = closed_compensator(MbppModel(k, s), ts)
    rows = []
    for D in sizes:
        g = Grid.equidistant(T, D)
        lo = approx_compensator(k, s, g, ts, "lower")
        hi = approx_compensator(k, s, g, ts, "upper")
        err = np.abs(lo - exact)
        rows.append({"D": D, "max_abs_error": float(err.max()),
                     "max_error_rel_to_total": float(err.max() / exact[-1]),
                     "rel_error_at_T": float(err[-1] / exact[-1]),
                     "max_pointwise_rel_error": float((err / exact).max()),
                     "rss": float(err @ err),
                     "lower_below_closed": bool(np.all(lo <= exact + 1e-8)),
                     "lower_below_upper": bool(np.all(lo <= hi))})
    return rows


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def scenario_table(cfg, loss_and_models=None):
    """Parameter recovery per scenario, aggregated over groups as mean and std."""
    k, s = _kernel(cfg), _exogenous(cfg)
    T = float(cfg["T"])
    O = _boundaries(T, cfg["intervals"])
    seqs = simulate_batch(k, s, T, int(cfg["sequences"]), int(cfg["seed"]))
    fc = _fit_config(cfg)
    combos = loss_and_models or [
        ("A", "hawkes", "ppll", False), ("A", "mbpp-closed", "ppll", False),
        ("B", "hawkes", "ppll", True), ("B", "mbpp-closed", "ppll", True),
        ("C", "hawkes", "ppll", True), ("C", "mbpp-closed", "ppll", True),
        ("C", "mbpp-closed", "ppll", False),
        ("D", "mbpp-closed", "icll", False), ("D", "mbpp-closed", "sse", False),
        ("E", "mbpp-closed", "icll", True), ("E", "mbpp-approx", "icll", True),
        ("F", "mbpp-closed", "icll", True), ("F", "mbpp-closed", "sse", True),
    ]
    rows = []
    for scen, model, loss_name, endo in combos:
        data = [make_scenario(e, scen, O, O, s if scen in "AD" else None) for e in seqs]
        res = fit_groups(data, model, LossSpec(loss_name, endo), fc)
        summ = summarize(res)
        rows.append({"scenario": scen, "model": model, "loss": loss_name, "endogenous": endo,
                     "kappa_true": k.kappa, "theta_true": k.theta,
                     "kappa_mean": summ["kappa"][0], "kappa_std": summ["kappa"][1],
                     "theta_mean": summ["theta"][0], "theta_std": summ["theta"][1],
                     "groups": len(res), "saturated_groups": sum(bool(r.saturated) for r in res)})
    return rows


def cmd_report(cfg):
    out = _out(cfg)
    produced = []
    if cfg.get("sweep_D"):
        rows = sweep_rows(cfg["dassios"], float(cfg["T"]), _parse_sweep(cfg["sweep_D"]))
        _write_rows(out / "compensator_error_vs_D.csv", rows)
        produced.append("compensator_error_vs_D.csv")
    if cfg.get("tables"):
        _write_rows(out / "scenario_recovery.csv", scenario_table(cfg))
        produced.append("scenario_recovery.csv")
    _sidecar(out, "report", cfg, files=produced)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; flags override its keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--scenario", choices=list("ABCDEF"))
    common.add_argument("--model", choices=["hawkes", "mbpp-closed", "mbpp-approx"])
    common.add_argument("--loss", choices=["ppll", "icll", "sse", "hip"])
    common.add_argument("--endogenous", action="store_true", default=None)
    common.add_argument("--intervals", type=int, metavar="N")
    common.add_argument("--grid-points", dest="grid_points", type=int, metavar="D")
    common.add_argument("--restarts", type=int, metavar="R")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--input", metavar="PATH")
    common.add_argument("--T", type=float, dest="T", help="observation window end")

    p = argparse.ArgumentParser(prog="mbpp", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", parents=[common], help="sample labeled sequences to CSV")
    sp.add_argument("--sequences", type=int)
    sp.add_argument("--forecast-items", dest="forecast_items", action="store_true", default=None,
                    help="write synthetic day-level forecasting items instead")
    sp.add_argument("--items", type=int)
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("censor", parents=[common], help="event CSVs to interval counts")
    sp.add_argument("--label", choices=["immigrant", "offspring"])
    sp.set_defaults(func=cmd_censor)
    sp = sub.add_parser("fit", parents=[common], help="fit groups of sequences")
    sp.add_argument("--group-size", dest="group_size", type=int)
    sp.set_defaults(func=cmd_fit)
    sp = sub.add_parser("forecast", parents=[common], help="fit observed days and predict the horizon")
    sp.add_argument("--observe-days", dest="observe_days", type=int)
    sp.add_argument("--horizon", type=int)
    sp.set_defaults(func=cmd_forecast)
    sp = sub.add_parser("evaluate", parents=[common], help="APE and sMAPE of predictions")
    sp.add_argument("--truth", metavar="ITEMS_DIR")
    sp.set_defaults(func=cmd_evaluate)
    sp = sub.add_parser("report", parents=[common], help="aggregate CSVs for tables and sweeps")
    sp.add_argument("--sweep-D", dest="sweep_D", metavar="LIST")
    sp.add_argument("--tables", action="store_true", default=None)
    sp.add_argument("--sequences", type=int)
    sp.add_argument("--group-size", dest="group_size", type=int)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        return args.func(cfg)
    except (ConfigError, ValueError, TypeError, OSError, RuntimeError) as exc:
        print(f"mbpp {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
