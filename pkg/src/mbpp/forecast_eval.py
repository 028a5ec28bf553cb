"""Day-level popularity forecasting, the discrete-convolution baseline, APE and sMAPE."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .exogenous import Augmented, PiecewiseConstant
from .fit import FitConfig, multistart_minimize
from .kernels import ExponentialKernel, Kernel, PowerLawKernel
from .losses import hip_intensity, ic_ll, sse
from .mbpp_approx import conditioned_forecast_compensator
from .mbpp_closed import CRITICAL_BAND, MbppModel, interval_compensators
from .simulate import (CensoredSeries, EventSequence, censor, make_rng, sample_immigrants,
                       sample_offspring)

AUGMENTED_BOUNDS = {"gamma": (1e-4, 1e4), "nu": (1e-4, 1e4), "mu": (1e-4, 1e3)}


def _check_unit_days(series: CensoredSeries):
    if not np.allclose(np.diff(series.boundaries), 1.0, rtol=0, atol=1e-12):
        raise ValueError("forecasting works on unit (day) intervals")


def forecast(kernel: Kernel, exogenous: Augmented, observed: CensoredSeries, horizon: int) -> np.ndarray:
    """Expected counts for days t_obs+1 .. t_obs+horizon given the observed day counts."""
    _check_unit_days(observed)
    t_obs = observed.T
    end = t_obs + horizon
    if isinstance(exogenous, Augmented) and exogenous.base.boundaries[-1] < end:
        raise ValueError(f"future exogenous counts cover up to day {exogenous.base.boundaries[-1]:g}, "
                         f"the horizon needs day {end:g}")
    hb = t_obs + np.arange(horizon + 1, dtype=float)
    pred = conditioned_forecast_compensator(kernel, exogenous, observed.boundaries, observed.counts, hb)
    return np.maximum(pred, 0.0)


def hip_forecast(kernel: Kernel, exogenous: Augmented, n_obs: int, horizon: int) -> np.ndarray:
    """Baseline: continue the discrete convolution past the observed window.

    The recursion runs on its own fitted values throughout; observed counts
    only enter through the fitted parameters.
    """
    daily = exogenous.daily_values(n_obs + horizon)
    return np.maximum(hip_intensity(kernel, daily)[n_obs + 1:], 0.0)


def smape(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise ValueError("predicted and actual series must have the same length")
    den = np.abs(p) + np.abs(a)
    terms = np.where(den > 0, 2.0 * np.abs(p - a) / np.where(den > 0, den, 1.0), 0.0)
    return float(terms.mean())


def percentiles(values) -> np.ndarray:
    """Hazen percentile 100 * (r - 0.5) / n with average ranks r on ties."""
    v = np.asarray(values, dtype=float)
    return 100.0 * (rankdata(v, method="average") - 0.5) / v.size


def ape(predicted_totals, true_totals, item: int | None = None):
    """|percentile of the true total - percentile of the predicted total| per item.

    Each total is ranked within its own corpus, so only ranks matter.
    """
    p = np.asarray(predicted_totals, dtype=float)
    t = np.asarray(true_totals, dtype=float)
    if p.shape != t.shape:
        raise ValueError("one predicted total per true total")
    if t.size < 2:
        raise ValueError("percentiles need a corpus of at least two items")
    err = np.abs(percentiles(t) - percentiles(p))
    return err if item is None else float(err[item])


@dataclass
class ForecastReport:
    items: list
    predicted: list
    actual: list
    ape: np.ndarray = field(init=False)
    smape: np.ndarray = field(init=False)

    def __post_init__(self):
        pt = np.array([np.sum(p) for p in self.predicted])
        at = np.array([np.sum(a) for a in self.actual])
        self.totals_pred, self.totals_true = pt, at
        self.ape = ape(pt, at) if len(self.items) > 1 else np.full(len(self.items), np.nan)
        self.smape = np.array([smape(p, a) for p, a in zip(self.predicted, self.actual)])

    def summary(self) -> dict:
        return {"items": len(self.items), "mean_ape": float(np.nanmean(self.ape)),
                "median_ape": float(np.nanmedian(self.ape)),
                "mean_smape": float(self.smape.mean()), "median_smape": float(np.median(self.smape))}

    def write(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["item", "horizon_total_true", "horizon_total_pred", "ape", "smape"])
            for i, item in enumerate(self.items):
                w.writerow([item, repr(float(self.totals_true[i])), repr(float(self.totals_pred[i])),
                            repr(float(self.ape[i])), repr(float(self.smape[i]))])

    def write_daily(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["item", "day", "actual", "predicted"])
            for item, p, a in zip(self.items, self.predicted, self.actual):
                for d, (pv, av) in enumerate(zip(p, a), start=1):
                    w.writerow([item, d, repr(float(av)), repr(float(pv))])


def read_report(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"item": r["item"], **{k: float(v) for k, v in r.items() if k != "item"}}
                for r in csv.DictReader(fh)]


def _augmented(p, base):
    return Augmented(p["gamma"], p["nu"], p["mu"], base)


def fit_mbpp_forecaster(views: CensoredSeries, base: PiecewiseConstant, cfg: FitConfig | None = None):
    """Closed-form MBPP + IC-LL on the observed days; returns (kernel, exogenous, loss)."""
    cfg = cfg or FitConfig()
    _check_unit_days(views)
    names = ["kappa", "theta", "gamma", "nu", "mu"]
    bounds = [cfg.bounds.get(n, AUGMENTED_BOUNDS.get(n)) or cfg.bound(n) for n in names]

    def objective(p):
        if abs(p["kappa"] - 1.0) < CRITICAL_BAND:
            return np.inf
        m = MbppModel(ExponentialKernel(p["kappa"], p["theta"]), _augmented(p, base))
        return ic_ll(interval_compensators(m, views.boundaries), views.counts)

    p, loss, *_ = multistart_minimize(objective, names, bounds, cfg.restarts, cfg.seed,
                                      cfg.xatol, cfg.fatol, cfg.max_evals)
    return ExponentialKernel(p["kappa"], p["theta"]), _augmented(p, base), loss


def fit_hip_forecaster(views: CensoredSeries, base: PiecewiseConstant, cfg: FitConfig | None = None):
    """Power-law discrete convolution with squared error, the classic baseline."""
    cfg = cfg or FitConfig()
    _check_unit_days(views)
    names = ["kappa", "theta", "c", "gamma", "nu", "mu"]
    bounds = [cfg.bounds.get(n, AUGMENTED_BOUNDS.get(n)) or cfg.bound(n) for n in names]
    n_obs = views.counts.size

    def objective(p):
        k = PowerLawKernel(p["kappa"], p["theta"], p["c"])
        xi = hip_intensity(k, _augmented(p, base).daily_values(n_obs))
        return sse(views.counts, xi[1:])

    p, loss, *_ = multistart_minimize(objective, names, bounds, cfg.restarts, cfg.seed,
                                      cfg.xatol, cfg.fatol, cfg.max_evals)
    return PowerLawKernel(p["kappa"], p["theta"], p["c"]), _augmented(p, base), loss


def monte_carlo_continuation(kernel: Kernel, exogenous, history_parents, t_obs: float, t_end: float,
                             n: int, seed) -> np.ndarray:
    """Event counts in (t_obs, t_end] for ``n`` continuations of a known history.

    ``history_parents`` is every event that can still excite the future,
    including any hidden initial burst at t = 0. All continuations are
    advanced together, one generation at a time, tagged by continuation id.
    """
    hist = np.asarray(history_parents, dtype=float)
    rng = make_rng(seed)
    if exogenous.atoms()[0].size and np.any(exogenous.atoms()[0] > t_obs):
        raise ValueError("future exogenous atoms are not supported")
    # immigrants by inverting S on a fine grid; exact counts, positions to 1e-3
    tg = np.linspace(t_obs, t_end, int(np.ceil((t_end - t_obs) * 1000)) + 1)
    Sg = exogenous.integral(tg)
    n_imm = rng.poisson(Sg[-1] - Sg[0], n)
    times = np.interp(rng.uniform(Sg[0], Sg[-1], n_imm.sum()), Sg, tg)
    ids = np.repeat(np.arange(n), n_imm)
    keep = times > t_obs
    times, ids = times[keep], ids[keep]
    lo = kernel.integral(t_obs - hist)
    mass = np.maximum(kernel.integral(t_end - hist) - lo, 0.0)
    # superposition: one Poisson total per continuation, parents picked by mass
    total_mass = mass.sum()
    n_direct = rng.poisson(total_mass, n) if total_mass > 0 else np.zeros(n, dtype=int)
    par = rng.choice(hist.size, n_direct.sum(), p=mass / total_mass) if n_direct.sum() else \
        np.zeros(0, dtype=int)
    u = lo[par] + rng.uniform(0.0, 1.0, par.size) * mass[par]
    direct = hist[par] + kernel.inverse_integral(u)
    direct_ids = np.repeat(np.arange(n), n_direct)
    ok = (direct > t_obs) & (direct <= t_end)
    times = np.concatenate([times, direct[ok]])
    ids = np.concatenate([ids, direct_ids[ok]])
    totals = np.bincount(ids, minlength=n).astype(float)
    while times.size:
        m = kernel.integral(t_end - times)
        k = rng.poisson(m)
        kids = np.repeat(times, k) + kernel.inverse_integral(rng.uniform(0.0, 1.0, k.sum()) * np.repeat(m, k))
        kid_ids = np.repeat(ids, k)
        ok = kids <= t_end
        times, ids = kids[ok], kid_ids[ok]
        totals += np.bincount(ids, minlength=n)
    return totals


@dataclass
class SyntheticItem:
    name: str
    kernel: ExponentialKernel
    exogenous: Augmented
    events: EventSequence
    history_parents: np.ndarray
    views: CensoredSeries
    tweets: np.ndarray

    def observed(self, n_obs: int) -> CensoredSeries:
        return CensoredSeries(self.views.boundaries[: n_obs + 1], self.views.counts[:n_obs])


def synthetic_item(name: str, seed, n_days: int = 120) -> SyntheticItem:
    """A video-like item: decaying tweet counts drive views through a Hawkes cascade.

    Views per tweet are drawn large enough that daily counts sit in the
    hundreds, where model error rather than Poisson noise dominates sMAPE.
    """
    rng = make_rng(seed)
    days = np.arange(n_days)
    tweet_rate = rng.uniform(5, 40) * np.exp(-days / rng.uniform(5, 40)) + rng.uniform(0, 3)
    tweets = rng.poisson(tweet_rate).astype(float)
    base = PiecewiseConstant(np.arange(n_days + 1, dtype=float), tweets)
    kernel = ExponentialKernel(rng.uniform(0.2, 0.8), rng.uniform(0.3, 1.5))
    exo = Augmented(rng.uniform(0, 200), rng.uniform(1, 20), rng.uniform(5, 50), base)
    T = float(n_days)
    imm = sample_immigrants(exo, T, rng)
    burst = np.zeros(rng.poisson(exo.gamma))
    kids = sample_offspring(kernel, np.concatenate([burst, imm]), T, rng)
    kids = kids[kids > 0]
    events = EventSequence(np.concatenate([imm, kids]),
                           ["immigrant"] * imm.size + ["offspring"] * kids.size, T)
    views = censor(events, np.arange(n_days + 1, dtype=float))
    parents = np.concatenate([burst, events.times])
    return SyntheticItem(name, kernel, exo, events, parents, views, tweets)


def history_before(item: SyntheticItem, t_obs: float) -> np.ndarray:
    p = item.history_parents
    return p[p <= t_obs]

