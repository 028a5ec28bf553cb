"""Bounded multi-restart Nelder-Mead fitting for every (scenario, model, loss) cell."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .kernels import ExponentialKernel, PowerLawKernel
from .losses import (EndogenousPart, HawkesModel, bregman, hip_loss, ic_ll, pp_ll)
from .mbpp_approx import ApproxMbpp, default_grid
from .mbpp_closed import CRITICAL_BAND, MbppModel, interval_compensators
from .simulate import SEPARABLE, ScenarioData, make_rng

MODELS = ("hawkes", "mbpp-closed", "mbpp-approx")
LOSSES = ("ppll", "icll", "sse", "hip")
PENALTY = 1e300
DEFAULT_BOUNDS = {"kappa": (1e-4, 10.0), "theta": (1e-4, 10.0), "c": (1e-4, 10.0)}
EVENT_TIME_GRID = 300


@dataclass(frozen=True)
class LossSpec:
    family: str
    endogenous: bool = False

    def __post_init__(self):
        if self.family not in LOSSES:
            raise ValueError(f"loss must be one of {', '.join(LOSSES)}, got {self.family!r}")


@dataclass
class FitConfig:
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    restarts: int = 10
    xatol: float = 1e-6
    fatol: float = 1e-9
    max_evals: int | None = None
    seed: int = 0
    grid_points: int | None = None
    group_size: int = 20
    kernel: str = "exponential"
    approx_cells: str = "recursion"

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        for name, (lo, hi) in self.bounds.items():
            if not (0 < lo < hi and np.isfinite(hi)):
                raise ValueError(f"bounds for {name} must be finite, positive and ordered")
        if self.kernel not in ("exponential", "powerlaw"):
            raise ValueError("kernel must be 'exponential' or 'powerlaw'")
        if self.approx_cells not in ("recursion", "observed"):
            raise ValueError("approx_cells must be 'recursion' or 'observed'")

    def bound(self, name):
        return self.bounds.get(name, DEFAULT_BOUNDS.get(name))


@dataclass
class FitResult:
    params: dict
    loss: float
    restarts: int
    converged: bool
    scenario: str = ""
    loss_name: str = ""
    model: str = ""
    endogenous: bool = False
    saturated: list = field(default_factory=list)
    restart_losses: list = field(default_factory=list)
    n_sequences: int = 1
    seed: int = 0
    evaluations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(**d)


def check_combination(scenario: str, model: str, loss: LossSpec):
    scenario = scenario.upper()
    if model not in MODELS:
        raise ValueError(f"model must be one of {', '.join(MODELS)}, got {model!r}")
    event_times = scenario in "ABC"
    if model == "hawkes" and not event_times:
        raise ValueError(f"the Hawkes model needs offspring event times; scenario {scenario} "
                         "is interval-censored, use mbpp-closed or mbpp-approx")
    if event_times and loss.family != "ppll":
        raise ValueError(f"scenario {scenario} observes event times: use --loss ppll")
    if not event_times and loss.family == "ppll":
        raise ValueError(f"scenario {scenario} is interval-censored: use icll, sse or hip")
    if loss.family == "hip" and (scenario != "D" or loss.endogenous):
        raise ValueError("the discrete-convolution loss applies to scenario D only")
    if loss.endogenous and scenario not in SEPARABLE:
        raise ValueError(f"scenario {scenario} is not separable: drop --endogenous")


def param_names(cfg: FitConfig, extra=()) -> list[str]:
    names = ["kappa", "theta"] + (["c"] if cfg.kernel == "powerlaw" else [])
    return names + list(extra)


def make_kernel(cfg: FitConfig, p: dict):
    if cfg.kernel == "powerlaw":
        return PowerLawKernel(p["kappa"], p["theta"], p["c"])
    return ExponentialKernel(p["kappa"], p["theta"])


class _Box:
    """Log-space sigmoid map between unconstrained z and (lo, hi)."""

    def __init__(self, bounds):
        self.lo = np.log([b[0] for b in bounds])
        self.hi = np.log([b[1] for b in bounds])

    def to_params(self, z):
        return np.exp(self.lo + (self.hi - self.lo) * expit(z))

    def to_z(self, p):
        frac = (np.log(p) - self.lo) / (self.hi - self.lo)
        return logit(np.clip(frac, 1e-12, 1 - 1e-12))

    def fraction(self, p):
        return (np.log(p) - self.lo) / (self.hi - self.lo)


def multistart_minimize(objective, names, bounds, restarts=10, seed=0, xatol=1e-6, fatol=1e-9,
                        max_evals=None):
    """Best of ``restarts`` Nelder-Mead runs from log-uniform starting points.

    ``objective`` takes a dict of named parameters. Returns
    (best params dict, best loss, per-restart losses, converged, evaluations).
    """
    box = _Box(bounds)
    rng = make_rng(seed)
    starts = np.exp(rng.uniform(box.lo, box.hi, size=(restarts, len(names))))
    counter = [0]

    def f(z):
        counter[0] += 1
        p = dict(zip(names, box.to_params(z)))
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore")
            try:
                val = objective(p)
            except (ValueError, FloatingPointError, ZeroDivisionError):
                return PENALTY
        return val if np.isfinite(val) else PENALTY

    best = None
    losses = []
    n = len(names)
    for x0 in starts:
        z0 = box.to_z(x0)
        simplex = np.vstack([z0, z0 + 0.5 * np.eye(n)])
        res = minimize(f, z0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": xatol, "fatol": fatol,
                                "maxfev": max_evals or 400 * n, "maxiter": max_evals or 400 * n})
        losses.append(float(res.fun))
        # strict '<' keeps the earliest restart on ties
        if best is None or res.fun < best.fun:
            best = res
    params = dict(zip(names, box.to_params(best.x).tolist()))
    return params, float(best.fun), losses, bool(best.success and best.fun < PENALTY), counter[0]


def _saturated(names, bounds, params, tol=1e-3):
    box = _Box(bounds)
    frac = box.fraction(np.array([params[n] for n in names]))
    return [n for n, f in zip(names, frac) if f < tol or f > 1 - tol]


def _grid_for(d: ScenarioData, cfg: FitConfig):
    series = d.counts if d.counts is not None else d.total_counts
    n_int = series.counts.size if series is not None else 0
    return default_grid(d.T, n_int, cfg.grid_points or (EVENT_TIME_GRID if series is None else None))


def _mbpp(model: str, kernel, d: ScenarioData, cfg: FitConfig, endo: bool):
    if model == "mbpp-closed":
        if not isinstance(kernel, ExponentialKernel):
            raise ValueError("closed-form MBPP needs the exponential kernel")
        if abs(kernel.kappa - 1.0) < CRITICAL_BAND:
            raise ValueError("inside the kappa = 1 guard band")
        return MbppModel(kernel, d.exogenous)
    grid = _grid_for(d, cfg)
    observed = None
    if cfg.approx_cells == "observed":
        series = d.total_counts
        if series is None or not np.array_equal(series.boundaries, grid.points):
            raise ValueError("observed grid cells need all-event counts on the grid itself")
        observed = series.counts
    return ApproxMbpp(kernel, d.exogenous, grid, observed_cells=observed)


def sequence_loss(d: ScenarioData, model: str, loss: LossSpec, kernel, cfg: FitConfig,
                  cache=None) -> float:
    scen = d.scenario
    endo = loss.endogenous
    if model == "hawkes":
        if scen == "A":
            m = HawkesModel(kernel, d.exogenous, d.events)
            return pp_ll(m, d.events, d.T, m.intensity_at_parents())
        if scen == "B":
            m = HawkesModel(kernel, d.exogenous, d.all_events)
            lam = m.intensity_at_parents()
            if not endo:
                return pp_ll(m, m.parents, d.T, lam)
            off = ~np.isin(m.parents, d.immigrants)
            return pp_ll(EndogenousPart(m), m.parents[off], d.T, lam[off])
        m = HawkesModel(kernel, d.exogenous, d.events, mean_field=True)
        lam = m.intensity_at_parents()
        if endo:
            return pp_ll(EndogenousPart(m), m.parents, d.T, lam - d.exogenous.eval(m.parents))
        return pp_ll(m, m.parents, d.T, lam)

    if loss.family == "hip":
        days = d.total_counts
        s = d.exogenous
        daily = np.concatenate([[0.0], np.diff(s.integral(days.boundaries))])
        return hip_loss(kernel, daily, days)

    key = (id(d.exogenous), d.T, scen)
    if cache is not None and key in cache:
        m = cache[key]
    else:
        m = _mbpp(model, kernel, d, cfg, endo)
        if cache is not None:
            cache[key] = m
    target = EndogenousPart(m) if endo else m

    if scen in "ABC":
        events = d.events if (endo or scen == "C") else d.all_events
        return pp_ll(target, events, d.T)

    series = d.counts if endo else d.total_counts
    ckey = (key, endo, series.boundaries.tobytes())
    if cache is not None and ckey in cache:
        xi = cache[ckey]
    else:
        xi = interval_compensators(target, series.boundaries)
        if cache is not None:
            cache[ckey] = xi
    if loss.family == "icll":
        return ic_ll(xi, series.counts)
    return bregman("sse", series.counts, xi)


def fit(data, model: str, loss: LossSpec, cfg: FitConfig | None = None) -> FitResult:
    """Fit one parameter set shared by every sequence in ``data`` (a group)."""
    cfg = cfg or FitConfig()
    group = [data] if isinstance(data, ScenarioData) else list(data)
    if not group:
        raise ValueError("no sequences to fit")
    scen = group[0].scenario
    if any(d.scenario != scen for d in group):
        raise ValueError("a group must come from a single scenario")
    check_combination(scen, model, loss)
    if model == "mbpp-closed" and cfg.kernel != "exponential":
        raise ValueError("closed-form MBPP needs the exponential kernel")
    if loss.family == "hip":
        for d in group:
            widths = np.diff(d.total_counts.boundaries)
            if not np.allclose(widths, 1.0, rtol=0, atol=1e-12):
                raise ValueError("the discrete-convolution loss needs unit-length intervals "
                                 f"(got widths {widths.min():g}..{widths.max():g})")
    names = param_names(cfg)
    bounds = [cfg.bound(n) for n in names]

    def objective(p):
        kernel = make_kernel(cfg, p)
        cache = {}
        total = 0.0
        for d in group:
            total += sequence_loss(d, model, loss, kernel, cfg, cache)
        return total

    params, best, losses, ok, nfev = multistart_minimize(
        objective, names, bounds, cfg.restarts, cfg.seed, cfg.xatol, cfg.fatol, cfg.max_evals)
    if best >= PENALTY:
        raise RuntimeError("every restart diverged; check the data and bounds")
    return FitResult(params=params, loss=best, restarts=cfg.restarts, converged=ok,
                     scenario=scen, loss_name=loss.family, model=model,
                     endogenous=loss.endogenous, saturated=_saturated(names, bounds, params),
                     restart_losses=losses, n_sequences=len(group), seed=cfg.seed,
                     evaluations=nfev)


def fit_groups(data, model: str, loss: LossSpec, cfg: FitConfig | None = None) -> list[FitResult]:
    cfg = cfg or FitConfig()
    data = list(data)
    size = cfg.group_size
    out = []
    for g, lo in enumerate(range(0, len(data), size)):
        sub = FitConfig(**{**asdict(cfg), "seed": cfg.seed + g})
        out.append(fit(data[lo:lo + size], model, loss, sub))
    return out


def summarize(results: list[FitResult]) -> dict:
    """Mean and sample standard deviation of each parameter across groups."""
    names = list(results[0].params)
    out = {}
    for n in names:
        vals = np.array([r.params[n] for r in results])
        out[n] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
    return out
