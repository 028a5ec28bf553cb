"""Exogenous (immigrant) intensities s(t) and their integrals S(t).

Dirac atoms are never evaluated numerically. Every variant exposes
``atoms()`` -> (times, masses); ``eval`` returns only the absolutely
continuous part and ``integral`` includes every atom at or before t.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

_EMPTY = np.zeros(0)


def _as_array(t):
    return np.asarray(t, dtype=float)


@dataclass(frozen=True)
class Impulse:
    a: float

    def __post_init__(self):
        if not self.a >= 0:
            raise ValueError(f"impulse time must be >= 0, got {self.a}")

    def eval(self, t):
        return np.zeros_like(_as_array(t))

    def integral(self, t):
        return (_as_array(t) >= self.a).astype(float)

    def atoms(self):
        return np.array([float(self.a)]), np.ones(1)

    def sup(self, T):
        return 0.0


@dataclass(frozen=True, eq=False)
class MultiImpulse:
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        if times.size and (times[0] <= 0 or np.any(np.diff(times) < 0)):
            raise ValueError("multi-impulse times must be sorted and strictly positive")
        object.__setattr__(self, "times", times)

    def eval(self, t):
        return np.zeros_like(_as_array(t))

    def integral(self, t):
        return np.searchsorted(self.times, _as_array(t), side="right").astype(float)

    def atoms(self):
        return self.times, np.ones(self.times.size)

    def sup(self, T):
        return 0.0


@dataclass(frozen=True)
class Rect:
    """height on (a, b]."""

    a: float
    b: float
    height: float = 1.0

    def __post_init__(self):
        if not (0 <= self.a < self.b):
            raise ValueError(f"rect needs 0 <= a < b, got a={self.a}, b={self.b}")
        if self.height < 0:
            raise ValueError("rect height must be >= 0")

    def eval(self, t):
        t = _as_array(t)
        return np.where((t > self.a) & (t <= self.b), self.height, 0.0)

    def integral(self, t):
        return self.height * np.clip(_as_array(t) - self.a, 0.0, self.b - self.a)

    def atoms(self):
        return _EMPTY, _EMPTY

    def sup(self, T):
        return float(self.height) if T > self.a else 0.0


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """rates[i] on (boundaries[i], boundaries[i+1]]; zero beyond the last boundary."""

    boundaries: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.boundaries, dtype=float).reshape(-1)
        r = np.asarray(self.rates, dtype=float).reshape(-1)
        if q.size < 2 or q[0] != 0 or np.any(np.diff(q) <= 0):
            raise ValueError("piecewise-constant boundaries must start at 0 and strictly increase")
        if r.size != q.size - 1:
            raise ValueError(f"expected {q.size - 1} rates, got {r.size}")
        if np.any(r < 0):
            raise ValueError("piecewise-constant rates must be >= 0")
        object.__setattr__(self, "boundaries", q)
        object.__setattr__(self, "rates", r)
        cum = np.concatenate([[0.0], np.cumsum(r * np.diff(q))])
        object.__setattr__(self, "_cumulative", cum)

    def eval(self, t):
        t = _as_array(t)
        idx = np.searchsorted(self.boundaries, t, side="left")
        inside = (idx >= 1) & (idx < self.boundaries.size)
        return np.where(inside, self.rates[np.clip(idx - 1, 0, self.rates.size - 1)], 0.0)

    def integral(self, t):
        t = _as_array(t)
        q = self.boundaries
        tc = np.clip(t, 0.0, q[-1])
        j = np.clip(np.searchsorted(q, tc, side="right") - 1, 0, self.rates.size - 1)
        return self._cumulative[j] + self.rates[j] * (tc - q[j])

    def atoms(self):
        return _EMPTY, _EMPTY

    def sup(self, T):
        live = self.boundaries[:-1] < T
        return float(self.rates[live].max()) if live.any() else 0.0

    def jumps(self):
        """Rate change at each boundary, so s(t) = sum_k jumps[k] * [t > q_k]."""
        r = np.concatenate([[0.0], self.rates, [0.0]])
        return np.diff(r)


@dataclass(frozen=True)
class Dassios:
    """s(t) = kappa*theta + (u0 - kappa*theta) * exp(-theta t)."""

    u0: float
    kappa: float
    theta: float

    def __post_init__(self):
        if self.theta <= 0 or self.kappa < 0 or self.u0 < 0:
            raise ValueError("Dassios needs u0 >= 0, kappa >= 0, theta > 0")

    @property
    def level(self):
        return self.kappa * self.theta

    def eval(self, t):
        t = _as_array(t)
        return self.level + (self.u0 - self.level) * np.exp(-self.theta * t)

    def integral(self, t):
        t = np.maximum(_as_array(t), 0.0)
        return self.level * t - (self.u0 - self.level) * np.expm1(-self.theta * t) / self.theta

    def atoms(self):
        return _EMPTY, _EMPTY

    def sup(self, T):
        return float(max(self.u0, self.level))


@dataclass(frozen=True)
class SinePlus:
    alpha: float = 2.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"sine-plus offset must be >= 1 to stay nonnegative, got {self.alpha}")

    def eval(self, t):
        return np.sin(_as_array(t)) + self.alpha

    def integral(self, t):
        t = np.maximum(_as_array(t), 0.0)
        return self.alpha * t + 1.0 - np.cos(t)

    def atoms(self):
        return _EMPTY, _EMPTY

    def sup(self, T):
        return float(self.alpha + 1.0) if T > 0 else 0.0


@dataclass(frozen=True)
class Augmented:
    """gamma*delta(t) + nu*[t > 0] + mu*base(t).

    The gamma mass is an atom at t = 0: it enters S(0) but no interval
    (o_{i-1}, o_i] with o_0 = 0 contains it, so only its offspring are counted.
    """

    gamma: float
    nu: float
    mu: float
    base: PiecewiseConstant = field(repr=False)

    def __post_init__(self):
        if min(self.gamma, self.nu, self.mu) < 0:
            raise ValueError("augmented gamma, nu and mu must be >= 0")

    def eval(self, t):
        t = _as_array(t)
        return np.where(t > 0, self.nu, 0.0) + self.mu * self.base.eval(t)

    def integral(self, t):
        t = _as_array(t)
        return (self.gamma * (t >= 0) + self.nu * np.maximum(t, 0.0)
                + self.mu * self.base.integral(t))

    def atoms(self):
        if self.gamma == 0:
            return _EMPTY, _EMPTY
        return np.zeros(1), np.array([float(self.gamma)])

    def sup(self, T):
        return float(self.nu + self.mu * self.base.sup(T))

    def daily_values(self, n_days: int) -> np.ndarray:
        """s_hat[0..n_days]: gamma on day 0, then nu + mu * base rate of (i-1, i]."""
        days = np.arange(n_days + 1, dtype=float)
        base = self.base.eval(days)
        out = self.nu + self.mu * base
        out[0] = self.gamma + self.mu * base[0]
        return out


Exogenous = Impulse | MultiImpulse | Rect | PiecewiseConstant | Dassios | SinePlus | Augmented


def exo_eval(s: Exogenous, t):
    return s.eval(t)


def exo_integral(s: Exogenous, t):
    return s.integral(t)


def lhpp_from_counts(boundaries, counts) -> PiecewiseConstant:
    """Maximum-likelihood piecewise-constant intensity: count / width per interval."""
    q = np.asarray(boundaries, dtype=float)
    c = np.asarray(counts, dtype=float)
    if np.any(c < 0):
        raise ValueError("counts must be nonnegative")
    if q.ndim != 1 or q.size < 2 or np.any(np.diff(q) <= 0):
        raise ValueError("boundaries must be strictly increasing")
    if c.size != q.size - 1:
        raise ValueError(f"{q.size} boundaries need {q.size - 1} counts, got {c.size}")
    return PiecewiseConstant(q, c / np.diff(q))


def exogenous_to_dict(s: Exogenous) -> dict:
    if isinstance(s, Impulse):
        return {"type": "impulse", "a": s.a}
    if isinstance(s, MultiImpulse):
        return {"type": "multi_impulse", "times": s.times.tolist()}
    if isinstance(s, Rect):
        return {"type": "rect", "a": s.a, "b": s.b, "height": s.height}
    if isinstance(s, PiecewiseConstant):
        return {"type": "piecewise_constant", "boundaries": s.boundaries.tolist(),
                "rates": s.rates.tolist()}
    if isinstance(s, Dassios):
        return {"type": "dassios", "u0": s.u0, "kappa": s.kappa, "theta": s.theta}
    if isinstance(s, SinePlus):
        return {"type": "sine_plus", "alpha": s.alpha}
    if isinstance(s, Augmented):
        return {"type": "augmented", "gamma": s.gamma, "nu": s.nu, "mu": s.mu,
                "base": exogenous_to_dict(s.base)}
    raise TypeError(f"not an exogenous spec: {s!r}")


def exogenous_from_dict(d: dict) -> Exogenous:
    kind = d.get("type")
    try:
        if kind == "impulse":
            return Impulse(float(d["a"]))
        if kind == "multi_impulse":
            return MultiImpulse(np.asarray(d["times"], dtype=float))
        if kind == "rect":
            return Rect(float(d["a"]), float(d["b"]), float(d.get("height", 1.0)))
        if kind == "piecewise_constant":
            return PiecewiseConstant(np.asarray(d["boundaries"]), np.asarray(d["rates"]))
        if kind == "dassios":
            return Dassios(float(d["u0"]), float(d["kappa"]), float(d["theta"]))
        if kind == "sine_plus":
            return SinePlus(float(d.get("alpha", 2.0)))
        if kind == "augmented":
            return Augmented(float(d["gamma"]), float(d["nu"]), float(d["mu"]),
                             exogenous_from_dict(d["base"]))
    except KeyError as exc:
        raise ValueError(f"exogenous config of type {kind!r} is missing field {exc.args[0]!r}") from None
    raise ValueError(
        f"unknown exogenous type {kind!r}; expected one of impulse, multi_impulse, rect, "
        "piecewise_constant, dassios, sine_plus, augmented")


def read_immigrant_times(path) -> MultiImpulse:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "time" not in rows[0]:
        raise ValueError(f"{path}: expected a 'time' column")
    return MultiImpulse(np.sort(np.array([float(r["time"]) for r in rows])))


def read_immigrant_counts(path) -> PiecewiseConstant:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"start", "end", "count"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns start,end,count")
    starts = np.array([float(r["start"]) for r in rows])
    ends = np.array([float(r["end"]) for r in rows])
    if np.any(starts[1:] != ends[:-1]):
        raise ValueError(f"{path}: intervals must be contiguous")
    return lhpp_from_counts(np.concatenate([[starts[0]], ends]), [float(r["count"]) for r in rows])
