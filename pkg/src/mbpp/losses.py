"""Point-process, interval-censored, Bregman and discrete-convolution losses.

Models are duck-typed: anything with ``intensity(t)``, ``compensator(t)`` and
``atoms()`` works (closed-form MBPP, grid-approximated MBPP, Hawkes).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular, toeplitz

from .exogenous import Exogenous, PiecewiseConstant
from .kernels import ExponentialKernel, Kernel

XI_FLOOR = 1e-10


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _xlogy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, y, 1.0)), 0.0)


def self_excitation(k: Kernel, times) -> np.ndarray:
    """sum_{t_j < t_i} phi(t_i - t_j) for each sorted event time t_i."""
    times = np.asarray(times, dtype=float)
    n = times.size
    out = np.zeros(n)
    if n == 0:
        return out
    if isinstance(k, ExponentialKernel):
        decay, acc, pending, last = k.theta, 0.0, 0, times[0]
        for i, t in enumerate(times):
            if t > last:
                acc = (acc + pending) * np.exp(-decay * (t - last))
                pending, last = 0, t
            out[i] = acc
            pending += 1
        return k.kappa * k.theta * out
    block = 512
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        out[lo:hi] = k(times[lo:hi, None] - times[None, :hi]).sum(axis=1)
    return out


@dataclass(frozen=True, eq=False)
class HawkesModel:
    """lambda(t) = s(t) + sum_{p < t} phi(t - p) over the parent times.

    With ``mean_field`` the immigrants are known only through s (interval-
    censored), so their direct excitation enters as the expectation phi*s.
    """

    kernel: Kernel
    exogenous: Exogenous
    parents: np.ndarray
    mean_field: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parents", np.sort(np.asarray(self.parents, dtype=float)))
        if self.mean_field and not isinstance(self.exogenous, PiecewiseConstant):
            raise TypeError("mean-field immigrant excitation needs a piecewise-constant s")

    def _immigrant_part(self, t, integrated=False):
        s = self.exogenous
        lag = np.asarray(t, dtype=float)[..., None] - s.boundaries
        f = self.kernel.double_integral if integrated else self.kernel.integral
        return (f(lag) * s.jumps()).sum(axis=-1)

    def intensity(self, t):
        t = np.asarray(t, dtype=float)
        lam = self.exogenous.eval(t) + self.kernel(t[..., None] - self.parents).sum(axis=-1)
        if self.mean_field:
            lam = lam + self._immigrant_part(t)
        return lam

    def intensity_at_parents(self):
        lam = self.exogenous.eval(self.parents) + self_excitation(self.kernel, self.parents)
        if self.mean_field:
            lam = lam + self._immigrant_part(self.parents)
        return lam

    def compensator(self, t):
        t = np.asarray(t, dtype=float)
        cum = self.exogenous.integral(t) + self.kernel.integral(t[..., None] - self.parents).sum(axis=-1)
        if self.mean_field:
            cum = cum + self._immigrant_part(t, integrated=True)
        return cum

    def atoms(self):
        return self.exogenous.atoms()


@dataclass(frozen=True, eq=False)
class EndogenousPart:
    """xi - s and Xi - S of a wrapped model."""

    model: object

    @property
    def exogenous(self):
        return self.model.exogenous

    def intensity(self, t):
        return self.model.intensity(t) - self.exogenous.eval(t)

    def intensity_at_parents(self):
        return self.model.intensity_at_parents() - self.exogenous.eval(self.model.parents)

    @property
    def parents(self):
        return self.model.parents

    def compensator(self, t):
        return self.model.compensator(t) - self.exogenous.integral(t)

    def atoms(self):
        return np.zeros(0), np.zeros(0)


def pp_ll(model, events, T: float, intensities=None) -> float:
    """-sum log lambda(t_n) + (Lambda(T) - Lambda(0)).

    Events that sit exactly on an atom of the model contribute a zero log
    term; the atom already carries them. Infeasible parameters give +inf.
    """
    events = np.asarray(events, dtype=float)
    atom_times, _ = model.atoms()
    lam = model.intensity(events) if intensities is None else np.asarray(intensities, dtype=float)
    if atom_times.size and events.size:
        lam = np.where(np.isin(events, atom_times), 1.0, lam)
    if events.size and (not np.all(np.isfinite(lam)) or np.any(lam <= 0)):
        return np.inf
    mass = float(np.asarray(model.compensator(np.array([0.0, T]))) @ [-1.0, 1.0])
    return float(-np.log(lam).sum() + mass)


def ic_ll(compensators, counts) -> float:
    """sum Xi_i - sum C_i log Xi_i with Xi_i floored inside the logarithm."""
    xi = np.asarray(compensators, dtype=float)
    c = np.asarray(counts, dtype=float)
    if xi.shape != c.shape:
        raise ValueError("compensators and counts must have the same shape")
    return float(xi.sum() - _xlogy(c, np.maximum(xi, XI_FLOOR)).sum())


def kl_divergence(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y <= 0):
        raise ValueError("KL divergence needs x >= 0 and y > 0")
    return float((_xlogx(x) - _xlogy(x, y)).sum() - (x - y).sum())


def gamma_constant(counts) -> float:
    """Parameter-free term linking IC-LL to KL: ic_ll = KL(C, Xi) + gamma_constant(C)."""
    c = np.asarray(counts, dtype=float)
    return float((c - _xlogx(c)).sum())


def sse(x, y) -> float:
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(d @ d)


def bregman(generator: str, x, y) -> float:
    name = generator.lower()
    if name == "kl":
        return kl_divergence(x, y)
    if name == "sse":
        x = np.asarray(x, dtype=float)
        if np.shape(x) != np.shape(y):
            raise ValueError("x and y must have the same shape")
        return sse(x, y)
    raise ValueError(f"unknown Bregman generator {generator!r}; expected 'kl' or 'sse'")


def discrete_kernel(k: Kernel, n: int) -> np.ndarray:
    """phi[tau] = phi(tau) at integer lags tau = 0..n (phi[0] = 0)."""
    return k(np.arange(n + 1, dtype=float))


def hip_intensity(k: Kernel, daily_exogenous) -> np.ndarray:
    """xi_hat[i] = s[i] + sum_{tau=1}^{i} xi_hat[i - tau] phi[tau], i = 0..m."""
    s = np.asarray(daily_exogenous, dtype=float)
    col = discrete_kernel(k, s.size - 1)
    lower = toeplitz(col, np.zeros(s.size))
    return solve_triangular(np.eye(s.size) - lower, s, lower=True, unit_diagonal=True)


def _unit_counts(counts):
    if hasattr(counts, "boundaries"):
        if not np.allclose(np.diff(counts.boundaries), 1.0, rtol=0, atol=1e-12):
            raise ValueError("the discrete-convolution loss needs unit-length intervals")
        return counts.counts
    return np.asarray(counts, dtype=float)


def hip_loss(k: Kernel, daily_exogenous, counts) -> float:
    """Squared error of day counts 1..m against xi_hat[1..m].

    ``daily_exogenous`` has m + 1 entries; entry 0 seeds day 0.
    """
    c = _unit_counts(counts)
    s = np.asarray(daily_exogenous, dtype=float)
    if s.size != c.size + 1:
        raise ValueError(f"{c.size} day counts need {c.size + 1} daily exogenous values")
    xi = hip_intensity(k, s)
    return sse(c, xi[1:])


def endogenous(model) -> EndogenousPart:
    return EndogenousPart(model)
