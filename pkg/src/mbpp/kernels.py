"""Triggering kernels phi(t) with analytic antiderivatives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_POWERLAW_EXPONENT = 1e-6


@dataclass(frozen=True)
class ExponentialKernel:
    """phi(t) = kappa * theta * exp(-theta t) for t > 0."""

    kappa: float
    theta: float

    def __post_init__(self):
        if not (self.kappa >= 0 and np.isfinite(self.kappa)):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not (self.theta > 0 and np.isfinite(self.theta)):
            raise ValueError(f"theta must be finite and > 0, got {self.theta}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = t > 0
        return np.where(pos, self.kappa * self.theta * np.exp(-self.theta * np.where(pos, t, 0.0)), 0.0)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        return -self.kappa * np.expm1(-self.theta * tp)

    def double_integral(self, t):
        # int_0^t Phi(u) du
        tp = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.kappa * (tp + np.expm1(-self.theta * tp) / self.theta)

    def inverse_integral(self, u):
        # Phi^{-1}(u) for 0 <= u < kappa
        u = np.asarray(u, dtype=float)
        return -np.log1p(-u / self.kappa) / self.theta

    def branching_factor(self) -> float:
        return float(self.kappa)

    def with_params(self, kappa=None, theta=None, c=None) -> "ExponentialKernel":
        return ExponentialKernel(self.kappa if kappa is None else kappa,
                                 self.theta if theta is None else theta)

    def to_dict(self) -> dict:
        return {"type": "exponential", "kappa": float(self.kappa), "theta": float(self.theta)}


@dataclass(frozen=True)
class PowerLawKernel:
    """phi(t) = kappa * (t + c)^-(1 + theta) for t > 0."""

    kappa: float
    theta: float
    c: float

    def __post_init__(self):
        if not (self.kappa >= 0 and np.isfinite(self.kappa)):
            raise ValueError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not (self.theta > MIN_POWERLAW_EXPONENT and np.isfinite(self.theta)):
            raise ValueError(
                f"power-law theta must exceed {MIN_POWERLAW_EXPONENT}, got {self.theta}")
        if not (self.c > 0 and np.isfinite(self.c)):
            raise ValueError(f"power-law c must be finite and > 0, got {self.c}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        pos = t > 0
        return np.where(pos, self.kappa * (np.where(pos, t, 0.0) + self.c) ** -(1.0 + self.theta), 0.0)

    def integral(self, t):
        tp = np.maximum(np.asarray(t, dtype=float), 0.0)
        # c^-theta - (t+c)^-theta = c^-theta * (1 - (1 + t/c)^-theta), written to avoid cancellation
        return self.kappa / self.theta * self.c ** -self.theta * -np.expm1(-self.theta * np.log1p(tp / self.c))

    def double_integral(self, t):
        tp = np.maximum(np.asarray(t, dtype=float), 0.0)
        k, th, c = self.kappa, self.theta, self.c
        if abs(th - 1.0) < 1e-12:
            tail = np.log1p(tp / c)
        else:
            tail = ((tp + c) ** (1.0 - th) - c ** (1.0 - th)) / (1.0 - th)
        return k / th * (c ** -th * tp - tail)

    def inverse_integral(self, u):
        u = np.asarray(u, dtype=float)
        k, th, c = self.kappa, self.theta, self.c
        return (c ** -th - u * th / k) ** (-1.0 / th) - c

    def branching_factor(self) -> float:
        return float(self.kappa * self.c ** -self.theta / self.theta)

    def with_params(self, kappa=None, theta=None, c=None) -> "PowerLawKernel":
        return PowerLawKernel(self.kappa if kappa is None else kappa,
                              self.theta if theta is None else theta,
                              self.c if c is None else c)

    def to_dict(self) -> dict:
        return {"type": "powerlaw", "kappa": float(self.kappa), "theta": float(self.theta),
                "c": float(self.c)}


Kernel = ExponentialKernel | PowerLawKernel


def kernel_eval(k: Kernel, t):
    return k(t)


def kernel_integral(k: Kernel, t):
    return k.integral(t)


def branching_factor(k: Kernel) -> float:
    n = k.branching_factor()
    if not np.isfinite(n):
        raise ValueError("kernel has infinite total mass")
    return n


def kernel_from_dict(d: dict) -> Kernel:
    kind = d.get("type")
    try:
        if kind == "exponential":
            return ExponentialKernel(float(d["kappa"]), float(d["theta"]))
        if kind == "powerlaw":
            return PowerLawKernel(float(d["kappa"]), float(d["theta"]), float(d["c"]))
    except KeyError as exc:
        raise ValueError(f"kernel config of type {kind!r} is missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown kernel type {kind!r}; expected 'exponential' or 'powerlaw'")
