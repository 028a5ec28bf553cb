"""Closed-form mean-behaviour intensity xi(t) and compensator Xi(t).

For an exponential kernel the impulse response is E = delta + h with
h(t) = kappa*theta*exp((kappa-1)*theta*t), so xi = s + h*s and
Xi = S + h*S. Each exogenous family below has that convolution written out.
Two helpers carry most of the algebra:

    H(u) = int_0^u h = kappa/(kappa-1) * (exp(r u) - 1),   r = (kappa-1)*theta
    G(u) = int_0^u H = kappa/(kappa-1) * ((exp(r u) - 1)/r - u)

and both vanish for u <= 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exogenous import (Augmented, Dassios, Exogenous, Impulse, MultiImpulse,
                        PiecewiseConstant, Rect, SinePlus)
from .kernels import ExponentialKernel, Kernel

CRITICAL_BAND = 1e-6


class SupercriticalWarning(RuntimeWarning):
    pass


def _check_kernel(k: Kernel) -> ExponentialKernel:
    if not isinstance(k, ExponentialKernel):
        raise TypeError("closed forms exist only for the exponential kernel")
    if abs(k.kappa - 1.0) < CRITICAL_BAND:
        raise ValueError(f"closed forms are singular at kappa = 1 (got {k.kappa})")
    if k.kappa > 1.0:
        warnings.warn(f"kappa = {k.kappa} > 1: process is supercritical", SupercriticalWarning,
                      stacklevel=3)
    return k


def impulse_response_h(k: Kernel, t):
    k = _check_kernel(k)
    t = np.asarray(t, dtype=float)
    r = (k.kappa - 1.0) * k.theta
    pos = t > 0
    return np.where(pos, k.kappa * k.theta * np.exp(r * np.where(pos, t, 0.0)), 0.0)


def _H(k: ExponentialKernel, u):
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    r = (k.kappa - 1.0) * k.theta
    return k.kappa / (k.kappa - 1.0) * np.expm1(r * u)


def _G(k: ExponentialKernel, u):
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    r = (k.kappa - 1.0) * k.theta
    return k.kappa / (k.kappa - 1.0) * (np.expm1(r * u) / r - u)


def _h(k: ExponentialKernel, u):
    u = np.asarray(u, dtype=float)
    r = (k.kappa - 1.0) * k.theta
    pos = u > 0
    return np.where(pos, k.kappa * k.theta * np.exp(r * np.where(pos, u, 0.0)), 0.0)


# Each family returns (continuous part of xi, Xi). Half-open (x, y] throughout:
# an atom at a is inside Xi(t) for every t >= a.

def _atoms_intensity(k, times, masses, t):
    if times.size == 0:
        return np.zeros_like(t)
    return (_h(k, t[..., None] - times) * masses).sum(axis=-1)


def _atoms_compensator(k, times, masses, t):
    if times.size == 0:
        return np.zeros_like(t)
    lag = t[..., None] - times
    return (np.where(lag >= 0, 1.0 + _H(k, lag), 0.0) * masses).sum(axis=-1)


def _rect_parts(k, a, b, height, t):
    xi = height * (((t > a) & (t <= b)) + _H(k, t - a) - _H(k, t - b))
    cum = height * (np.clip(t - a, 0.0, b - a) + _G(k, t - a) - _G(k, t - b))
    return xi, cum


def _piecewise_parts(k, pc: PiecewiseConstant, t):
    # sum of rects: s = sum_k jump_k [t > q_k], so xi = s + sum_k jump_k H(t - q_k)
    q, jump = pc.boundaries, pc.jumps()
    lag = t[..., None] - q
    xi = pc.eval(t) + (_H(k, lag) * jump).sum(axis=-1)
    cum = pc.integral(t) + (_G(k, lag) * jump).sum(axis=-1)
    return xi, cum


def _dassios_parts(k, s: Dassios, t):
    # s = A + B exp(-beta t); the exogenous decay need not match the kernel's.
    A, B, beta = s.level, s.u0 - s.level, s.theta
    r = (k.kappa - 1.0) * k.theta
    kt = k.kappa * k.theta
    tp = np.maximum(t, 0.0)
    g = r + beta
    if abs(g) > 1e-12:
        conv = kt * (np.exp(r * tp) - np.exp(-beta * tp)) / g
        conv_int = kt / g * (np.expm1(r * tp) / r + np.expm1(-beta * tp) / beta)
    else:
        conv = kt * tp * np.exp(r * tp)
        conv_int = kt * (np.exp(r * tp) * (r * tp - 1.0) + 1.0) / r ** 2
    xi = s.eval(tp) + A * _H(k, tp) + B * conv
    cum = s.integral(tp) + A * _G(k, tp) + B * conv_int
    return np.where(t >= 0, xi, 0.0), cum


def _dassios_matched(k, u0, t):
    # Table row with exogenous (kappa, theta) equal to the kernel's.
    kap, th = k.kappa, k.theta
    decay = np.exp(-(1.0 - kap) * th * t)
    xi = kap * th / (1.0 - kap) * (1.0 - decay) + u0 * decay
    cum = (kap * th * t / (1.0 - kap)
           + (u0 - kap * th / (1.0 - kap)) / ((1.0 - kap) * th) * (1.0 - decay))
    return xi, cum


def _sine_parts(k, alpha, t):
    kap, th = k.kappa, k.theta
    den = 1 + th ** 2 - 2 * kap * th ** 2 + kap ** 2 * th ** 2
    grow = np.exp((kap - 1) * th * t)
    coef = (alpha + alpha * th ** 2 - 2 * alpha * kap * th ** 2 + alpha * kap ** 2 * th ** 2
            + th * kap - th) / den
    periodic = (np.sin(t) + th ** 2 * np.sin(t) - kap * th ** 2 * np.sin(t)
                - kap * th * np.cos(t)) / den
    xi = -alpha / (kap - 1) + kap / (kap - 1) * coef * grow + periodic
    periodic_int = ((1 + th ** 2 - kap * th ** 2) * (1 - np.cos(t)) - kap * th * np.sin(t)) / den
    cum = (-alpha * t / (kap - 1)
           + kap / ((kap - 1) ** 2 * th) * coef * (grow - 1.0)
           + periodic_int)
    return xi, cum


def _parts(k: ExponentialKernel, s: Exogenous, t):
    t = np.asarray(t, dtype=float)
    if isinstance(s, (Impulse, MultiImpulse)):
        times, masses = s.atoms()
        return _atoms_intensity(k, times, masses, t), _atoms_compensator(k, times, masses, t)
    if isinstance(s, Rect):
        return _rect_parts(k, s.a, s.b, s.height, t)
    if isinstance(s, PiecewiseConstant):
        return _piecewise_parts(k, s, t)
    if isinstance(s, Dassios):
        if s.kappa == k.kappa and s.theta == k.theta:
            xi, cum = _dassios_matched(k, s.u0, np.maximum(t, 0.0))
            return np.where(t >= 0, xi, 0.0), cum
        return _dassios_parts(k, s, t)
    if isinstance(s, SinePlus):
        tp = np.maximum(t, 0.0)
        xi, cum = _sine_parts(k, s.alpha, tp)
        return np.where(t >= 0, xi, 0.0), cum
    if isinstance(s, Augmented):
        times, masses = s.atoms()
        xi_b, cum_b = _piecewise_parts(k, s.base, t)
        pos = t > 0
        xi = (_atoms_intensity(k, times, masses, t)
              + s.nu * np.where(pos, 1.0 + _H(k, t), 0.0) + s.mu * xi_b)
        cum = (_atoms_compensator(k, times, masses, t)
               + s.nu * (np.maximum(t, 0.0) + _G(k, t)) + s.mu * cum_b)
        return xi, cum
    raise TypeError(f"no closed form for exogenous {type(s).__name__}")


@dataclass(frozen=True)
class MbppModel:
    kernel: Kernel
    exogenous: Exogenous

    def intensity(self, t):
        return closed_intensity(self, t)

    def compensator(self, t):
        return closed_compensator(self, t)

    def atoms(self):
        return self.exogenous.atoms()

    def with_kernel(self, kernel: Kernel) -> "MbppModel":
        return MbppModel(kernel, self.exogenous)


def closed_intensity(m: MbppModel, t):
    """Absolutely continuous part of xi; atoms are ``m.atoms()``."""
    return _parts(_check_kernel(m.kernel), m.exogenous, t)[0]


def closed_compensator(m: MbppModel, t):
    return _parts(_check_kernel(m.kernel), m.exogenous, t)[1]


def compensator_interval(m: MbppModel, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x > y):
        raise ValueError("interval needs x <= y")
    cum = closed_compensator(m, np.stack([x, y]))
    return np.maximum(cum[1] - cum[0], 0.0)


def interval_compensators(m, boundaries):
    """Xi(o_{i-1}, o_i] for consecutive boundaries, for any model with ``compensator``."""
    cum = m.compensator(np.asarray(boundaries, dtype=float))
    return np.maximum(np.diff(cum), 0.0)
