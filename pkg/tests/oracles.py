"""Independent reference solutions used across the test suite."""
import numpy as np
from scipy.integrate import quad, solve_ivp

from mbpp.exogenous import Augmented, PiecewiseConstant, Rect


def _breaks(s):
    if isinstance(s, Rect):
        return [s.a, s.b]
    if isinstance(s, PiecewiseConstant):
        return list(s.boundaries)
    if isinstance(s, Augmented):
        return list(s.base.boundaries)
    return []


def ode_mean_behaviour(k, s, ts):
    """xi and Xi for an exponential kernel by integrating y' = -theta*y + kappa*theta*xi.

    y is the excitation term phi*xi, so xi = s + y; atoms of s kick y by
    kappa*theta*mass and Xi by mass.
    """
    ts = np.asarray(ts, dtype=float)
    atom_t, atom_m = s.atoms()
    stops = sorted({0.0, *[b for b in _breaks(s) if 0 < b < ts.max()], *atom_t.tolist(),
                    float(ts.max())})
    kt = k.kappa * k.theta

    def rhs(t, z):
        xi = float(s.eval(t)) + z[0]
        return [-k.theta * z[0] + kt * xi, xi]

    y = np.zeros(2)
    xi_out, cum_out = np.zeros(ts.size), np.zeros(ts.size)
    for lo, hi in zip(stops[:-1], stops[1:]):
        for a, m in zip(atom_t, atom_m):
            if a == lo:
                y = y + [kt * m, m]
        inside = (ts > lo) & (ts <= hi)
        sol = solve_ivp(rhs, (lo, hi), y, rtol=1e-12, atol=1e-12, dense_output=True,
                        max_step=0.05, method="DOP853")
        if inside.any():
            z = sol.sol(ts[inside])
            xi_out[inside] = s.eval(ts[inside]) + z[0]
            cum_out[inside] = z[1]
        y = sol.y[:, -1]
    # Xi counts an atom at a for every t >= a, including t = a itself
    for a, m in zip(atom_t, atom_m):
        cum_out[ts == a] += m
    return xi_out, cum_out


def volterra_residual(k, s, xi_fn, t):
    """xi(t) - s(t) - (phi * xi)(t) - sum over atoms of mass * phi(t - a)."""
    atom_t, atom_m = s.atoms()
    pts = [b for b in _breaks(s) if 0 < b < t]
    conv = quad(lambda u: float(k(t - u)) * float(xi_fn(u)), 0, t, limit=400, points=pts or None,
                epsabs=1e-13, epsrel=1e-12)[0]
    conv += float(sum(m * k(t - a) for a, m in zip(atom_t, atom_m)))
    return float(xi_fn(t)) - float(s.eval(t)) - conv
