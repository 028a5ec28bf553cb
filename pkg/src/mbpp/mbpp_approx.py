"""Grid approximation of the mean-behaviour compensator for any kernel.

Events of grid cell (d_{j-1}, d_j] are treated as if they all happened at
the right edge d_j (lower bound) or the left edge d_{j-1} (upper bound).
Cell expectations are filled left to right from the approximation itself.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exogenous import Exogenous
from .kernels import Kernel


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.points, dtype=float).reshape(-1)
        if d.size < 2 or d[0] != 0 or np.any(np.diff(d) <= 0):
            raise ValueError("grid needs d_0 = 0, strictly increasing, at least one cell")
        object.__setattr__(self, "points", d)

    @classmethod
    def equidistant(cls, T: float, n_cells: int) -> "Grid":
        if n_cells < 1:
            raise ValueError("grid needs at least one cell")
        return cls(np.linspace(0.0, T, n_cells + 1))

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return self.points.size - 1

    def last_cell_before(self, t):
        """D_bar(t) = max{i >= 1 : d_i < t}, 0 when no such i."""
        return np.searchsorted(self.points, np.asarray(t, dtype=float), side="left") - 1


def default_grid(T: float, n_intervals: int, grid_points: int | None = None) -> Grid:
    return Grid.equidistant(T, max(n_intervals, grid_points or 0))


def lower_cells(kernel: Kernel, exogenous: Exogenous, grid: Grid, trace=None) -> np.ndarray:
    """E[M(d_{j-1}, d_j]] under the lower bound, j = 1..D.

    ``trace`` (a list) records which cells each step reads.
    """
    d = grid.points
    S = exogenous.integral(d)
    cells = np.zeros(grid.size)
    prev = S[0]
    for j in range(1, d.size):
        # D_bar(d_j) = j - 1: only cells 1..j-1 are read
        read = cells[: j - 1]
        if trace is not None:
            trace.append((j, j - 1))
        cur = S[j] + read @ kernel.integral(d[j] - d[1:j])
        cells[j - 1] = cur - prev
        prev = cur
    return cells


def upper_cells(kernel: Kernel, exogenous: Exogenous, grid: Grid) -> np.ndarray:
    # Cell j appears in its own right edge value with weight Phi(d_j - d_{j-1});
    # solve that scalar equation instead of iterating.
    d = grid.points
    S = exogenous.integral(d)
    cells = np.zeros(grid.size)
    prev = S[0]
    for j in range(1, d.size):
        own = float(kernel.integral(d[j] - d[j - 1]))
        if own >= 1.0:
            raise ValueError("grid cell too wide for the upper bound: Phi(cell width) >= 1")
        earlier = S[j] + cells[: j - 1] @ kernel.integral(d[j] - d[: j - 1])
        cells[j - 1] = (earlier - prev) / (1.0 - own)
        prev = earlier + own * cells[j - 1]
    return cells


def _check_time(grid: Grid, t):
    t = np.asarray(t, dtype=float)
    if np.any(t > grid.T * (1 + 1e-12)) or np.any(t < 0):
        raise ValueError(f"approximation defined on [0, {grid.T}] only")
    return t


def _from_cells(kernel, exogenous, grid, cells, t, bound):
    t = _check_time(grid, t)
    d = grid.points
    tt = np.minimum(t, grid.T)
    if bound == "lower":
        # cell j contributes Phi(t - d_j) once d_j < t; Phi vanishes otherwise
        weights = kernel.integral(tt[..., None] - d[1:])
    elif bound == "upper":
        # cells 1..D_bar(t)+1, i.e. every cell whose left edge is below t
        lag = tt[..., None] - d[:-1]
        weights = np.where(lag > 0, kernel.integral(lag), 0.0)
    else:
        raise ValueError(f"bound must be 'lower' or 'upper', got {bound!r}")
    return exogenous.integral(t) + weights @ cells


def approx_compensator(kernel: Kernel, exogenous: Exogenous, grid: Grid, t, bound="lower",
                       cells=None):
    if cells is None:
        cells = (lower_cells if bound == "lower" else upper_cells)(kernel, exogenous, grid)
    return _from_cells(kernel, exogenous, grid, np.asarray(cells, dtype=float), t, bound)


def approx_intensity(kernel: Kernel, exogenous: Exogenous, grid: Grid, t, cells=None):
    """Time derivative of the lower bound: s(t) + sum_{d_j < t} E_j phi(t - d_j)."""
    if cells is None:
        cells = lower_cells(kernel, exogenous, grid)
    t = _check_time(grid, t)
    return exogenous.eval(t) + kernel(t[..., None] - grid.points[1:]) @ cells


def approx_compensator_interval(kernel: Kernel, exogenous: Exogenous, grid: Grid, x, y,
                                cells=None):
    """Lower-bound Xi(x, y] written as the explicit two-sum expression."""
    x = _check_time(grid, x)
    y = _check_time(grid, y)
    if np.any(x > y):
        raise ValueError("interval needs x <= y")
    if cells is None:
        cells = lower_cells(kernel, exogenous, grid)
    return _interval_sums(kernel, grid.points, np.asarray(cells, dtype=float), x, y,
                          exogenous.integral(y) - exogenous.integral(x))


def _interval_sums(kernel, d, cells, x, y, exo_part):
    x, y = np.broadcast_arrays(np.atleast_1d(x), np.atleast_1d(y))
    j = np.arange(1, d.size)
    dbar_y = np.searchsorted(d, y, side="left")[:, None] - 1
    dbar_x = np.searchsorted(d, x, side="left")[:, None] - 1
    first = (j <= dbar_y) * (kernel.integral(y[:, None] - d[1:]) - kernel.integral(x[:, None] - d[1:]))
    second = ((j > dbar_x) & (j <= dbar_y)) * kernel.integral(x[:, None] - d[1:])
    out = exo_part + first @ cells + second @ cells
    return out.reshape(np.shape(exo_part)) if np.ndim(exo_part) else out[0]


@dataclass(frozen=True, eq=False)
class ApproxMbpp:
    """Model adapter exposing ``intensity``/``compensator`` like the closed form."""

    kernel: Kernel
    exogenous: Exogenous
    grid: Grid
    bound: str = "lower"
    observed_cells: np.ndarray | None = None

    def __post_init__(self):
        if self.observed_cells is not None:
            cells = np.asarray(self.observed_cells, dtype=float)
        elif self.bound == "lower":
            cells = lower_cells(self.kernel, self.exogenous, self.grid)
        else:
            cells = upper_cells(self.kernel, self.exogenous, self.grid)
        object.__setattr__(self, "cells", cells)

    def compensator(self, t):
        return _from_cells(self.kernel, self.exogenous, self.grid, self.cells, t, self.bound)

    def intensity(self, t):
        if self.bound != "lower":
            raise NotImplementedError("intensity is provided for the lower bound only")
        return approx_intensity(self.kernel, self.exogenous, self.grid, t, self.cells)

    def atoms(self):
        return self.exogenous.atoms()


def conditioned_forecast_compensator(kernel: Kernel, exogenous: Exogenous, observed_boundaries,
                                     observed_counts, horizon_boundaries) -> np.ndarray:
    """Expected counts on future intervals given observed interval counts.

    Observed cells carry their counts, each new interval is appended as a
    cell with its own forecast once computed.
    """
    ob = np.asarray(observed_boundaries, dtype=float)
    hb = np.asarray(horizon_boundaries, dtype=float)
    counts = np.asarray(observed_counts, dtype=float)
    if counts.size != ob.size - 1:
        raise ValueError("observed counts must match observed intervals")
    if hb.size < 2 or hb[0] != ob[-1] or np.any(np.diff(hb) <= 0):
        raise ValueError("horizon boundaries must start at the end of the observation window "
                         "and strictly increase")
    d = np.concatenate([ob, hb[1:]])
    cells = np.concatenate([counts, np.zeros(hb.size - 1)])
    exo = np.diff(exogenous.integral(hb))
    n_obs = counts.size
    for i in range(hb.size - 1):
        x, y = hb[i], hb[i + 1]
        known = n_obs + i
        val = _interval_sums(kernel, d[: known + 1], cells[:known], x, y, np.atleast_1d(exo[i]))
        cells[known] = max(float(val[0]), 0.0)
    return cells[n_obs:]
