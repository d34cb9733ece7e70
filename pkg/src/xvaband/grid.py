"""Log-price lattice, solver settings, and value surfaces.

The spatial variable is x = ln S on a uniform grid centred at the log
strike; the time grid is uniform on [0, T].  Surfaces store one row per
uniform time level with t increasing, so ``values[0]`` is the t = 0 slice.

The backward march optionally starts with two implicit half steps before
switching to the weighted theta scheme (Rannacher startup), which restores
second-order convergence in the presence of the payoff kink.  The march
therefore visits one extra, non-uniform time level T - dt/2; schedule
arrays carry it explicitly and uniform-slice indices map back to the
public surface rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ClaimSpec, MarketConfig

__all__ = [
    "GridSpec",
    "SolverConfig",
    "SolveDiagnostics",
    "Surface",
    "build_grid",
    "time_schedule",
    "uniform_row_indices",
    "surface_value_at",
    "surface_slope_at",
    "export_surface_csv",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice in (t, x) with x = ln S."""

    x_min: float
    x_max: float
    n_x: int
    n_t: int
    maturity: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if self.x_max <= self.x_min:
            raise ValueError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        if self.n_x < 3:
            raise ValueError(f"n_x must be >= 3, got {self.n_x}")
        if self.n_t < 1:
            raise ValueError(f"n_t must be >= 1, got {self.n_t}")
        if not math.isfinite(self.maturity) or self.maturity <= 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dt(self) -> float:
        return self.maturity / self.n_t

    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    def t_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.maturity, self.n_t + 1)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping and fixed-point iteration settings."""

    picard_tol: float = 1e-12
    picard_max_iter: int = 50
    theta_scheme: float = 0.5
    rannacher: bool = True

    def __post_init__(self) -> None:
        if self.picard_tol <= 0.0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")
        if not 0.0 <= self.theta_scheme <= 1.0:
            raise ValueError("theta_scheme must lie in [0, 1]")


def build_grid(
    claim: ClaimSpec,
    cfg: MarketConfig,
    width_sigmas: float = 6.0,
    n_x: int = 801,
    n_t: int = 400,
) -> GridSpec:
    """Lattice centred at the log strike, wide enough for the terminal law.

    The half-width is ``width_sigmas * sigma * sqrt(T)``.  n_x is bumped to
    the next odd value so the centre is exactly a node.
    """
    if width_sigmas <= 0.0:
        raise ValueError(f"width_sigmas must be positive, got {width_sigmas}")
    if n_x % 2 == 0:
        n_x += 1
    if claim.strike is not None and claim.strike > 0.0:
        center = math.log(claim.strike)
    elif claim.knots:
        # custom claim without strike: centre on the geometric mid-knot
        ss = [k[0] for k in claim.knots]
        center = 0.5 * (math.log(ss[0]) + math.log(ss[-1]))
    else:
        center = 0.0
    half = width_sigmas * cfg.sigma * math.sqrt(claim.maturity)
    return GridSpec(
        x_min=center - half,
        x_max=center + half,
        n_x=n_x,
        n_t=n_t,
        maturity=claim.maturity,
    )


def time_schedule(grid: GridSpec, solver: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """March times (decreasing from T to 0) and the per-step theta weights.

    With Rannacher startup the first uniform interval [T - dt, T] is covered
    by two fully implicit half steps; all remaining steps use theta_scheme.
    """
    T, n_t, dt = grid.maturity, grid.n_t, grid.dt
    tail = np.linspace(T - dt, 0.0, n_t) if n_t > 1 else np.array([0.0])
    if solver.rannacher:
        times = np.concatenate(([T, T - 0.5 * dt], tail))
        thetas = np.concatenate(([1.0, 1.0], np.full(n_t - 1, solver.theta_scheme)))
    else:
        times = np.concatenate(([T], tail))
        thetas = np.full(n_t, solver.theta_scheme)
    return times, thetas


def uniform_row_indices(grid: GridSpec, solver: SolverConfig) -> np.ndarray:
    """Indices into the march schedule that hold the uniform time levels.

    Returned in increasing-t order, matching the public surface layout.
    """
    n_t = grid.n_t
    if solver.rannacher:
        # schedule rows: T, T - dt/2, T - dt, ..., 0
        sched = np.concatenate(([0], np.arange(2, n_t + 2)))
    else:
        sched = np.arange(0, n_t + 1)
    return sched[::-1].copy()


@dataclass(frozen=True, eq=False)
class SolveDiagnostics:
    """Per-step fixed-point iteration counts and final update norms."""

    step_times: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray

    def max_iterations(self) -> int:
        return int(self.iterations.max()) if self.iterations.size else 0

    def to_records(self) -> list[dict]:
        return [
            {
                "step": int(i),
                "t": float(self.step_times[i]),
                "picard_iterations": int(self.iterations[i]),
                "residual": float(self.residuals[i]),
            }
            for i in range(len(self.iterations))
        ]


@dataclass(frozen=True, eq=False)
class Surface:
    """Value surface on the uniform lattice; values[i, j] = w(t_i, x_j)."""

    grid: GridSpec
    values: np.ndarray
    diagnostics: SolveDiagnostics | None = None

    def __post_init__(self) -> None:
        expect = (self.grid.n_t + 1, self.grid.n_x)
        if self.values.shape != expect:
            raise ValueError(f"surface shape {self.values.shape} != grid shape {expect}")

    def value_at(self, t: float, s: float) -> float:
        return surface_value_at(self.grid, self.values, t, s)

    def slope_at(self, t: float, s: float) -> float:
        return surface_slope_at(self.grid, self.values, t, s)


def _time_weights(grid: GridSpec, t: float) -> tuple[int, int, float]:
    if not 0.0 <= t <= grid.maturity + 1e-12:
        raise ValueError(f"t = {t} outside [0, {grid.maturity}]")
    pos = min(t, grid.maturity) / grid.dt
    i0 = min(int(math.floor(pos)), grid.n_t - 1)
    return i0, i0 + 1, pos - i0


def _space_weights(grid: GridSpec, s: float) -> tuple[int, int, float]:
    if s <= 0.0:
        raise ValueError(f"spot must be positive, got {s}")
    x = math.log(s)
    if not grid.x_min - 1e-12 <= x <= grid.x_max + 1e-12:
        raise ValueError(f"ln(spot) = {x} outside grid [{grid.x_min}, {grid.x_max}]")
    pos = (min(max(x, grid.x_min), grid.x_max) - grid.x_min) / grid.dx
    j0 = min(int(math.floor(pos)), grid.n_x - 2)
    return j0, j0 + 1, pos - j0


def surface_value_at(grid: GridSpec, values: np.ndarray, t: float, s: float) -> float:
    """Bilinear interpolation of a surface at (t, spot)."""
    i0, i1, wt = _time_weights(grid, t)
    j0, j1, wx = _space_weights(grid, s)
    row = (1.0 - wt) * values[i0] + wt * values[i1]
    return float((1.0 - wx) * row[j0] + wx * row[j1])


def surface_slope_at(grid: GridSpec, values: np.ndarray, t: float, s: float) -> float:
    """d/dx of a surface at (t, spot): central differences, then interpolation."""
    i0, i1, wt = _time_weights(grid, t)
    j0, j1, wx = _space_weights(grid, s)
    row = (1.0 - wt) * values[i0] + wt * values[i1]
    dx = grid.dx
    slopes = np.empty_like(row)
    slopes[1:-1] = (row[2:] - row[:-2]) / (2.0 * dx)
    slopes[0] = (row[1] - row[0]) / dx
    slopes[-1] = (row[-1] - row[-2]) / dx
    return float((1.0 - wx) * slopes[j0] + wx * slopes[j1])


def export_surface_csv(grid: GridSpec, values: np.ndarray, path) -> None:
    """Write a surface as t,x,value rows (time-major, repr-formatted)."""
    xs = grid.x_nodes()
    ts = grid.t_nodes()
    with open(path, "w", newline="") as fh:
        fh.write("t,x,value\n")
        for i, t in enumerate(ts):
            row = values[i]
            tr = repr(float(t))
            for j, x in enumerate(xs):
                fh.write(f"{tr},{float(x)!r},{float(row[j])!r}\n")
